#!/usr/bin/env python3
"""Writes the JSON fixtures under fixtures/. Rerun after editing a pulse."""

import json
import math
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
C6 = 5420158.53


def qubits(points):
    return [{"id": f"q{i}", "x_um": x, "y_um": y} for i, (x, y) in enumerate(points)]


def wave(kind, duration, *vals):
    if kind == "constant":
        return {"kind": "constant", "duration_ns": duration, "value": vals[0]}
    return {"kind": "ramp", "duration_ns": duration, "start": vals[0], "end": vals[1]}


def sequence(points, pulses, runs=None):
    t = 0
    out = []
    for amp, det in pulses:
        out.append({"channel": "ch0", "start_ns": t, "phase_rad": 0.0, "amplitude": amp, "detuning": det})
        t += amp["duration_ns"]
    meas = {"basis": "ground-rydberg"}
    if runs is not None:
        meas["runs"] = runs
    return {
        "register": {"qubits": qubits(points)},
        "channels": [{"id": "ch0", "addressing": "global", "basis": "ground-rydberg"}],
        "pulses": out,
        "measurement": meas,
    }


def adiabatic(omega, d0, df, rise, sweep, fall):
    return [
        (wave("ramp", rise, 0.0, omega), wave("constant", rise, d0)),
        (wave("constant", sweep, omega), wave("ramp", sweep, d0, df)),
        (wave("ramp", fall, omega, 0.0), wave("constant", fall, df)),
    ]


def dump(name, obj, template=False):
    path = ROOT / name
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(obj, indent=2)
    if template:
        # unquote "${...}" so placeholders sit where numbers go
        text = text.replace('"${', "${").replace('}"', "}")
    path.write_text(text + "\n")


def chain(n, a):
    return [(i * a, 0.0) for i in range(n)]


def grid(rows, cols, a):
    return [(c * a, r * a) for r in range(rows) for c in range(cols)]


# Z3 crystal on a 4 um chain, 10 us and 20 us protocols.
Z3 = dict(omega=6.3, d0=-10.0, df=15.0)
Z3_16 = dict(rise=500, sweep=9000, fall=500)
Z3_37 = dict(rise=1000, sweep=18000, fall=1000)

# 2D antiferromagnet, 2.7 us total.
AFM = dict(omega=8.0, d0=-37.7, df=45.0, rise=250, sweep=1950, fall=500, spacing=7.5)

# MIS: detuning crosses zero at tc (us) inside a 5 us pulse.
MIS = dict(omega=6.3, d0=-15.0, df=12.0, rise=300, fall=300, spacing=5.5)
MIS_GRID = [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (3, 1), (0, 2), (2, 2), (3, 2), (1, 3)]


def mis_template():
    m = MIS
    total = 5000
    first = f"${{tc * 1000 - {m['rise']}}}"
    second = f"${{{total - m['fall']} - tc * 1000}}"
    pulses = [
        (wave("ramp", m["rise"], 0.0, m["omega"]), wave("constant", m["rise"], m["d0"])),
        (wave("constant", first, m["omega"]), wave("ramp", first, m["d0"], 0.0)),
        (wave("constant", second, m["omega"]), wave("ramp", second, 0.0, m["df"])),
        (wave("ramp", m["fall"], m["omega"], 0.0), wave("constant", m["fall"], m["df"])),
    ]
    seq = sequence([(x * m["spacing"], y * m["spacing"]) for x, y in MIS_GRID], [], runs=1000)
    starts = [0, m["rise"], "${tc * 1000}", total - m["fall"]]
    seq["pulses"] = [
        {"channel": "ch0", "start_ns": s, "phase_rad": 0.0, "amplitude": a, "detuning": d}
        for s, (a, d) in zip(starts, pulses)
    ]
    return seq


def ud30():
    rng = random.Random(30)
    pts = []
    while len(pts) < 30:
        p = (round(rng.uniform(0, 36), 3), round(rng.uniform(0, 36), 3))
        if all(math.dist(p, q) >= 4.0 for q in pts):
            pts.append(p)
    radius = (C6 / 6.3) ** (1 / 6)
    edges = [[i, j] for i in range(30) for j in range(i + 1, 30) if math.dist(pts[i], pts[j]) < radius]
    return {"register": {"qubits": qubits(pts)}, "radius_um": radius, "edges": edges}


def main():
    dump("device.json", {
        "name": "desk",
        "max_qubits": 36,
        "min_spacing_um": 4.0,
        "max_omega": 15.8,
        "max_abs_delta": 126.0,
        "max_duration_ns": 20000,
        "interaction_coeff": C6,
    })
    dump("sequences/code_sample_1.json",
         sequence(grid(6, 6, 7.0), [(wave("constant", 1000, 2.0), wave("constant", 1000, -6.0))], runs=1000))
    dump("sequences/empty.json", sequence(chain(4, 6.0), []))
    z = Z3
    dump("sequences/z3_chain16.json", sequence(chain(16, 4.0), adiabatic(z["omega"], z["d0"], z["df"], **Z3_16)))
    dump("sequences/z3_chain37.json", sequence(chain(37, 4.0), adiabatic(z["omega"], z["d0"], z["df"], **Z3_37)))
    a = AFM
    for rows, cols in ((3, 3), (4, 4)):
        dump(f"sequences/afm_{rows}x{cols}.json",
             sequence(grid(rows, cols, a["spacing"]),
                      adiabatic(a["omega"], a["d0"], a["df"], a["rise"], a["sweep"], a["fall"]), runs=1000))
    dump("sequences/mis_template.json", mis_template(), template=True)
    dump("graphs/ud30.json", ud30())


if __name__ == "__main__":
    main()
