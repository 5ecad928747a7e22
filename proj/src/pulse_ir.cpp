#include "rydemu/pulse_ir.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rydemu/errors.hpp"

namespace rydemu {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Register / waveform basics

int Register::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < qubit_ids.size(); ++i)
    if (qubit_ids[i] == id) return static_cast<int>(i);
  return -1;
}

Register Register::chain(int n, double spacing_um) {
  Register reg;
  for (int i = 0; i < n; ++i) {
    reg.qubit_ids.push_back("q" + std::to_string(i));
    reg.positions.push_back({i * spacing_um, 0.0});
  }
  return reg;
}

Register Register::grid(int rows, int cols, double spacing_um) {
  Register reg;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      reg.qubit_ids.push_back("q" + std::to_string(r * cols + c));
      reg.positions.push_back({c * spacing_um, r * spacing_um});
    }
  return reg;
}

Waveform Waveform::constant(std::int64_t duration_ns, double value) {
  Waveform w;
  w.kind = WaveformKind::constant;
  w.duration_ns = duration_ns;
  w.value = value;
  return w;
}

Waveform Waveform::ramp(std::int64_t duration_ns, double start, double end) {
  Waveform w;
  w.kind = WaveformKind::ramp;
  w.duration_ns = duration_ns;
  w.start = start;
  w.end = end;
  return w;
}

Waveform Waveform::from_samples(std::vector<double> samples) {
  Waveform w;
  w.kind = WaveformKind::samples;
  w.duration_ns = static_cast<std::int64_t>(samples.size());
  w.samples = std::move(samples);
  return w;
}

std::vector<double> Waveform::sample() const {
  const auto n = static_cast<std::size_t>(std::max<std::int64_t>(duration_ns, 0));
  switch (kind) {
    case WaveformKind::constant:
      return std::vector<double>(n, value);
    case WaveformKind::ramp: {
      std::vector<double> out(n);
      if (n == 1) {
        out[0] = start;
      } else {
        for (std::size_t i = 0; i < n; ++i)
          out[i] = start + (end - start) * static_cast<double>(i) / static_cast<double>(n - 1);
        if (n > 0) out[n - 1] = end;
      }
      return out;
    }
    case WaveformKind::samples:
      return samples;
  }
  return {};
}

namespace {

double waveform_min(const Waveform& w) {
  switch (w.kind) {
    case WaveformKind::constant: return w.value;
    case WaveformKind::ramp: return std::min(w.start, w.end);
    case WaveformKind::samples:
      return w.samples.empty() ? 0.0 : *std::min_element(w.samples.begin(), w.samples.end());
  }
  return 0.0;
}

double waveform_max_abs(const Waveform& w) {
  switch (w.kind) {
    case WaveformKind::constant: return std::abs(w.value);
    case WaveformKind::ramp: return std::max(std::abs(w.start), std::abs(w.end));
    case WaveformKind::samples: {
      double m = 0.0;
      for (double v : w.samples) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

bool waveform_finite(const Waveform& w) {
  switch (w.kind) {
    case WaveformKind::constant: return std::isfinite(w.value);
    case WaveformKind::ramp: return std::isfinite(w.start) && std::isfinite(w.end);
    case WaveformKind::samples:
      return std::all_of(w.samples.begin(), w.samples.end(), [](double v) { return std::isfinite(v); });
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// PulseSequence

std::int64_t PulseSequence::duration_ns() const noexcept {
  std::int64_t t = 0;
  for (const auto& p : pulses) t = std::max(t, p.end_ns());
  return t;
}

const Channel* PulseSequence::find_channel(std::string_view id) const noexcept {
  for (const auto& c : channels)
    if (c.id == id) return &c;
  return nullptr;
}

std::string PulseSequence::initial_bits() const {
  return initial_state.empty() ? std::string(num_qubits(), '0') : initial_state;
}

// ---------------------------------------------------------------------------
// Precision / solver enums and configuration

double precision_epsilon(Precision p) {
  switch (p) {
    case Precision::low: return 1e-8;
    case Precision::normal: return 1e-10;
    case Precision::high: return 1e-12;
  }
  return 1e-10;
}

Precision parse_precision(std::string_view s) {
  if (s == "low") return Precision::low;
  if (s == "normal") return Precision::normal;
  if (s == "high") return Precision::high;
  throw SchemaError("/precision", "expected one of low, normal, high; got '" + std::string(s) + "'");
}

std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::low: return "low";
    case Precision::normal: return "normal";
    case Precision::high: return "high";
  }
  return "normal";
}

SolverKind parse_solver(std::string_view s) {
  if (s == "tdvp") return SolverKind::tdvp;
  if (s == "exact") return SolverKind::exact;
  throw SchemaError("/solver", "expected tdvp or exact; got '" + std::string(s) + "'");
}

std::string_view to_string(SolverKind s) { return s == SolverKind::exact ? "exact" : "tdvp"; }

void EmulatorConfig::validate() const {
  std::vector<std::string> errors;
  if (!(dt_ns > 0.0) || !std::isfinite(dt_ns)) errors.push_back("dt must be positive");
  else if (std::abs(dt_ns - std::round(dt_ns)) > 1e-9)
    errors.push_back("dt must be a whole number of ns");
  if (max_bond_dim < 2) errors.push_back("max-bond-dim must be at least 2");
  if (!(interaction_coeff > 0.0) || !std::isfinite(interaction_coeff))
    errors.push_back("interaction coefficient must be positive");
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

namespace {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("malformed JSON: ") + e.what());
  }
}

void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& path) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError(path + "/" + key, "unknown field");
  }
}

const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing required field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
  }
  throw SchemaError(path, "expected an integer");
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

Waveform parse_waveform(const json& j, const std::string& path) {
  check_object(j, path);
  const std::string kind = as_string(require(j, "kind", path), path + "/kind");
  const std::int64_t duration = as_integer(require(j, "duration_ns", path), path + "/duration_ns");
  if (kind == "constant") {
    check_keys(j, {"kind", "duration_ns", "value"}, path);
    return Waveform::constant(duration, as_number(require(j, "value", path), path + "/value"));
  }
  if (kind == "ramp") {
    check_keys(j, {"kind", "duration_ns", "start", "end"}, path);
    return Waveform::ramp(duration, as_number(require(j, "start", path), path + "/start"),
                          as_number(require(j, "end", path), path + "/end"));
  }
  if (kind == "samples") {
    check_keys(j, {"kind", "duration_ns", "samples"}, path);
    const json& arr = require(j, "samples", path);
    if (!arr.is_array()) throw SchemaError(path + "/samples", "expected an array");
    std::vector<double> values;
    values.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      values.push_back(as_number(arr[i], path + "/samples/" + std::to_string(i)));
    Waveform w = Waveform::from_samples(std::move(values));
    w.duration_ns = duration;
    return w;
  }
  throw SchemaError(path + "/kind", "unknown waveform kind '" + kind + "'");
}

json waveform_to_json(const Waveform& w) {
  json j;
  switch (w.kind) {
    case WaveformKind::constant:
      j = {{"kind", "constant"}, {"duration_ns", w.duration_ns}, {"value", w.value}};
      break;
    case WaveformKind::ramp:
      j = {{"kind", "ramp"}, {"duration_ns", w.duration_ns}, {"start", w.start}, {"end", w.end}};
      break;
    case WaveformKind::samples:
      j = {{"kind", "samples"}, {"duration_ns", w.duration_ns}, {"samples", w.samples}};
      break;
  }
  return j;
}

std::vector<std::string> check_invariants(const PulseSequence& seq) {
  std::vector<std::string> v;
  const auto& reg = seq.reg;
  if (reg.size() == 0) v.push_back("register must contain at least one qubit");
  {
    std::set<std::string> ids;
    for (const auto& id : reg.qubit_ids)
      if (!ids.insert(id).second) v.push_back("duplicate qubit id '" + id + "'");
  }
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& p = reg.positions[i];
    if (!std::isfinite(p.x_um) || !std::isfinite(p.y_um))
      v.push_back("qubit '" + reg.qubit_ids[i] + "' has a non-finite coordinate");
    for (std::size_t j = 0; j < i; ++j)
      if (reg.positions[j] == p)
        v.push_back("qubits '" + reg.qubit_ids[j] + "' and '" + reg.qubit_ids[i] + "' coincide");
  }

  std::set<std::string> channel_ids;
  for (const auto& c : seq.channels) {
    if (!channel_ids.insert(c.id).second) v.push_back("duplicate channel id '" + c.id + "'");
    if (c.addressing == Addressing::local && c.targets.empty())
      v.push_back("local channel '" + c.id + "' has no targets");
    for (const auto& t : c.targets)
      if (reg.index_of(t) < 0) v.push_back("channel '" + c.id + "' targets unknown qubit '" + t + "'");
    if (c.basis != seq.measurement_basis)
      v.push_back("channel '" + c.id + "' basis '" + c.basis + "' differs from measurement basis");
  }

  for (std::size_t k = 0; k < seq.pulses.size(); ++k) {
    const auto& p = seq.pulses[k];
    const std::string tag = "pulse " + std::to_string(k);
    if (!seq.find_channel(p.channel)) v.push_back(tag + " references undeclared channel '" + p.channel + "'");
    if (p.amplitude.duration_ns != p.detuning.duration_ns)
      v.push_back(tag + " amplitude and detuning durations differ");
    if (p.amplitude.duration_ns <= 0) v.push_back(tag + " has non-positive duration");
    for (const Waveform* w : {&p.amplitude, &p.detuning}) {
      if (w->kind == WaveformKind::samples &&
          static_cast<std::int64_t>(w->samples.size()) != w->duration_ns)
        v.push_back(tag + " sample count does not match duration");
      if (!waveform_finite(*w)) v.push_back(tag + " has non-finite waveform values");
    }
    if (waveform_min(p.amplitude) < 0.0) v.push_back(tag + " has negative amplitude");
    if (p.start_ns < 0) v.push_back(tag + " starts before t=0");
    if (!std::isfinite(p.phase_rad)) v.push_back(tag + " has non-finite phase");
  }

  // Same-channel pulses must not overlap.
  for (const auto& c : seq.channels) {
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& p : seq.pulses)
      if (p.channel == c.id) spans.emplace_back(p.start_ns, p.end_ns());
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].second)
        v.push_back("overlap on channel '" + c.id + "' at " + std::to_string(spans[i].first) + " ns");
  }

  if (!seq.initial_state.empty()) {
    if (seq.initial_state.size() != reg.size())
      v.push_back("initial_state length differs from qubit count");
    if (seq.initial_state.find_first_not_of("01") != std::string::npos)
      v.push_back("initial_state must contain only '0' and '1'");
  }
  if (seq.runs && *seq.runs < 1) v.push_back("measurement runs must be positive");
  return v;
}

}  // namespace

PulseSequence parse_sequence(std::string_view json_text) {
  const json doc = parse_json(json_text);
  check_object(doc, "");
  check_keys(doc, {"register", "channels", "pulses", "measurement", "initial_state"}, "");

  PulseSequence seq;
  const json& reg = require(doc, "register", "");
  check_object(reg, "/register");
  check_keys(reg, {"qubits"}, "/register");
  const json& qubits = require(reg, "qubits", "/register");
  if (!qubits.is_array()) throw SchemaError("/register/qubits", "expected an array");
  for (std::size_t i = 0; i < qubits.size(); ++i) {
    const std::string path = "/register/qubits/" + std::to_string(i);
    const json& q = qubits[i];
    check_object(q, path);
    check_keys(q, {"id", "x_um", "y_um"}, path);
    seq.reg.qubit_ids.push_back(as_string(require(q, "id", path), path + "/id"));
    seq.reg.positions.push_back({as_number(require(q, "x_um", path), path + "/x_um"),
                                 as_number(require(q, "y_um", path), path + "/y_um")});
  }

  const json& channels = require(doc, "channels", "");
  if (!channels.is_array()) throw SchemaError("/channels", "expected an array");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string path = "/channels/" + std::to_string(i);
    const json& c = channels[i];
    check_object(c, path);
    check_keys(c, {"id", "addressing", "targets", "basis"}, path);
    Channel ch;
    ch.id = as_string(require(c, "id", path), path + "/id");
    const std::string addressing = as_string(require(c, "addressing", path), path + "/addressing");
    if (addressing == "global") ch.addressing = Addressing::global;
    else if (addressing == "local") ch.addressing = Addressing::local;
    else throw SchemaError(path + "/addressing", "expected global or local");
    if (auto it = c.find("targets"); it != c.end()) {
      if (!it->is_array()) throw SchemaError(path + "/targets", "expected an array");
      for (std::size_t t = 0; t < it->size(); ++t)
        ch.targets.push_back(as_string((*it)[t], path + "/targets/" + std::to_string(t)));
    }
    ch.basis = as_string(require(c, "basis", path), path + "/basis");
    seq.channels.push_back(std::move(ch));
  }

  const json& pulses = require(doc, "pulses", "");
  if (!pulses.is_array()) throw SchemaError("/pulses", "expected an array");
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    const std::string path = "/pulses/" + std::to_string(i);
    const json& p = pulses[i];
    check_object(p, path);
    check_keys(p, {"channel", "start_ns", "phase_rad", "amplitude", "detuning"}, path);
    Pulse pulse;
    pulse.channel = as_string(require(p, "channel", path), path + "/channel");
    pulse.start_ns = as_integer(require(p, "start_ns", path), path + "/start_ns");
    pulse.phase_rad = as_number(require(p, "phase_rad", path), path + "/phase_rad");
    pulse.amplitude = parse_waveform(require(p, "amplitude", path), path + "/amplitude");
    pulse.detuning = parse_waveform(require(p, "detuning", path), path + "/detuning");
    seq.pulses.push_back(std::move(pulse));
  }

  const json& meas = require(doc, "measurement", "");
  check_object(meas, "/measurement");
  check_keys(meas, {"basis", "runs"}, "/measurement");
  seq.measurement_basis = as_string(require(meas, "basis", "/measurement"), "/measurement/basis");
  if (auto it = meas.find("runs"); it != meas.end())
    seq.runs = static_cast<int>(as_integer(*it, "/measurement/runs"));

  if (auto it = doc.find("initial_state"); it != doc.end())
    seq.initial_state = as_string(*it, "/initial_state");

  if (auto errors = check_invariants(seq); !errors.empty()) throw ValidationError(std::move(errors));
  return seq;
}

std::string serialize_sequence(const PulseSequence& seq) {
  json qubits = json::array();
  for (std::size_t i = 0; i < seq.reg.size(); ++i)
    qubits.push_back({{"id", seq.reg.qubit_ids[i]},
                      {"x_um", seq.reg.positions[i].x_um},
                      {"y_um", seq.reg.positions[i].y_um}});
  json channels = json::array();
  for (const auto& c : seq.channels) {
    json cj = {{"id", c.id},
               {"addressing", c.addressing == Addressing::global ? "global" : "local"},
               {"basis", c.basis}};
    if (!c.targets.empty()) cj["targets"] = c.targets;
    channels.push_back(std::move(cj));
  }
  json pulses = json::array();
  for (const auto& p : seq.pulses)
    pulses.push_back({{"channel", p.channel},
                      {"start_ns", p.start_ns},
                      {"phase_rad", p.phase_rad},
                      {"amplitude", waveform_to_json(p.amplitude)},
                      {"detuning", waveform_to_json(p.detuning)}});
  json measurement = {{"basis", seq.measurement_basis}};
  if (seq.runs) measurement["runs"] = *seq.runs;
  json doc = {{"register", {{"qubits", qubits}}},
              {"channels", channels},
              {"pulses", pulses},
              {"measurement", measurement}};
  if (!seq.initial_state.empty()) doc["initial_state"] = seq.initial_state;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Configuration and device files

EmulatorConfig parse_config(std::string_view json_text) {
  const json doc = parse_json(json_text);
  check_object(doc, "");
  check_keys(doc, {"dt", "precision", "extra", "solver", "interaction_coeff"}, "");
  EmulatorConfig cfg;
  if (auto it = doc.find("dt"); it != doc.end()) cfg.dt_ns = as_number(*it, "/dt");
  if (auto it = doc.find("precision"); it != doc.end())
    cfg.precision = parse_precision(as_string(*it, "/precision"));
  if (auto it = doc.find("extra"); it != doc.end()) {
    check_object(*it, "/extra");
    check_keys(*it, {"max-bond-dim"}, "/extra");
    if (auto m = it->find("max-bond-dim"); m != it->end())
      cfg.max_bond_dim = static_cast<int>(as_integer(*m, "/extra/max-bond-dim"));
  }
  if (auto it = doc.find("solver"); it != doc.end()) cfg.solver = parse_solver(as_string(*it, "/solver"));
  if (auto it = doc.find("interaction_coeff"); it != doc.end())
    cfg.interaction_coeff = as_number(*it, "/interaction_coeff");
  cfg.validate();
  return cfg;
}

std::string serialize_config(const EmulatorConfig& config) {
  json doc = {{"dt", config.dt_ns},
              {"precision", to_string(config.precision)},
              {"extra", {{"max-bond-dim", config.max_bond_dim}}},
              {"solver", to_string(config.solver)},
              {"interaction_coeff", config.interaction_coeff}};
  return doc.dump();
}

DeviceSpec parse_device(std::string_view json_text) {
  const json doc = parse_json(json_text);
  check_object(doc, "");
  check_keys(doc, {"name", "max_qubits", "min_spacing_um", "max_omega", "max_abs_delta", "max_duration_ns",
                   "interaction_coeff"},
             "");
  DeviceSpec d;
  d.name = as_string(require(doc, "name", ""), "/name");
  d.max_qubits = static_cast<int>(as_integer(require(doc, "max_qubits", ""), "/max_qubits"));
  d.min_spacing_um = as_number(require(doc, "min_spacing_um", ""), "/min_spacing_um");
  d.max_omega = as_number(require(doc, "max_omega", ""), "/max_omega");
  d.max_abs_delta = as_number(require(doc, "max_abs_delta", ""), "/max_abs_delta");
  d.max_duration_ns = as_integer(require(doc, "max_duration_ns", ""), "/max_duration_ns");
  d.interaction_coeff = as_number(require(doc, "interaction_coeff", ""), "/interaction_coeff");
  return d;
}

DeviceSpec load_device(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open device file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_device(ss.str());
}

bool ValidationReport::has(std::string_view kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_sequence(const PulseSequence& seq, const DeviceSpec& device) {
  ValidationReport report;
  const auto n = seq.num_qubits();
  if (static_cast<int>(n) > device.max_qubits)
    report.violations.push_back({"qubit_count", std::to_string(n) + " qubits exceed the device maximum of " +
                                                    std::to_string(device.max_qubits)});
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const auto& a = seq.reg.positions[i];
      const auto& b = seq.reg.positions[j];
      min_dist = std::min(min_dist, std::hypot(a.x_um - b.x_um, a.y_um - b.y_um));
    }
  if (min_dist < device.min_spacing_um * (1.0 - 1e-9))
    report.violations.push_back({"spacing", "minimum atom distance " + std::to_string(min_dist) +
                                                " um is below " + std::to_string(device.min_spacing_um) + " um"});
  double max_omega = 0.0;
  double max_delta = 0.0;
  for (const auto& p : seq.pulses) {
    max_omega = std::max(max_omega, waveform_max_abs(p.amplitude));
    max_delta = std::max(max_delta, waveform_max_abs(p.detuning));
  }
  if (max_omega > device.max_omega)
    report.violations.push_back({"omega", "amplitude " + std::to_string(max_omega) + " rad/us exceeds " +
                                              std::to_string(device.max_omega)});
  if (max_delta > device.max_abs_delta)
    report.violations.push_back({"delta", "detuning " + std::to_string(max_delta) + " rad/us exceeds " +
                                              std::to_string(device.max_abs_delta)});
  if (seq.duration_ns() > device.max_duration_ns)
    report.violations.push_back({"duration", "sequence lasts " + std::to_string(seq.duration_ns()) +
                                                 " ns, device limit is " + std::to_string(device.max_duration_ns)});
  return report;
}

// ---------------------------------------------------------------------------
// Sampling

TimeSeries sample_channel(const PulseSequence& seq, std::string_view channel_id, std::int64_t resolution_ns) {
  if (!seq.find_channel(channel_id)) throw UnknownChannel("unknown channel '" + std::string(channel_id) + "'");
  if (resolution_ns < 1) throw Error("resolution must be at least 1 ns");
  const std::int64_t total = seq.duration_ns();
  const std::int64_t blocks = (total + resolution_ns - 1) / resolution_ns;
  const auto padded = static_cast<std::size_t>(blocks * resolution_ns);
  std::vector<double> omega(padded, 0.0), delta(padded, 0.0), phase(padded, 0.0);
  for (const auto& p : seq.pulses) {
    if (p.channel != channel_id) continue;
    const auto amp = p.amplitude.sample();
    const auto det = p.detuning.sample();
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const auto t = static_cast<std::size_t>(p.start_ns) + i;
      omega[t] = amp[i];
      delta[t] = det[i];
      phase[t] = p.phase_rad;
    }
  }
  if (resolution_ns == 1) return {std::move(omega), std::move(delta), std::move(phase)};

  TimeSeries out;
  const auto r = static_cast<std::size_t>(resolution_ns);
  for (std::int64_t b = 0; b < blocks; ++b) {
    double so = 0.0, sd = 0.0, sp = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const auto t = static_cast<std::size_t>(b) * r + i;
      so += omega[t];
      sd += delta[t];
      sp += phase[t];
    }
    out.omega.push_back(so / static_cast<double>(r));
    out.delta.push_back(sd / static_cast<double>(r));
    out.phase.push_back(sp / static_cast<double>(r));
  }
  return out;
}

QubitControls qubit_controls(const PulseSequence& seq) {
  const auto n = static_cast<Eigen::Index>(seq.num_qubits());
  const auto total = static_cast<Eigen::Index>(seq.duration_ns());
  QubitControls out{Eigen::MatrixXcd::Zero(total, n), Eigen::MatrixXd::Zero(total, n)};
  for (const auto& p : seq.pulses) {
    const Channel* ch = seq.find_channel(p.channel);
    if (!ch) throw UnknownChannel("unknown channel '" + p.channel + "'");
    std::vector<Eigen::Index> targets;
    if (ch->addressing == Addressing::global) {
      for (Eigen::Index q = 0; q < n; ++q) targets.push_back(q);
    } else {
      for (const auto& t : ch->targets) targets.push_back(seq.reg.index_of(t));
    }
    const auto amp = p.amplitude.sample();
    const auto det = p.detuning.sample();
    const std::complex<double> rot = std::polar(1.0, p.phase_rad);
    for (std::size_t i = 0; i < amp.size(); ++i) {
      const auto t = static_cast<Eigen::Index>(p.start_ns + static_cast<std::int64_t>(i));
      for (auto q : targets) {
        out.drive(t, q) += amp[i] * rot;
        out.detuning(t, q) += det[i];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Template substitution

namespace {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const std::map<std::string, double>& vars) : s_(text), vars_(vars) {}

  double parse() {
    double v = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError("${" + std::string(s_) + "}", msg);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = factor();
    for (;;) {
      if (eat('*')) v *= factor();
      else if (eat('/')) v /= factor();
      else return v;
    }
  }
  double factor() {
    if (eat('-')) return -factor();
    if (eat('+')) return factor();
    if (eat('(')) {
      double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t begin = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name(s_.substr(begin, pos_ - begin));
      auto it = vars_.find(name);
      if (it == vars_.end()) fail("unknown variable '" + name + "'");
      return it->second;
    }
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return v;
  }

  std::string_view s_;
  const std::map<std::string, double>& vars_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  // Products like 0.7 * 1000 land a few ulps off an integer; durations
  // must come out as integers.
  if (std::isfinite(v) && std::abs(v) < 1e15 && std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v))) {
    return std::to_string(static_cast<long long>(std::round(v)));
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string substitute_variables(std::string_view text, const std::map<std::string, double>& variables) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const std::size_t close = text.find('}', open);
    if (close == std::string_view::npos) throw SchemaError("${", "unterminated placeholder");
    out.append(text.substr(pos, open - pos));
    out.append(format_number(ExpressionParser(text.substr(open + 2, close - open - 2), variables).parse()));
    pos = close + 1;
  }
  return out;
}

std::vector<std::string> template_variables(std::string_view text) {
  std::set<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find("${", pos)) != std::string_view::npos) {
    const std::size_t close = text.find('}', pos);
    if (close == std::string_view::npos) break;
    const std::string_view body = text.substr(pos + 2, close - pos - 2);
    for (std::size_t i = 0; i < body.size();) {
      if (std::isalpha(static_cast<unsigned char>(body[i])) || body[i] == '_') {
        std::size_t j = i;
        while (j < body.size() && (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '_')) ++j;
        names.emplace(body.substr(i, j - i));
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(body[i])) || body[i] == '.') {
        // skip numeric literals, including exponents like 1e3
        while (i < body.size() && (std::isalnum(static_cast<unsigned char>(body[i])) || body[i] == '.')) ++i;
      } else {
        ++i;
      }
    }
    pos = close + 1;
  }
  return {names.begin(), names.end()};
}

}  // namespace rydemu
