#pragma once

// JSON abstract representation of registers and pulse sequences.
//
// Units: positions in μm, durations in integer ns, amplitudes and
// detunings in rad/μs, phases in rad.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rydemu {

struct Position {
  double x_um = 0.0;
  double y_um = 0.0;
  bool operator==(const Position&) const = default;
};

struct Register {
  std::vector<std::string> qubit_ids;
  std::vector<Position> positions;

  std::size_t size() const noexcept { return positions.size(); }
  /// Index of `id` in `qubit_ids`, or -1.
  int index_of(std::string_view id) const;

  /// Atoms on the x axis, `spacing_um` apart, ids q0..q{n-1}.
  static Register chain(int n, double spacing_um);
  /// Row-major rows×cols grid with ids q0.. in row-major order.
  static Register grid(int rows, int cols, double spacing_um);

  bool operator==(const Register&) const = default;
};

enum class WaveformKind { constant, ramp, samples };

struct Waveform {
  WaveformKind kind = WaveformKind::constant;
  std::int64_t duration_ns = 0;
  double value = 0.0;           // constant
  double start = 0.0;           // ramp
  double end = 0.0;             // ramp
  std::vector<double> samples;  // samples, one per ns

  static Waveform constant(std::int64_t duration_ns, double value);
  static Waveform ramp(std::int64_t duration_ns, double start, double end);
  static Waveform from_samples(std::vector<double> samples);

  /// Values on the 1 ns grid. Ramps interpolate linearly including both
  /// endpoints: sample i equals start + (end - start) * i / (duration - 1).
  std::vector<double> sample() const;

  bool operator==(const Waveform&) const = default;
};

struct Pulse {
  Waveform amplitude;
  Waveform detuning;
  double phase_rad = 0.0;
  std::string channel;
  std::int64_t start_ns = 0;

  std::int64_t duration_ns() const noexcept { return amplitude.duration_ns; }
  std::int64_t end_ns() const noexcept { return start_ns + amplitude.duration_ns; }

  bool operator==(const Pulse&) const = default;
};

enum class Addressing { global, local };

struct Channel {
  std::string id;
  Addressing addressing = Addressing::global;
  std::vector<std::string> targets;  // local channels only
  std::string basis = "ground-rydberg";

  bool operator==(const Channel&) const = default;
};

struct PulseSequence {
  Register reg;
  std::vector<Channel> channels;
  std::vector<Pulse> pulses;
  std::string measurement_basis = "ground-rydberg";
  std::optional<int> runs;
  std::string initial_state;  // bit i = qubit i; '1' is the Rydberg state

  std::size_t num_qubits() const noexcept { return reg.size(); }
  /// End of the last pulse, 0 when there are no pulses.
  std::int64_t duration_ns() const noexcept;
  const Channel* find_channel(std::string_view id) const noexcept;
  /// `initial_state`, or all zeros when unset.
  std::string initial_bits() const;

  bool operator==(const PulseSequence&) const = default;
};

enum class Precision { low, normal, high };
enum class SolverKind { tdvp, exact };

/// Discarded-weight threshold for a precision level.
double precision_epsilon(Precision p);
Precision parse_precision(std::string_view s);
std::string_view to_string(Precision p);
SolverKind parse_solver(std::string_view s);
std::string_view to_string(SolverKind s);

/// Interaction coefficient C of the desk device, rad·μs⁻¹·μm⁶.
inline constexpr double kDefaultInteractionCoeff = 5420158.53;

struct EmulatorConfig {
  double dt_ns = 10.0;
  Precision precision = Precision::normal;
  int max_bond_dim = 400;
  double interaction_coeff = kDefaultInteractionCoeff;
  SolverKind solver = SolverKind::tdvp;

  double epsilon() const { return precision_epsilon(precision); }
  /// Throws ValidationError when dt, max_bond_dim or C are out of range.
  void validate() const;
};

/// Parses the `configuration` object used by the CLI and the REST API:
/// {"dt": 10.0, "precision": "normal", "extra": {"max-bond-dim": 100},
///  "solver": "tdvp", "interaction_coeff": ...}. All keys optional.
EmulatorConfig parse_config(std::string_view json_text);
std::string serialize_config(const EmulatorConfig& config);

struct DeviceSpec {
  std::string name = "desk";
  int max_qubits = 36;
  double min_spacing_um = 4.0;
  double max_omega = 15.8;       // rad/μs
  double max_abs_delta = 126.0;  // rad/μs
  std::int64_t max_duration_ns = 20000;
  double interaction_coeff = kDefaultInteractionCoeff;

  bool operator==(const DeviceSpec&) const = default;
};

DeviceSpec parse_device(std::string_view json_text);
DeviceSpec load_device(const std::string& path);

struct Violation {
  std::string kind;  // qubit_count, spacing, omega, delta, duration
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  bool has(std::string_view kind) const;
};

/// Throws SyntaxError, SchemaError or ValidationError.
PulseSequence parse_sequence(std::string_view json_text);
std::string serialize_sequence(const PulseSequence& seq);

/// Checks a structurally valid sequence against device limits.
ValidationReport validate_sequence(const PulseSequence& seq, const DeviceSpec& device);

struct TimeSeries {
  std::vector<double> omega;
  std::vector<double> delta;
  std::vector<double> phase;
  std::size_t size() const noexcept { return omega.size(); }
};

/// Controls of one channel on the 1 ns grid, zero-padded up to a multiple
/// of `resolution_ns` and block-averaged.
TimeSeries sample_channel(const PulseSequence& seq, std::string_view channel_id,
                          std::int64_t resolution_ns = 1);

/// Per-qubit drive on the 1 ns grid: row t, column qubit. `drive` is the
/// complex Rabi term Ω·e^{iφ} summed over channels, `detuning` likewise.
struct QubitControls {
  Eigen::MatrixXcd drive;
  Eigen::MatrixXd detuning;
  std::int64_t duration_ns() const noexcept { return drive.rows(); }
};
QubitControls qubit_controls(const PulseSequence& seq);

/// Replaces every `${expr}` with the value of `expr`, an arithmetic
/// expression (+ - * / parentheses) over numbers and the given variables.
/// Throws SchemaError on unknown variables or malformed expressions.
std::string substitute_variables(std::string_view text,
                                 const std::map<std::string, double>& variables);

/// Names referenced by placeholders in `text`.
std::vector<std::string> template_variables(std::string_view text);

}  // namespace rydemu
