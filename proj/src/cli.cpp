#include "rydemu/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rydemu/analysis.hpp"
#include "rydemu/batch_service.hpp"
#include "rydemu/emulator.hpp"
#include "rydemu/errors.hpp"
#include "rydemu/hamiltonian.hpp"
#include "rydemu/tdvp.hpp"

// after Eigen: resolv.h defines a _res macro
#include <httplib.h>

namespace rydemu {

namespace fs = std::filesystem;

namespace {

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ConfigFlags {
  std::string config_path;
  std::optional<double> dt;
  std::optional<std::string> precision;
  std::optional<int> max_bond_dim;
  std::optional<std::string> solver;
  std::optional<double> interaction_coeff;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "configuration JSON file");
    app.add_option("--dt", dt, "time step in ns");
    app.add_option("--precision", precision, "low | normal | high");
    app.add_option("--max-bond-dim", max_bond_dim, "bond dimension cap");
    app.add_option("--solver", solver, "tdvp | exact");
    app.add_option("--interaction-coeff", interaction_coeff, "C in rad/us um^6");
  }

  EmulatorConfig resolve() const {
    EmulatorConfig c = config_path.empty() ? EmulatorConfig{} : parse_config(read_input(config_path));
    if (dt) c.dt_ns = *dt;
    if (precision) c.precision = parse_precision(*precision);
    if (max_bond_dim) c.max_bond_dim = *max_bond_dim;
    if (solver) c.solver = parse_solver(*solver);
    if (interaction_coeff) c.interaction_coeff = *interaction_coeff;
    c.validate();
    return c;
  }
};

void check_device(const std::string& device_path, const PulseSequence& seq) {
  if (device_path.empty()) return;
  const ValidationReport report = validate_sequence(seq, parse_device(read_input(device_path)));
  if (report.ok()) return;
  std::vector<std::string> v;
  for (const auto& x : report.violations) v.push_back(x.kind + ": " + x.message);
  throw ValidationError(v);
}

std::int64_t resolve_runs(std::optional<std::int64_t> flag, const PulseSequence& seq) {
  if (flag) {
    if (*flag < 1) throw UsageError("--runs must be at least 1");
    return *flag;
  }
  return seq.runs ? *seq.runs : kDefaultRuns;
}

int cmd_run(const std::string& path, const ConfigFlags& flags, const std::string& device, std::optional<std::int64_t> runs,
            std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  const PulseSequence seq = parse_sequence(read_input(path));
  check_device(device, seq);
  const EmulatorConfig config = flags.resolve();
  const RunResult result = run_emulation(seq, config, resolve_runs(runs, seq), seed);
  write_run_outputs(out_dir, result);
  if (result.final_mps) {
    std::ofstream f(fs::path(out_dir) / "state.mps", std::ios::binary);
    write_mps(f, *result.final_mps);
  }
  out << "solver " << to_string(config.solver) << ", " << seq.num_qubits() << " qubits, " << seq.duration_ns()
      << " ns\n";
  out << "final <n>:";
  for (Eigen::Index i = 0; i < result.final_excitation.size(); ++i) out << ' ' << result.final_excitation(i);
  out << "\nmax_chi " << result.diagnostics.max_chi << ", discarded weight "
      << result.diagnostics.discarded_weight_cumulative << ", wall " << result.diagnostics.wall_ms << " ms\n";
  for (const auto& w : result.diagnostics.warnings) out << "warning: " << w << '\n';
  out << "wrote " << out_dir << "/{counts.json,trajectory.csv,diagnostics.json}\n";
  return kExitOk;
}

int cmd_compare(const std::string& path, const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
  const PulseSequence seq = parse_sequence(read_input(path));
  if (seq.num_qubits() > kMaxDenseQubits)
    throw TooLarge(std::to_string(seq.num_qubits()) + " qubits exceeds the exact solver limit of " +
                   std::to_string(kMaxDenseQubits) + "; use `rydemu run` for the tensor-network solver alone");
  const EmulatorConfig config = flags.resolve();
  const ExactResult exact = evolve_exact(seq, config);
  const TdvpResult tn = evolve_tdvp(seq, config);
  const StateVector tn_dense = to_dense(tn.final_state);
  const double fid = std::abs(exact.final_state.amplitudes.dot(tn_dense.amplitudes));
  double max_dev = 0.0;
  for (std::size_t k = 0; k < exact.trajectory.excitation.size(); ++k)
    max_dev = std::max(max_dev, (exact.trajectory.excitation[k] - tn.trajectory.excitation[k]).cwiseAbs().maxCoeff());

  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv.precision(12);
  csv << "time_ns,site,n_exact,n_tdvp\n";
  for (std::size_t k = 0; k < exact.trajectory.times_ns.size(); ++k)
    for (Eigen::Index q = 0; q < exact.trajectory.excitation[k].size(); ++q)
      csv << exact.trajectory.times_ns[k] << ',' << q << ',' << exact.trajectory.excitation[k](q) << ','
          << tn.trajectory.excitation[k](q) << '\n';
  write_file_atomic(fs::path(out_dir) / "compare.csv", csv.str());

  out.precision(12);
  out << "fidelity " << fid << "\nmax_site_deviation " << max_dev << "\nmax_chi " << tn.diagnostics.max_chi << '\n';
  return kExitOk;
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> values;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    for (std::string tok; std::getline(ss, tok, ',');) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw UsageError("not a number in --values: '" + tok + "'");
      }
    }
  }
  return values;
}

int cmd_sweep(const std::string& path, const ConfigFlags& flags, const std::string& parameter,
              const std::vector<std::string>& raw_values, std::optional<std::int64_t> runs, std::uint64_t seed,
              std::optional<double> radius, int workers, const std::string& out_dir, std::ostream& out) {
  const std::vector<double> values = parse_values(raw_values);
  if (values.empty()) throw UsageError("--values needs at least one number");
  const std::string text = read_input(path);
  const auto names = template_variables(text);
  if (std::find(names.begin(), names.end(), parameter) == names.end())
    throw UsageError("template has no variable '" + parameter + "'");
  const EmulatorConfig config = flags.resolve();

  // Resolve every point up front so template errors surface before any run.
  std::vector<PulseSequence> seqs;
  for (double v : values) seqs.push_back(parse_sequence(substitute_variables(text, {{parameter, v}})));

  std::vector<std::optional<RunResult>> results(values.size());
  std::vector<std::string> failures(values.size());
  {
    Scheduler scheduler(workers);
    for (std::size_t i = 0; i < values.size(); ++i)
      scheduler.submit([&, i] {
        try {
          results[i] = run_emulation(seqs[i], config, resolve_runs(runs, seqs[i]), seed);
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      });
    scheduler.wait_idle();
  }

  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!results[i]) throw Error("sweep point " + parameter + "=" + std::to_string(values[i]) + " failed: " + failures[i]);
    double max_omega = 0.0;
    const QubitControls controls = qubit_controls(seqs[i]);
    if (controls.drive.size() > 0) max_omega = controls.drive.cwiseAbs().maxCoeff();
    const double r = radius ? *radius : blockade_radius(config.interaction_coeff, max_omega);
    const UDGraph g = ud_graph(seqs[i].reg, r);
    points.push_back({values[i], mis_statistics(results[i]->counts, g)});
    write_run_outputs(fs::path(out_dir) / ("point_" + std::to_string(i)), *results[i]);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, parameter, points);
  write_file_atomic(fs::path(out_dir) / "sweep.csv", csv.str());
  out << csv.str();
  return kExitOk;
}

int cmd_serve(int port, int workers, const std::string& data_dir, const std::string& device_path, std::ostream& out) {
  // Block the shutdown signals in every thread; one thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const DeviceSpec device = device_path.empty() ? DeviceSpec{} : parse_device(read_input(device_path));
  BatchService service(data_dir, workers, device);
  httplib::Server server;
  const char* token = std::getenv("EMU_TOKEN");
  mount_routes(server, service, token ? token : "");

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  if (!server.bind_to_port("0.0.0.0", port)) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw IoError("cannot bind port " + std::to_string(port));
  }
  out << "listening on port " << port << " with " << workers << " worker(s), data in " << data_dir << std::endl;
  server.listen_after_bind();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  service.stop();
  out << "stopped" << std::endl;
  return kExitOk;
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw UsageError(std::string(name) + " is not an integer: " + v);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neutral-atom analog processor emulator", "rydemu"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::string sequence_path, out_dir = "out", device_path, parameter, data_dir;
  std::optional<std::int64_t> runs;
  std::optional<double> radius;
  std::uint64_t seed = 0;
  std::vector<std::string> values;
  int workers = 0, port = 0;

  auto* run = app.add_subcommand("run", "evolve a sequence, sample it and write result files");
  run->add_option("sequence", sequence_path, "sequence JSON")->required();
  flags.add_to(*run);
  run->add_option("--runs", runs, "number of shots");
  run->add_option("--seed", seed, "sampling seed");
  run->add_option("--out-dir", out_dir, "output directory");
  run->add_option("--device", device_path, "device JSON to validate against");

  auto* compare = app.add_subcommand("compare", "run both solvers and report their agreement");
  compare->add_option("sequence", sequence_path, "sequence JSON")->required();
  flags.add_to(*compare);
  compare->add_option("--out-dir", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run a template over values of one variable");
  sweep->add_option("template", sequence_path, "sequence JSON with ${name} placeholders")->required();
  flags.add_to(*sweep);
  sweep->add_option("--param", parameter, "variable name")->required();
  sweep->add_option("--values", values, "values, space or comma separated")->required()->expected(0, -1);
  sweep->add_option("--runs", runs, "shots per point");
  sweep->add_option("--seed", seed, "sampling seed");
  sweep->add_option("--radius", radius, "unit-disk radius in um (default: blockade radius at max amplitude)");
  sweep->add_option("--workers", workers, "concurrent points");
  sweep->add_option("--out-dir", out_dir, "output directory");

  auto* serve = app.add_subcommand("serve", "host the batch REST service");
  serve->add_option("--port", port, "TCP port (env EMU_PORT, default 8080)");
  serve->add_option("--workers", workers, "worker slots (env EMU_WORKERS, default 1)");
  serve->add_option("--data-dir", data_dir, "storage root (env EMU_DATA_DIR, default ./emu-data)");
  serve->add_option("--device", device_path, "device JSON (default: built-in desk device)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(sequence_path, flags, device_path, runs, seed, out_dir, out);
    if (*compare) return cmd_compare(sequence_path, flags, out_dir, out);
    if (*sweep) {
      if (workers == 0) workers = env_int("EMU_WORKERS", 1);
      return cmd_sweep(sequence_path, flags, parameter, values, runs, seed, radius, workers, out_dir, out);
    }
    if (*serve) {
      if (port == 0) port = env_int("EMU_PORT", 8080);
      if (workers == 0) workers = env_int("EMU_WORKERS", 1);
      if (data_dir.empty()) {
        const char* d = std::getenv("EMU_DATA_DIR");
        data_dir = d && *d ? d : "emu-data";
      }
      return cmd_serve(port, workers, data_dir, device_path, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const SyntaxError& e) {
    err << "syntax error: " << e.what() << '\n';
    return kExitSyntax;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const ValidationError& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitValidation;
  } catch (const TooLarge& e) {
    err << "too large: " << e.what() << '\n';
    return kExitTooLarge;
  } catch (const NoConvergence& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const SvdFailure& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const CompressionFailure& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rydemu
