#pragma once

// Batches of emulation jobs: persistence, a worker-slot scheduler and the
// request handlers behind the REST facade.
//
// On-disk layout under the data directory:
//
//   batches/<batch_id>/batch.json        immutable batch record
//   batches/<batch_id>/status.log        one JSON line per status change
//   batches/<batch_id>/results/<job_id>.counts.json
//   batches/<batch_id>/results/<job_id>.diagnostics.json
//   batches/<batch_id>/artifacts/<job_id>.mps
//
// A job counts as done exactly when its counts file exists; that file is
// written last, through a rename, before the status line is appended.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rydemu/emulator.hpp"
#include "rydemu/pulse_ir.hpp"

namespace httplib {
class Server;
}

namespace rydemu {

enum class JobStatus { pending, running, done, error };
std::string_view to_string(JobStatus s);
JobStatus parse_job_status(std::string_view s);

enum class DeviceType { emu_tn, emu_exact };
std::string_view to_string(DeviceType d);
DeviceType parse_device_type(std::string_view s);

/// Fixed-size pool; tasks run in submission order, at most `slots` at once.
class Scheduler {
 public:
  explicit Scheduler(int slots);
  ~Scheduler();
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  void submit(std::function<void()> task);
  /// Blocks until the queue is empty and no task is running.
  void wait_idle();
  /// Lets running tasks finish, drops queued ones and joins the workers.
  void stop();

  int slots() const noexcept { return slots_; }
  int max_observed_concurrency() const;

 private:
  void worker();

  int slots_;
  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  int active_ = 0;
  int max_active_ = 0;
  bool stopping_ = false;
};

struct JobSpec {
  std::int64_t runs = kDefaultRuns;
  std::map<std::string, double> variables;
  std::uint64_t seed = 0;
};

struct JobRecord {
  std::string id;
  std::string batch_id;
  int index = 0;
  JobSpec spec;
  JobStatus status = JobStatus::pending;
  std::string message;  // error text or warnings summary
};

struct BatchRecord {
  std::string id;
  std::string created_at;
  DeviceType device_type = DeviceType::emu_tn;
  std::string sequence;  // template text, placeholders unresolved
  EmulatorConfig config;
  std::vector<std::string> job_ids;
};

/// Directory-backed store. All methods are thread-safe.
class BatchStore {
 public:
  /// Opens (creating if needed) `root` and recovers state: jobs logged as
  /// running return to pending unless their result already exists.
  explicit BatchStore(std::filesystem::path root);

  void create(const BatchRecord& batch, const std::vector<JobRecord>& jobs);
  void set_status(const std::string& job_id, JobStatus status, const std::string& message = {});
  /// Writes the artifact, diagnostics and counts files, then marks done.
  void store_result(const std::string& job_id, const RunResult& result);

  std::optional<BatchRecord> batch(const std::string& id) const;
  std::optional<JobRecord> job(const std::string& id) const;
  std::vector<JobRecord> jobs_of(const std::string& batch_id) const;
  /// Pending jobs in creation order.
  std::vector<JobRecord> pending() const;

  std::optional<std::string> counts_text(const std::string& job_id) const;
  std::optional<std::string> diagnostics_text(const std::string& job_id) const;

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path batch_dir(const std::string& batch_id) const;

 private:
  void append_log(const std::string& batch_id, const std::string& job_id, JobStatus status,
                  const std::string& message);
  void load();

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, BatchRecord> batches_;
  std::map<std::string, JobRecord> jobs_;
  std::vector<std::string> order_;  // job ids in creation order
};

using JobRunner =
    std::function<RunResult(const PulseSequence&, const EmulatorConfig&, std::int64_t runs, std::uint64_t seed)>;

/// An HTTP-shaped reply: status code and JSON body.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class BatchService {
 public:
  BatchService(std::filesystem::path data_dir, int workers, DeviceSpec device = {}, JobRunner runner = run_emulation);
  ~BatchService();

  /// POST /v1/batches. 201 with ids; 400 on malformed input; 422 when the
  /// sequence violates device limits. Nothing is stored on error.
  ApiResponse create_batch(const std::string& body);
  ApiResponse get_batch(const std::string& id) const;
  ApiResponse get_job(const std::string& id) const;
  ApiResponse get_job_results(const std::string& id) const;

  void wait_idle() { scheduler_.wait_idle(); }
  void stop() { scheduler_.stop(); }
  const BatchStore& store() const noexcept { return store_; }
  const Scheduler& scheduler() const noexcept { return scheduler_; }

 private:
  void enqueue(const std::string& job_id);
  void execute(const std::string& job_id);

  BatchStore store_;
  DeviceSpec device_;
  JobRunner runner_;
  Scheduler scheduler_;
};

/// Registers the REST routes on `server`. A non-empty `token` requires
/// `Authorization: Bearer <token>` on every /v1 route.
void mount_routes(httplib::Server& server, BatchService& service, const std::string& token);

}  // namespace rydemu
