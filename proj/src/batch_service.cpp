#include "rydemu/batch_service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "rydemu/errors.hpp"

namespace rydemu {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::pending: return "pending";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::error: return "error";
  }
  return "pending";
}

JobStatus parse_job_status(std::string_view s) {
  if (s == "pending") return JobStatus::pending;
  if (s == "running") return JobStatus::running;
  if (s == "done") return JobStatus::done;
  if (s == "error") return JobStatus::error;
  throw SchemaError("/status", "unknown job status '" + std::string(s) + "'");
}

std::string_view to_string(DeviceType d) { return d == DeviceType::emu_exact ? "EMU_EXACT" : "EMU_TN"; }

DeviceType parse_device_type(std::string_view s) {
  if (s == "EMU_TN") return DeviceType::emu_tn;
  if (s == "EMU_EXACT") return DeviceType::emu_exact;
  throw SchemaError("/device_type", "expected EMU_TN or EMU_EXACT, got '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Scheduler

Scheduler::Scheduler(int slots) : slots_(slots) {
  if (slots < 1) throw ValidationError({"worker slots must be at least 1"});
  for (int i = 0; i < slots; ++i) threads_.emplace_back([this] { worker(); });
}

Scheduler::~Scheduler() { stop(); }

void Scheduler::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    queue_.push_back(std::move(task));
  }
  work_cv_.notify_one();
}

void Scheduler::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return (queue_.empty() || stopping_) && active_ == 0; });
}

void Scheduler::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && threads_.empty()) return;
    stopping_ = true;
    queue_.clear();
  }
  work_cv_.notify_all();
  for (auto& t : threads_)
    if (t.joinable()) t.join();
  threads_.clear();
  idle_cv_.notify_all();
}

int Scheduler::max_observed_concurrency() const {
  std::lock_guard lock(mu_);
  return max_active_;
}

void Scheduler::worker() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      work_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      task = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
      max_active_ = std::max(max_active_, active_);
    }
    try {
      task();
    } catch (...) {
      // Tasks record their own failures; nothing may escape a worker.
    }
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    idle_cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// Store

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json job_spec_json(const JobRecord& j) {
  json vars = json::object();
  for (const auto& [k, v] : j.spec.variables) vars[k] = v;
  return {{"id", j.id}, {"index", j.index}, {"runs", j.spec.runs}, {"seed", j.spec.seed}, {"variables", vars}};
}

std::string batch_of(const std::string& job_id) {
  const auto dash = job_id.rfind('-');
  return dash == std::string::npos ? std::string{} : job_id.substr(0, dash);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_batch_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}() ^
                             static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count())};
  std::lock_guard lock(mu);
  std::ostringstream os;
  os << 'b' << std::hex << (rng() & 0xffffffffffffULL);
  return os.str();
}

}  // namespace

BatchStore::BatchStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "batches");
  load();
}

fs::path BatchStore::batch_dir(const std::string& batch_id) const { return root_ / "batches" / batch_id; }

void BatchStore::load() {
  for (const auto& entry : fs::directory_iterator(root_ / "batches")) {
    if (!entry.is_directory()) continue;
    const fs::path dir = entry.path();
    // Half-created batches (crash between mkdir and rename) are ignored.
    if (!fs::exists(dir / "batch.json") || dir.filename().string().ends_with(".tmp")) continue;
    const json b = json::parse(read_text(dir / "batch.json"));
    BatchRecord rec;
    rec.id = b.at("id").get<std::string>();
    rec.created_at = b.at("created_at").get<std::string>();
    rec.device_type = parse_device_type(b.at("device_type").get<std::string>());
    rec.sequence = b.at("sequence").get<std::string>();
    rec.config = parse_config(b.at("configuration").dump());
    for (const auto& j : b.at("jobs")) {
      JobRecord job;
      job.id = j.at("id").get<std::string>();
      job.batch_id = rec.id;
      job.index = j.at("index").get<int>();
      job.spec.runs = j.at("runs").get<std::int64_t>();
      job.spec.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& [k, v] : j.at("variables").items()) job.spec.variables[k] = v.get<double>();
      rec.job_ids.push_back(job.id);
      jobs_[job.id] = job;
    }
    std::ifstream log(dir / "status.log");
    for (std::string line; std::getline(log, line);) {
      if (line.empty()) continue;
      json e;
      try {
        e = json::parse(line);
      } catch (const json::exception&) {
        continue;  // torn final line after a crash
      }
      auto it = jobs_.find(e.value("job", ""));
      if (it == jobs_.end()) continue;
      it->second.status = parse_job_status(e.value("status", "pending"));
      it->second.message = e.value("message", "");
    }
    batches_[rec.id] = rec;
  }

  // Creation order: batches by timestamp then id, jobs by index.
  std::vector<const BatchRecord*> sorted;
  for (const auto& [id, b] : batches_) sorted.push_back(&b);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const BatchRecord* a, const BatchRecord* b) { return a->created_at < b->created_at; });
  for (const BatchRecord* b : sorted)
    for (const auto& jid : b->job_ids) order_.push_back(jid);

  for (auto& [id, job] : jobs_) {
    const bool has_result = fs::exists(batch_dir(job.batch_id) / "results" / (id + ".counts.json"));
    JobStatus want = job.status;
    if (has_result)
      want = JobStatus::done;
    else if (job.status == JobStatus::running || job.status == JobStatus::done)
      want = JobStatus::pending;
    if (want != job.status) {
      job.status = want;
      job.message.clear();
      append_log(job.batch_id, id, want, "recovered");
    }
  }
}

void BatchStore::append_log(const std::string& batch_id, const std::string& job_id, JobStatus status,
                            const std::string& message) {
  json e = {{"job", job_id}, {"status", std::string(to_string(status))}, {"time", utc_now()}};
  if (!message.empty()) e["message"] = message;
  std::ofstream log(batch_dir(batch_id) / "status.log", std::ios::app);
  log << e.dump() << '\n';
  log.flush();
}

void BatchStore::create(const BatchRecord& batch, const std::vector<JobRecord>& jobs) {
  json b = {{"id", batch.id},
            {"created_at", batch.created_at},
            {"device_type", std::string(to_string(batch.device_type))},
            {"sequence", batch.sequence},
            {"configuration", json::parse(serialize_config(batch.config))},
            {"jobs", json::array()}};
  for (const auto& j : jobs) b["jobs"].push_back(job_spec_json(j));

  const fs::path final_dir = batch_dir(batch.id);
  fs::path tmp = final_dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp / "results");
  fs::create_directories(tmp / "artifacts");
  {
    std::ofstream f(tmp / "batch.json");
    f << b.dump(2) << '\n';
    std::ofstream log(tmp / "status.log");
    for (const auto& j : jobs)
      log << json{{"job", j.id}, {"status", "pending"}, {"time", batch.created_at}}.dump() << '\n';
  }
  std::lock_guard lock(mu_);
  fs::rename(tmp, final_dir);
  batches_[batch.id] = batch;
  for (const auto& j : jobs) {
    jobs_[j.id] = j;
    order_.push_back(j.id);
  }
}

void BatchStore::set_status(const std::string& job_id, JobStatus status, const std::string& message) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("job " + job_id);
  it->second.status = status;
  it->second.message = message;
  append_log(it->second.batch_id, job_id, status, message);
}

void BatchStore::store_result(const std::string& job_id, const RunResult& result) {
  std::string batch_id;
  {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFound("job " + job_id);
    batch_id = it->second.batch_id;
  }
  const fs::path dir = batch_dir(batch_id);
  if (result.final_mps) {
    std::ostringstream os;
    write_mps(os, *result.final_mps);
    write_file_atomic(dir / "artifacts" / (job_id + ".mps"), os.str());
  }
  write_file_atomic(dir / "results" / (job_id + ".diagnostics.json"), diagnostics_record(result));
  write_file_atomic(dir / "results" / (job_id + ".counts.json"), counts_record(result));
  std::string message;
  for (const auto& w : result.diagnostics.warnings) message += (message.empty() ? "" : "; ") + w;
  set_status(job_id, JobStatus::done, message);
}

std::optional<BatchRecord> BatchStore::batch(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = batches_.find(id);
  if (it == batches_.end()) return std::nullopt;
  return it->second;
}

std::optional<JobRecord> BatchStore::job(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobRecord> BatchStore::jobs_of(const std::string& batch_id) const {
  std::lock_guard lock(mu_);
  std::vector<JobRecord> out;
  auto b = batches_.find(batch_id);
  if (b == batches_.end()) return out;
  for (const auto& id : b->second.job_ids) out.push_back(jobs_.at(id));
  return out;
}

std::vector<JobRecord> BatchStore::pending() const {
  std::lock_guard lock(mu_);
  std::vector<JobRecord> out;
  for (const auto& id : order_) {
    const auto& j = jobs_.at(id);
    if (j.status == JobStatus::pending) out.push_back(j);
  }
  return out;
}

std::optional<std::string> BatchStore::counts_text(const std::string& job_id) const {
  const fs::path p = batch_dir(batch_of(job_id)) / "results" / (job_id + ".counts.json");
  if (!fs::exists(p)) return std::nullopt;
  return read_text(p);
}

std::optional<std::string> BatchStore::diagnostics_text(const std::string& job_id) const {
  const fs::path p = batch_dir(batch_of(job_id)) / "results" / (job_id + ".diagnostics.json");
  if (!fs::exists(p)) return std::nullopt;
  return read_text(p);
}

// ---------------------------------------------------------------------------
// Service

namespace {

ApiResponse error_response(int status, const std::string& kind, const std::string& message,
                           json details = json::array()) {
  return {status, {{"error", kind}, {"message", message}, {"violations", std::move(details)}}};
}

std::string sequence_text(const json& body) {
  if (!body.contains("sequence")) throw SchemaError("/sequence", "missing field");
  const json& s = body.at("sequence");
  if (s.is_string()) return s.get<std::string>();
  if (s.is_object()) return s.dump();
  throw SchemaError("/sequence", "expected an object or a string");
}

JobSpec parse_job_spec(const json& j, int index, std::optional<int> default_runs) {
  const std::string path = "/jobs/" + std::to_string(index);
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  JobSpec spec;
  spec.runs = default_runs.value_or(kDefaultRuns);
  spec.seed = static_cast<std::uint64_t>(index);
  for (const auto& [key, v] : j.items()) {
    if (key == "runs") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) throw SchemaError(path + "/runs", "expected a positive integer");
      spec.runs = v.get<std::int64_t>();
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw SchemaError(path + "/seed", "expected a non-negative integer");
      spec.seed = v.get<std::uint64_t>();
    } else if (key == "variables") {
      if (!v.is_object()) throw SchemaError(path + "/variables", "expected an object");
      for (const auto& [name, value] : v.items()) {
        if (!value.is_number()) throw SchemaError(path + "/variables/" + name, "expected a number");
        spec.variables[name] = value.get<double>();
      }
    } else {
      throw SchemaError(path + "/" + key, "unknown field");
    }
  }
  return spec;
}

json violations_json(const ValidationReport& r) {
  json out = json::array();
  for (const auto& v : r.violations) out.push_back({{"kind", v.kind}, {"message", v.message}});
  return out;
}

json job_json(const JobRecord& j) {
  json out = {{"id", j.id},
              {"batch_id", j.batch_id},
              {"index", j.index},
              {"status", std::string(to_string(j.status))},
              {"runs", j.spec.runs},
              {"seed", j.spec.seed}};
  json vars = json::object();
  for (const auto& [k, v] : j.spec.variables) vars[k] = v;
  out["variables"] = vars;
  if (!j.message.empty()) out[j.status == JobStatus::error ? "error" : "message"] = j.message;
  return out;
}

}  // namespace

BatchService::BatchService(fs::path data_dir, int workers, DeviceSpec device, JobRunner runner)
    : store_(std::move(data_dir)), device_(std::move(device)), runner_(std::move(runner)), scheduler_(workers) {
  for (const auto& j : store_.pending()) enqueue(j.id);
}

BatchService::~BatchService() { scheduler_.stop(); }

ApiResponse BatchService::create_batch(const std::string& body_text) {
  BatchRecord batch;
  std::vector<JobRecord> jobs;
  try {
    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error& e) {
      throw SyntaxError(e.what());
    }
    if (!body.is_object()) throw SchemaError("", "expected an object");
    for (const auto& [key, v] : body.items())
      if (key != "sequence" && key != "device_type" && key != "jobs" && key != "configuration")
        throw SchemaError("/" + key, "unknown field");

    batch.sequence = sequence_text(body);
    batch.device_type = parse_device_type(body.value("device_type", std::string("EMU_TN")));
    if (body.contains("configuration")) {
      if (!body["configuration"].is_object()) throw SchemaError("/configuration", "expected an object");
      batch.config = parse_config(body["configuration"].dump());
    }
    batch.config.solver = batch.device_type == DeviceType::emu_exact ? SolverKind::exact : SolverKind::tdvp;
    batch.config.validate();

    if (!body.contains("jobs") || !body["jobs"].is_array() || body["jobs"].empty())
      throw SchemaError("/jobs", "expected a non-empty array");

    batch.id = new_batch_id();
    batch.created_at = utc_now();
    const auto& job_list = body["jobs"];
    for (std::size_t i = 0; i < job_list.size(); ++i) {
      // Each job's resolved sequence must parse and fit the device.
      const int index = static_cast<int>(i);
      JobSpec spec = parse_job_spec(job_list[i], index, std::nullopt);
      const PulseSequence seq = parse_sequence(substitute_variables(batch.sequence, spec.variables));
      if (!job_list[i].contains("runs") && seq.runs) spec.runs = *seq.runs;
      const ValidationReport report = validate_sequence(seq, device_);
      if (!report.ok())
        return error_response(422, "device_limits", "job " + std::to_string(i) + " violates device limits",
                              violations_json(report));
      JobRecord job;
      job.id = batch.id + "-" + std::to_string(i);
      job.batch_id = batch.id;
      job.index = index;
      job.spec = std::move(spec);
      batch.job_ids.push_back(job.id);
      jobs.push_back(std::move(job));
    }
  } catch (const SyntaxError& e) {
    return error_response(400, "syntax", e.what());
  } catch (const SchemaError& e) {
    return error_response(400, "schema", e.what(), json::array({{{"path", e.path()}}}));
  } catch (const ValidationError& e) {
    json details = json::array();
    for (const auto& v : e.violations()) details.push_back({{"message", v}});
    return error_response(400, "validation", e.what(), details);
  } catch (const Error& e) {
    return error_response(400, "invalid", e.what());
  }

  store_.create(batch, jobs);
  for (const auto& j : jobs) enqueue(j.id);
  return {201, {{"batch_id", batch.id}, {"job_ids", batch.job_ids}}};
}

void BatchService::enqueue(const std::string& job_id) {
  scheduler_.submit([this, job_id] { execute(job_id); });
}

void BatchService::execute(const std::string& job_id) {
  const auto job = store_.job(job_id);
  if (!job || job->status != JobStatus::pending) return;
  const auto batch = store_.batch(job->batch_id);
  store_.set_status(job_id, JobStatus::running);
  try {
    const PulseSequence seq = parse_sequence(substitute_variables(batch->sequence, job->spec.variables));
    const ValidationReport report = validate_sequence(seq, device_);
    if (!report.ok()) throw ValidationError({report.violations.front().message});
    const RunResult result = runner_(seq, batch->config, job->spec.runs, job->spec.seed);
    store_.store_result(job_id, result);
  } catch (const std::exception& e) {
    store_.set_status(job_id, JobStatus::error, e.what());
  }
}

ApiResponse BatchService::get_batch(const std::string& id) const {
  const auto batch = store_.batch(id);
  if (!batch) return error_response(404, "not_found", "no batch " + id);
  json jobs = json::array();
  std::map<std::string, int> tally;
  for (const auto& j : store_.jobs_of(id)) {
    jobs.push_back(job_json(j));
    ++tally[std::string(to_string(j.status))];
  }
  return {200,
          {{"id", batch->id},
           {"created_at", batch->created_at},
           {"device_type", std::string(to_string(batch->device_type))},
           {"configuration", json::parse(serialize_config(batch->config))},
           {"status_counts", tally},
           {"jobs", jobs}}};
}

ApiResponse BatchService::get_job(const std::string& id) const {
  const auto job = store_.job(id);
  if (!job) return error_response(404, "not_found", "no job " + id);
  return {200, job_json(*job)};
}

ApiResponse BatchService::get_job_results(const std::string& id) const {
  const auto job = store_.job(id);
  if (!job) return error_response(404, "not_found", "no job " + id);
  if (job->status != JobStatus::done) {
    ApiResponse r = error_response(409, "not_done", "job " + id + " is " + std::string(to_string(job->status)));
    r.body["status"] = std::string(to_string(job->status));
    return r;
  }
  const auto counts = store_.counts_text(id);
  const auto diag = store_.diagnostics_text(id);
  if (!counts || !diag) return error_response(404, "not_found", "results missing for " + id);
  const json c = json::parse(*counts);
  return {200,
          {{"counts", c.at("counts")},
           {"rng", c.at("rng")},
           {"runs", c.at("runs")},
           {"seed", c.at("seed")},
           {"diagnostics", json::parse(*diag)}}};
}

// ---------------------------------------------------------------------------
// HTTP

void mount_routes(httplib::Server& server, BatchService& service, const std::string& token) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto authorized = [token, reply](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.get_header_value("Authorization") == "Bearer " + token) return true;
    reply(res, error_response(401, "unauthorized", "missing or wrong bearer token"));
    return false;
  };

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  server.Post("/v1/batches", [&service, reply, authorized](const httplib::Request& req, httplib::Response& res) {
    if (authorized(req, res)) reply(res, service.create_batch(req.body));
  });
  server.Get(R"(/v1/batches/([^/]+))", [&service, reply, authorized](const httplib::Request& req, httplib::Response& res) {
    if (authorized(req, res)) reply(res, service.get_batch(req.matches[1]));
  });
  server.Get(R"(/v1/jobs/([^/]+)/results)",
             [&service, reply, authorized](const httplib::Request& req, httplib::Response& res) {
               if (authorized(req, res)) reply(res, service.get_job_results(req.matches[1]));
             });
  server.Get(R"(/v1/jobs/([^/]+))", [&service, reply, authorized](const httplib::Request& req, httplib::Response& res) {
    if (authorized(req, res)) reply(res, service.get_job(req.matches[1]));
  });
}

}  // namespace rydemu
