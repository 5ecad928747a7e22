#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "rydemu/batch_service.hpp"
#include "rydemu/errors.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace rydemu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("rydemu-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string small_sequence() {
  PulseSequence seq = test::global_sequence(Register::chain(3, 6.0));
  test::add_pulse(seq, Waveform::ramp(200, 0.0, 4.0), Waveform::constant(200, -1.0));
  test::add_pulse(seq, Waveform::constant(200, 4.0), Waveform::ramp(200, -1.0, 3.0));
  return serialize_sequence(seq);
}

json batch_body(const std::string& sequence, int jobs, const std::string& device = "EMU_TN") {
  json body = {{"sequence", json::parse(sequence)},
               {"device_type", device},
               {"configuration", {{"dt", 10.0}, {"precision", "normal"}, {"extra", {{"max-bond-dim", 100}}}}},
               {"jobs", json::array()}};
  for (int i = 0; i < jobs; ++i) body["jobs"].push_back({{"runs", 200}, {"seed", 100 + i}});
  return body;
}

/// counts.json bytes of every job in a batch, in job order.
std::vector<std::string> result_records(const BatchService& svc, const std::string& batch_id) {
  std::vector<std::string> out;
  for (const auto& j : svc.store().jobs_of(batch_id)) out.push_back(svc.store().counts_text(j.id).value_or("missing"));
  return out;
}

}  // namespace

TEST_CASE("scheduler bounds concurrency and drains") {
  Scheduler s(3);
  std::atomic<int> done{0};
  for (int i = 0; i < 12; ++i)
    s.submit([&] {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      ++done;
    });
  s.wait_idle();
  CHECK(done == 12);
  CHECK(s.max_observed_concurrency() <= 3);
  CHECK(s.max_observed_concurrency() >= 2);
  s.submit([] { throw std::runtime_error("boom"); });
  s.wait_idle();
  s.submit([&] { ++done; });
  s.wait_idle();
  CHECK(done == 13);
  CHECK_THROWS_AS(Scheduler(0), ValidationError);
}

TEST_CASE("code sample payload creates one pending job") {
  TempDir dir;
  std::atomic<bool> release{false};
  JobRunner blocked = [&](const PulseSequence& seq, const EmulatorConfig& cfg, std::int64_t runs, std::uint64_t seed) {
    while (!release) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    RunResult r;
    r.runs = runs;
    r.seed = seed;
    r.counts[std::string(seq.num_qubits(), '0')] = runs;
    CHECK(cfg.max_bond_dim == 100);
    return r;
  };
  BatchService svc(dir.path, 1, {}, blocked);
  json body = {{"sequence", json::parse(test::read_fixture("sequences/code_sample_1.json"))},
               {"device_type", "EMU_TN"},
               {"configuration", {{"dt", 10.0}, {"precision", "normal"}, {"extra", {{"max-bond-dim", 100}}}}},
               {"jobs", {{{"runs", 1000}}}}};
  const ApiResponse created = svc.create_batch(body.dump());
  REQUIRE(created.status == 201);
  const std::string job_id = created.body["job_ids"][0];
  const std::string batch_id = created.body["batch_id"];
  CHECK(created.body["job_ids"].size() == 1);
  CHECK(fs::exists(dir.path / "batches" / batch_id / "batch.json"));

  // The job is pending or running; no results yet.
  const ApiResponse job = svc.get_job(job_id);
  CHECK(job.status == 200);
  CHECK(job.body["status"] != "done");
  CHECK(svc.get_job_results(job_id).status == 409);

  release = true;
  svc.wait_idle();
  const ApiResponse res = svc.get_job_results(job_id);
  REQUIRE(res.status == 200);
  std::int64_t total = 0;
  for (const auto& [k, v] : res.body["counts"].items()) total += v.get<std::int64_t>();
  CHECK(total == 1000);
  CHECK(res.body["seed"] == 0);  // default seed is the job index
  CHECK(svc.get_batch(batch_id).body["status_counts"]["done"] == 1);
}

TEST_CASE("template batch fans out one job per value") {
  TempDir dir;
  JobRunner fake = [](const PulseSequence& seq, const EmulatorConfig&, std::int64_t runs, std::uint64_t seed) {
    RunResult r;
    r.runs = runs;
    r.seed = seed;
    r.counts[std::string(seq.num_qubits(), '0')] = runs;
    return r;
  };
  BatchService svc(dir.path, 3, {}, fake);
  json body = {{"sequence", test::read_fixture("sequences/mis_template.json")}, {"jobs", json::array()}};
  for (int i = 0; i < 9; ++i) body["jobs"].push_back({{"runs", 100}, {"variables", {{"tc", 0.4 + 0.4 * i}}}});
  const ApiResponse created = svc.create_batch(body.dump());
  REQUIRE(created.status == 201);
  CHECK(created.body["job_ids"].size() == 9);
  svc.wait_idle();
  for (const auto& id : created.body["job_ids"]) CHECK(svc.get_job(id).body["status"] == "done");
  CHECK(svc.scheduler().max_observed_concurrency() <= 3);
}

TEST_CASE("bad submissions are rejected and nothing is stored") {
  TempDir dir;
  BatchService svc(dir.path, 1);
  auto batches = [&] {
    return std::distance(fs::directory_iterator(dir.path / "batches"), fs::directory_iterator{});
  };

  CHECK(svc.create_batch("{nope").status == 400);
  CHECK(svc.create_batch(R"({"sequence": {"register": 1}, "jobs": [{}]})").status == 400);
  json body = batch_body(small_sequence(), 1);
  body["jobs"][0]["colour"] = "red";
  CHECK(svc.create_batch(body.dump()).status == 400);
  body = batch_body(small_sequence(), 1);
  body["configuration"]["dt"] = -1;
  CHECK(svc.create_batch(body.dump()).status == 400);
  body = batch_body(small_sequence(), 0);
  CHECK(svc.create_batch(body.dump()).status == 400);

  // 37 qubits exceeds the device: unprocessable, with a violation list.
  PulseSequence big = test::global_sequence(Register::chain(37, 5.0));
  test::add_pulse(big, Waveform::constant(100, 1.0), Waveform::constant(100, 0.0));
  const ApiResponse r = svc.create_batch(batch_body(serialize_sequence(big), 1).dump());
  CHECK(r.status == 422);
  REQUIRE(r.body["violations"].size() >= 1);
  CHECK(r.body["violations"][0]["kind"] == "qubit_count");

  CHECK(batches() == 0);
  CHECK(svc.get_batch("b123").status == 404);
  CHECK(svc.get_job("b123-0").status == 404);
  CHECK(svc.get_job_results("b123-0").status == 404);
}

TEST_CASE("late failures become job errors") {
  TempDir dir;
  JobRunner failing = [](const PulseSequence&, const EmulatorConfig&, std::int64_t, std::uint64_t) -> RunResult {
    throw TooLarge("register too large for the exact solver");
  };
  BatchService svc(dir.path, 1, {}, failing);
  const ApiResponse created = svc.create_batch(batch_body(small_sequence(), 2, "EMU_EXACT").dump());
  REQUIRE(created.status == 201);
  svc.wait_idle();
  const ApiResponse j = svc.get_job(created.body["job_ids"][1]);
  CHECK(j.body["status"] == "error");
  CHECK(j.body["error"].get<std::string>().find("too large") != std::string::npos);
}

TEST_CASE("resource limit is a warning on a done job") {
  TempDir dir;
  BatchService svc(dir.path, 1);
  PulseSequence seq = test::global_sequence(Register::chain(8, 5.5));
  test::add_pulse(seq, Waveform::constant(300, 12.0), Waveform::ramp(300, -20.0, 20.0));
  json body = batch_body(serialize_sequence(seq), 1);
  body["configuration"] = {{"precision", "high"}, {"extra", {{"max-bond-dim", 2}}}};
  const ApiResponse created = svc.create_batch(body.dump());
  REQUIRE(created.status == 201);
  svc.wait_idle();
  const std::string id = created.body["job_ids"][0];
  CHECK(svc.get_job(id).body["status"] == "done");
  const ApiResponse res = svc.get_job_results(id);
  CHECK(res.body["diagnostics"]["resource_limit"] == true);
  CHECK(!res.body["diagnostics"]["warnings"].empty());
}

TEST_CASE("results are deterministic across worker counts and both solvers") {
  TempDir d1, d4;
  std::vector<std::string> one, four;
  for (const char* device : {"EMU_TN", "EMU_EXACT"}) {
    const std::string body = batch_body(small_sequence(), 6, device).dump();
    {
      BatchService svc(d1.path, 1);
      const ApiResponse r = svc.create_batch(body);
      svc.wait_idle();
      for (auto& s : result_records(svc, r.body["batch_id"])) one.push_back(s);
    }
    {
      BatchService svc(d4.path, 4);
      const ApiResponse r = svc.create_batch(body);
      svc.wait_idle();
      for (auto& s : result_records(svc, r.body["batch_id"])) four.push_back(s);
    }
  }
  CHECK(one == four);
  for (const auto& s : one) CHECK(s.find("\"rng\":\"mt19937_64\"") != std::string::npos);
}

TEST_CASE("restart recovers pending work without losing or repeating results") {
  TempDir dir;
  std::atomic<int> executed{0};
  std::atomic<bool> gate{false};
  JobRunner counting = [&](const PulseSequence& seq, const EmulatorConfig& cfg, std::int64_t runs, std::uint64_t seed) {
    ++executed;
    if (seed >= 103)
      while (!gate) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    return run_emulation(seq, cfg, runs, seed);
  };
  std::string batch_id;
  std::vector<std::string> before;
  {
    BatchService svc(dir.path, 1, {}, counting);
    const ApiResponse r = svc.create_batch(batch_body(small_sequence(), 6).dump());
    batch_id = r.body["batch_id"];
    // Wait until three jobs are done and the fourth is blocked in the runner.
    while (executed < 4) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    before = result_records(svc, batch_id);
    // Simulate a crash: the scheduler drops queued work and the blocked job
    // never completes. stop() joins, so release the runner after the
    // status log already says running, then throw its result away by
    // deleting the files it writes.
    std::thread killer([&] {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      gate = true;
    });
    svc.stop();
    killer.join();
  }
  // Remove the one result that completed during shutdown and mark it as
  // running, as if the process died mid-job.
  const std::string victim = batch_id + "-3";
  fs::remove(dir.path / "batches" / batch_id / "results" / (victim + ".counts.json"));
  {
    std::ofstream log(dir.path / "batches" / batch_id / "status.log", std::ios::app);
    log << json{{"job", victim}, {"status", "running"}}.dump() << '\n';
  }
  CHECK(before[0] != "missing");
  CHECK(before[2] != "missing");

  executed = 0;
  BatchService svc(dir.path, 2, {}, counting);
  svc.wait_idle();
  const auto after = result_records(svc, batch_id);
  for (int i = 0; i < 3; ++i) CHECK(after[static_cast<std::size_t>(i)] == before[static_cast<std::size_t>(i)]);
  CHECK(executed == 3);  // jobs 3, 4, 5 only
  for (const auto& j : svc.store().jobs_of(batch_id)) CHECK(j.status == JobStatus::done);
}

TEST_CASE("concurrent jobs never share simulation state") {
  TempDir dir;
  // Each job writes its seed into thread-local canary storage, yields, and
  // checks nobody else changed it; a shared runner object would collide.
  std::atomic<int> collisions{0};
  JobRunner canary = [&](const PulseSequence& seq, const EmulatorConfig& cfg, std::int64_t runs, std::uint64_t seed) {
    static thread_local std::uint64_t mine = 0;
    mine = seed;
    RunResult r = run_emulation(seq, cfg, runs, seed);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (mine != seed) ++collisions;
    return r;
  };
  BatchService svc(dir.path, 4, {}, canary);
  const ApiResponse r = svc.create_batch(batch_body(small_sequence(), 8).dump());
  svc.wait_idle();
  CHECK(collisions == 0);
  // Same seeds through a plain runner give the same records.
  TempDir plain_dir;
  BatchService plain(plain_dir.path, 1);
  const ApiResponse p = plain.create_batch(batch_body(small_sequence(), 8).dump());
  plain.wait_idle();
  CHECK(result_records(svc, r.body["batch_id"]) == result_records(plain, p.body["batch_id"]));
}

TEST_CASE("REST routes") {
  TempDir dir;
  BatchService svc(dir.path, 1);
  httplib::Server server;
  mount_routes(server, svc, "secret");
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  CHECK(client.Get("/healthz")->status == 200);
  CHECK(client.Post("/v1/batches", batch_body(small_sequence(), 1).dump(), "application/json")->status == 401);

  const httplib::Headers auth{{"Authorization", "Bearer secret"}};
  auto created = client.Post("/v1/batches", auth, batch_body(small_sequence(), 2).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const json ids = json::parse(created->body);
  CHECK(client.Post("/v1/batches", auth, "{bad", "application/json")->status == 400);
  svc.wait_idle();
  const std::string job = ids["job_ids"][0];
  CHECK(client.Get("/v1/batches/" + ids["batch_id"].get<std::string>(), auth)->status == 200);
  const auto jr = client.Get("/v1/jobs/" + job, auth);
  CHECK(json::parse(jr->body)["status"] == "done");
  const auto res = client.Get("/v1/jobs/" + job + "/results", auth);
  REQUIRE(res->status == 200);
  const json rj = json::parse(res->body);
  CHECK(rj.contains("counts"));
  CHECK(rj.contains("diagnostics"));
  CHECK(client.Get("/v1/jobs/nope-1", auth)->status == 404);
  CHECK(client.Get("/v1/batches/nope", auth)->status == 404);

  server.stop();
  t.join();
}
