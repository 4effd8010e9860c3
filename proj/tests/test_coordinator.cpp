#include <atomic>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "snipex/coordinator.hpp"
#include "snipex/store.hpp"
#include "snipex/worker.hpp"

using namespace snipex;
using nlohmann::json;

namespace {

std::vector<corpus::Snippet> make_snippets(int count,
                                           const std::string& content = "x=1") {
  std::vector<corpus::Snippet> out;
  for (int i = 0; i < count; ++i) {
    corpus::Snippet s;
    s.snippet_id = std::to_string(i + 1);
    s.content = content;
    s.created_at = *parse_iso8601("2015-06-01T00:00:00Z");
    out.push_back(std::move(s));
  }
  return out;
}

wire::EvaluationResult result_for(const wire::EvaluationJob& job,
                                  const std::string& worker_id) {
  wire::EvaluationResult r;
  r.job_id = job.job_id;
  r.worker_id = worker_id;
  for (const auto& id : job.interpreter_ids) {
    resolver::ExecutionOutcome o;
    o.snippet_id = job.snippet.snippet_id;
    o.interpreter_id = id;
    o.final_status = classifier::Taxonomy::instance().success();
    o.taxonomy_version = classifier::Taxonomy::instance().version();
    sandbox::RawExecution raw;
    raw.exit_status = 0;
    o.attempts.push_back({raw, o.final_status});
    r.outcomes.push_back(std::move(o));
  }
  r.submitted_at = *parse_iso8601("2020-01-01T00:00:00Z");
  return r;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) {
    path = (std::filesystem::temp_directory_path() /
            (name + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(reinterpret_cast<uintptr_t>(this))))
               .string();
  }
  ~TempPath() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("store: load_jobs is idempotent") {
  store::MemoryStore s;
  auto snippets = make_snippets(3);
  CHECK(s.load_jobs(snippets, {"py3"}) == 3);
  CHECK(s.load_jobs(snippets, {"py3"}) == 0);
  CHECK(s.load_jobs({}, {"py3"}) == 0);
  auto p = s.progress();
  CHECK(p.pending == 3);
  CHECK(p.done == 0);
}

TEST_CASE("store: lease atomicity under concurrency") {
  store::MemoryStore s;
  s.load_jobs(make_snippets(1), {"py3"});
  std::atomic<int> got{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&s, &got, i] {
      if (s.lease_next("w" + std::to_string(i), 60)) got.fetch_add(1);
    });
  for (auto& t : threads) t.join();
  CHECK(got.load() == 1);
}

TEST_CASE("store: expiry, re-lease and dead state") {
  store::MemoryStore s(/*max_job_attempts=*/2);
  auto base = *parse_iso8601("2020-01-01T00:00:00Z");
  TimePoint now = base;
  s.set_clock([&now] { return now; });
  s.load_jobs(make_snippets(1), {"py3"});

  auto j1 = s.lease_next("w1", 10);
  REQUIRE(j1);
  CHECK(j1->attempt_count == 1);
  CHECK(!s.lease_next("w2", 10));  // still held

  now = base + std::chrono::seconds(11);  // lease expired
  auto j2 = s.lease_next("w2", 10);
  REQUIRE(j2);
  CHECK(j2->attempt_count == 2);

  now = base + std::chrono::seconds(30);
  CHECK(!s.lease_next("w3", 10));  // attempts exhausted -> dead
  auto p = s.progress();
  CHECK(p.dead == 1);
  CHECK(p.pending + p.leased + p.done + p.dead == 1);  // conservation
}

TEST_CASE("store: renew extends only the holder's live lease") {
  store::MemoryStore s;
  auto base = *parse_iso8601("2020-01-01T00:00:00Z");
  TimePoint now = base;
  s.set_clock([&now] { return now; });
  s.load_jobs(make_snippets(1), {"py3"});
  auto job = s.lease_next("w1", 10);
  REQUIRE(job);
  CHECK(s.renew(job->job_id, "w1", 10));
  CHECK(!s.renew(job->job_id, "w2", 10));
  CHECK(!s.renew("job-nope", "w1", 10));
  now = base + std::chrono::seconds(60);
  CHECK(!s.renew(job->job_id, "w1", 10));  // expired, lost
}

TEST_CASE("store: submit exactly-once") {
  store::MemoryStore s;
  s.load_jobs(make_snippets(2), {"py3"});
  auto job = s.lease_next("w1", 60);
  REQUIRE(job);
  auto result = result_for(*job, "w1");
  CHECK(s.submit_result(result) == store::Ack::accepted);
  CHECK(s.submit_result(result) == store::Ack::duplicate);
  result.job_id = "job-nope";
  CHECK(s.submit_result(result) == store::Ack::unknown_job);
  CHECK(s.all_outcomes().size() == 1);
  auto p = s.progress();
  CHECK(p.done == 1);
  CHECK(p.pending + p.leased + p.done + p.dead == 2);
}

TEST_CASE("file store: journal replay restores jobs and results") {
  TempPath journal("journal");
  {
    store::FileStore s(journal.path);
    s.load_jobs(make_snippets(3), {"py3"});
    auto job = s.lease_next("w1", 60);
    REQUIRE(job);
    s.submit_result(result_for(*job, "w1"));
  }
  {
    store::FileStore s(journal.path);
    auto p = s.progress();
    CHECK(p.done == 1);
    CHECK(p.pending == 2);  // leases do not survive a restart
    CHECK(s.all_outcomes().size() == 1);
    // idempotent reload
    CHECK(s.load_jobs(make_snippets(3), {"py3"}) == 0);
  }
}

TEST_CASE("sqlite store: persistence via connection URL") {
  TempPath db("store.sqlite");
  {
    auto s = store::open_store("sqlite://" + db.path);
    s->load_jobs(make_snippets(2), {"py3"});
    auto job = s->lease_next("w1", 60);
    REQUIRE(job);
    s->submit_result(result_for(*job, "w1"));
  }
  {
    auto s = store::open_store("sqlite://" + db.path);
    auto p = s->progress();
    CHECK(p.done == 1);
    CHECK(p.pending == 1);
    CHECK(s->all_outcomes().size() == 1);
  }
}

TEST_CASE("coordinator HTTP API") {
  auto shared = std::make_shared<store::MemoryStore>();
  shared->load_jobs(make_snippets(2), {"py3"});
  coordinator::Coordinator coord(shared);
  int port = coord.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);

  SUBCASE("taxonomy endpoint") {
    auto res = client.Get("/api/v1/taxonomy");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto j = json::parse(res->body);
    CHECK(j.at("codes").size() == 58);
  }

  SUBCASE("lease, submit, duplicate, progress") {
    auto res = client.Post("/api/v1/jobs/lease",
                           json{{"worker_id", "w1"}, {"lease_seconds", 60}}
                               .dump(),
                           "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    auto job = wire::job_from_json(json::parse(res->body));
    CHECK(job.snippet.content == "x=1");

    auto body = wire::to_json(result_for(job, "w1")).dump();
    auto submit = client.Post("/api/v1/results", body, "application/json");
    REQUIRE(submit);
    CHECK(submit->status == 200);
    CHECK(json::parse(submit->body).at("status") == "accepted");

    auto again = client.Post("/api/v1/results", body, "application/json");
    REQUIRE(again);
    CHECK(json::parse(again->body).at("status") == "duplicate");

    auto progress = client.Get("/api/v1/progress");
    REQUIRE(progress);
    auto p = json::parse(progress->body);
    CHECK(p.at("done") == 1);

    // unknown job
    auto bogus = result_for(job, "w1");
    bogus.job_id = "job-nope";
    auto unknown = client.Post("/api/v1/results",
                               wire::to_json(bogus).dump(),
                               "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
  }

  SUBCASE("lease drains to 204") {
    for (int i = 0; i < 2; ++i) {
      auto res = client.Post("/api/v1/jobs/lease",
                             json{{"worker_id", "w"}, {"lease_seconds", 600}}
                                 .dump(),
                             "application/json");
      REQUIRE(res);
      CHECK(res->status == 200);
    }
    auto res = client.Post("/api/v1/jobs/lease",
                           json{{"worker_id", "w"}, {"lease_seconds", 600}}
                               .dump(),
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 204);
  }

  SUBCASE("renew endpoint") {
    auto res = client.Post("/api/v1/jobs/lease",
                           json{{"worker_id", "w1"}, {"lease_seconds", 60}}
                               .dump(),
                           "application/json");
    auto job = wire::job_from_json(json::parse(res->body));
    auto renew = client.Post(
        "/api/v1/jobs/renew",
        json{{"job_id", job.job_id}, {"worker_id", "w1"},
             {"lease_seconds", 60}}
            .dump(),
        "application/json");
    REQUIRE(renew);
    CHECK(renew->status == 200);
    auto stolen = client.Post(
        "/api/v1/jobs/renew",
        json{{"job_id", job.job_id}, {"worker_id", "w2"},
             {"lease_seconds", 60}}
            .dump(),
        "application/json");
    REQUIRE(stolen);
    CHECK(stolen->status == 409);
  }

  coord.stop();
}

TEST_CASE("worker loop drains a coordinator") {
  auto shared = std::make_shared<store::MemoryStore>();
  shared->load_jobs(make_snippets(6), {"py3"});
  coordinator::Coordinator coord(shared);
  int port = coord.start("127.0.0.1", 0);

  worker::WorkerOptions options;
  options.api_base = "http://127.0.0.1:" + std::to_string(port);
  options.worker_id = "test-worker";
  options.parallelism = 3;
  options.idle_shutdown_after_seconds = 2;
  sandbox::InterpreterConfig py3;
  py3.id = "py3";
  py3.command = {"python3", "{file}"};
  options.configs = {py3};

  size_t submitted = worker::run_loop(options);
  CHECK(submitted == 6);
  auto p = shared->progress();
  CHECK(p.done == 6);
  CHECK(p.pending == 0);
  CHECK(shared->all_outcomes().size() == 6);
  coord.stop();
}

TEST_CASE("worker refuses to start on a failing self-test") {
  worker::WorkerOptions options;
  options.api_base = "http://127.0.0.1:1";
  options.worker_id = "w";
  sandbox::InterpreterConfig bad;
  bad.id = "bad";
  bad.command = {"/no/such/interpreter", "{file}"};
  options.configs = {bad};
  CHECK_THROWS(worker::run_loop(options));
}
