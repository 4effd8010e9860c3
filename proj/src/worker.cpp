#include "snipex/worker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "snipex/resolver.hpp"
#include "snipex/wire.hpp"

namespace snipex::worker {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Shared {
  WorkerOptions options;
  std::atomic<size_t> submitted{0};
  std::atomic<int> active{0};
  std::atomic<Clock::rep> last_activity{Clock::now().time_since_epoch().count()};

  void touch() {
    last_activity.store(Clock::now().time_since_epoch().count());
  }
  double idle_seconds() const {
    auto last = Clock::time_point(Clock::duration(last_activity.load()));
    return std::chrono::duration<double>(Clock::now() - last).count();
  }
};

std::optional<wire::EvaluationJob> lease_job(httplib::Client& client,
                                             const WorkerOptions& options) {
  json body{{"worker_id", options.worker_id},
            {"lease_seconds", options.lease_seconds}};
  auto res = client.Post("/api/v1/jobs/lease", body.dump(), "application/json");
  if (!res || res->status != 200) return std::nullopt;
  return wire::job_from_json(json::parse(res->body));
}

bool submit_with_retry(httplib::Client& client,
                       const wire::EvaluationResult& result) {
  std::string body = wire::to_json(result).dump();
  int backoff_ms = 250;
  for (int attempt = 0; attempt < 5; ++attempt) {
    auto res = client.Post("/api/v1/results", body, "application/json");
    // 404 means the job is gone for good; retrying cannot help
    if (res && (res->status == 200 || res->status == 404))
      return res->status == 200;
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
    backoff_ms *= 2;
  }
  return false;
}

// keeps the lease alive while a slow evaluation runs
class LeaseKeeper {
 public:
  LeaseKeeper(httplib::Client& client, const WorkerOptions& options,
              std::string job_id)
      : client_(client), options_(options), job_id_(std::move(job_id)) {
    thread_ = std::thread([this] { run(); });
  }
  ~LeaseKeeper() {
    {
      std::lock_guard<std::mutex> guard(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

 private:
  void run() {
    auto interval = std::chrono::seconds(
        std::max(1, options_.lease_seconds / 2));
    std::unique_lock<std::mutex> lock(mutex_);
    while (!cv_.wait_for(lock, interval, [this] { return stop_; })) {
      lock.unlock();
      json body{{"job_id", job_id_},
                {"worker_id", options_.worker_id},
                {"lease_seconds", options_.lease_seconds}};
      client_.Post("/api/v1/jobs/renew", body.dump(), "application/json");
      lock.lock();
    }
  }

  httplib::Client& client_;
  const WorkerOptions& options_;
  std::string job_id_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
};

void worker_thread(Shared& shared) {
  const auto& options = shared.options;
  httplib::Client client(options.api_base);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);

  for (;;) {
    auto job = lease_job(client, options);
    if (!job) {
      if (shared.idle_seconds() > options.idle_shutdown_after_seconds &&
          shared.active.load() == 0)
        return;
      std::this_thread::sleep_for(std::chrono::milliseconds(500));
      continue;
    }
    shared.touch();
    shared.active.fetch_add(1);
    {
      LeaseKeeper keeper(client, options, job->job_id);
      // outcomes must cover exactly the job's interpreter ids; an id this
      // worker has no config for yields a SpawnError outcome
      std::vector<sandbox::InterpreterConfig> configs;
      for (const auto& id : job->interpreter_ids) {
        auto it = std::find_if(options.configs.begin(), options.configs.end(),
                               [&](const auto& c) { return c.id == id; });
        if (it != options.configs.end()) {
          configs.push_back(*it);
        } else {
          sandbox::InterpreterConfig missing;
          missing.id = id;
          configs.push_back(std::move(missing));
        }
      }

      wire::EvaluationResult result;
      result.job_id = job->job_id;
      result.worker_id = options.worker_id;
      result.outcomes =
          resolver::evaluate_all(job->snippet, configs, options.max_installs);
      result.submitted_at = std::chrono::time_point_cast<std::chrono::seconds>(
          std::chrono::system_clock::now());
      if (submit_with_retry(client, result)) shared.submitted.fetch_add(1);
    }
    shared.active.fetch_sub(1);
    shared.touch();
  }
}

}  // namespace

size_t run_loop(const WorkerOptions& opts) {
  WorkerOptions options = opts;
  if (options.parallelism <= 0) {
    options.parallelism =
        std::max(1u, std::thread::hardware_concurrency() / 2);
  }
  if (options.configs.empty())
    throw std::invalid_argument("no interpreter configs");

  // startup self-test: every configured interpreter must run "x=1"
  for (const auto& config : options.configs) {
    auto status = classifier::classify_pair("x=1", config);
    if (status.numeric_id != 0)
      throw std::runtime_error("self-test failed for interpreter '" +
                               config.id + "': " + status.name);
  }

  Shared shared;
  shared.options = options;
  std::vector<std::thread> threads;
  for (int i = 0; i < options.parallelism; ++i)
    threads.emplace_back([&shared] { worker_thread(shared); });
  for (auto& t : threads) t.join();
  return shared.submitted.load();
}

}  // namespace snipex::worker
