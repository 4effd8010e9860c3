#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "snipex/wire.hpp"

struct sqlite3;

namespace snipex::store {

enum class JobState { pending, leased, done, dead };
enum class Ack { accepted, duplicate, unknown_job };

struct Progress {
  int64_t pending = 0;
  int64_t leased = 0;
  int64_t done = 0;
  int64_t dead = 0;
  double results_per_second = 0.0;  // sliding 30 s window
};

class StoreError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Job + result persistence. Lease and submit are linearizable per job.
class JobStore {
 public:
  virtual ~JobStore() = default;

  virtual size_t load_jobs(const std::vector<corpus::Snippet>& snippets,
                           const std::vector<std::string>& interpreter_ids) = 0;
  virtual std::optional<wire::EvaluationJob> lease_next(
      const std::string& worker_id, int lease_seconds) = 0;
  // re-lease by the current holder; false if the job is not leased to them
  virtual bool renew(const std::string& job_id, const std::string& worker_id,
                     int lease_seconds) = 0;
  virtual Ack submit_result(const wire::EvaluationResult& result) = 0;
  virtual Progress progress() = 0;
  virtual std::vector<resolver::ExecutionOutcome> all_outcomes() = 0;
};

// In-memory store; base for the durable backends.
class MemoryStore : public JobStore {
 public:
  explicit MemoryStore(int max_job_attempts = 3);

  size_t load_jobs(const std::vector<corpus::Snippet>& snippets,
                   const std::vector<std::string>& interpreter_ids) override;
  std::optional<wire::EvaluationJob> lease_next(const std::string& worker_id,
                                                int lease_seconds) override;
  bool renew(const std::string& job_id, const std::string& worker_id,
             int lease_seconds) override;
  Ack submit_result(const wire::EvaluationResult& result) override;
  Progress progress() override;
  std::vector<resolver::ExecutionOutcome> all_outcomes() override;

  // test hook: virtual clock
  void set_clock(std::function<TimePoint()> clock);

 protected:
  struct JobRow {
    wire::EvaluationJob job;
    JobState state = JobState::pending;
    std::string worker_id;
  };

  virtual void persist_job(const JobRow&) {}
  virtual void persist_job_state(const JobRow&) {}
  virtual void persist_result(const wire::EvaluationResult&) {}

  TimePoint now() const;

  mutable std::mutex mutex_;
  std::map<std::string, JobRow> jobs_;  // ordered for deterministic leasing
  std::map<std::string, wire::EvaluationResult> results_;
  int max_job_attempts_;

 private:
  std::function<TimePoint()> clock_;
  std::deque<std::chrono::steady_clock::time_point> recent_submits_;
};

// Append-only JSONL journal; replayed on open. Leases are soft state and
// reset to pending on restart.
class FileStore : public MemoryStore {
 public:
  explicit FileStore(const std::string& path, int max_job_attempts = 3);
  ~FileStore() override;

 protected:
  void persist_job(const JobRow&) override;
  void persist_result(const wire::EvaluationResult&) override;

 private:
  void replay();
  std::string path_;
  std::unique_ptr<std::ofstream> journal_;
};

class SqliteStore : public MemoryStore {
 public:
  explicit SqliteStore(const std::string& path, int max_job_attempts = 3);
  ~SqliteStore() override;

 protected:
  void persist_job(const JobRow&) override;
  void persist_job_state(const JobRow&) override;
  void persist_result(const wire::EvaluationResult&) override;

 private:
  void replay();
  void exec(const std::string& sql);
  sqlite3* db_ = nullptr;
};

// "sqlite:PATH" or "sqlite://PATH" -> SqliteStore; otherwise FileStore.
std::unique_ptr<JobStore> open_store(const std::string& url,
                                     int max_job_attempts = 3);

}  // namespace snipex::store
