#include "snipex/store.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <fstream>

namespace snipex::store {

using nlohmann::json;

MemoryStore::MemoryStore(int max_job_attempts)
    : max_job_attempts_(max_job_attempts) {}

TimePoint MemoryStore::now() const {
  if (clock_) return clock_();
  return std::chrono::time_point_cast<std::chrono::seconds>(
      std::chrono::system_clock::now());
}

void MemoryStore::set_clock(std::function<TimePoint()> clock) {
  clock_ = std::move(clock);
}

size_t MemoryStore::load_jobs(const std::vector<corpus::Snippet>& snippets,
                              const std::vector<std::string>& interpreter_ids) {
  std::lock_guard<std::mutex> guard(mutex_);
  size_t loaded = 0;
  for (const auto& s : snippets) {
    std::string job_id = "job-" + s.snippet_id;
    if (jobs_.count(job_id)) continue;  // idempotent on re-run
    JobRow row;
    row.job.job_id = job_id;
    row.job.snippet = s;
    row.job.interpreter_ids = interpreter_ids;
    row.state = JobState::pending;
    persist_job(row);
    jobs_.emplace(std::move(job_id), std::move(row));
    ++loaded;
  }
  return loaded;
}

std::optional<wire::EvaluationJob> MemoryStore::lease_next(
    const std::string& worker_id, int lease_seconds) {
  if (worker_id.empty()) throw StoreError("empty worker_id");
  std::lock_guard<std::mutex> guard(mutex_);
  auto t = now();
  for (auto& [id, row] : jobs_) {
    bool expired = row.state == JobState::leased && row.job.lease_expiry <= t;
    if (row.state != JobState::pending && !expired) continue;
    if (row.job.attempt_count >= max_job_attempts_) {
      row.state = JobState::dead;
      persist_job_state(row);
      continue;
    }
    row.state = JobState::leased;
    row.worker_id = worker_id;
    row.job.attempt_count += 1;
    row.job.lease_expiry = t + std::chrono::seconds(lease_seconds);
    persist_job_state(row);
    return row.job;
  }
  return std::nullopt;
}

bool MemoryStore::renew(const std::string& job_id, const std::string& worker_id,
                        int lease_seconds) {
  std::lock_guard<std::mutex> guard(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return false;
  auto& row = it->second;
  if (row.state != JobState::leased || row.worker_id != worker_id)
    return false;
  if (row.job.lease_expiry <= now()) return false;  // already lost it
  row.job.lease_expiry = now() + std::chrono::seconds(lease_seconds);
  persist_job_state(row);
  return true;
}

Ack MemoryStore::submit_result(const wire::EvaluationResult& result) {
  std::lock_guard<std::mutex> guard(mutex_);
  auto it = jobs_.find(result.job_id);
  if (it == jobs_.end()) return Ack::unknown_job;
  if (results_.count(result.job_id)) return Ack::duplicate;
  results_.emplace(result.job_id, result);
  it->second.state = JobState::done;
  persist_result(result);
  persist_job_state(it->second);
  recent_submits_.push_back(std::chrono::steady_clock::now());
  return Ack::accepted;
}

Progress MemoryStore::progress() {
  std::lock_guard<std::mutex> guard(mutex_);
  Progress p;
  auto t = now();
  for (const auto& [id, row] : jobs_) {
    switch (row.state) {
      case JobState::pending:
        ++p.pending;
        break;
      case JobState::leased:
        // an expired lease is back in the pool from the observer's view
        if (row.job.lease_expiry <= t)
          ++p.pending;
        else
          ++p.leased;
        break;
      case JobState::done:
        ++p.done;
        break;
      case JobState::dead:
        ++p.dead;
        break;
    }
  }
  auto cutoff = std::chrono::steady_clock::now() - std::chrono::seconds(30);
  while (!recent_submits_.empty() && recent_submits_.front() < cutoff)
    recent_submits_.pop_front();
  p.results_per_second = recent_submits_.size() / 30.0;
  return p;
}

std::vector<resolver::ExecutionOutcome> MemoryStore::all_outcomes() {
  std::lock_guard<std::mutex> guard(mutex_);
  std::vector<resolver::ExecutionOutcome> out;
  for (const auto& [id, r] : results_)
    for (const auto& o : r.outcomes) out.push_back(o);
  return out;
}

// ---------------------------------------------------------------------------

FileStore::FileStore(const std::string& path, int max_job_attempts)
    : MemoryStore(max_job_attempts), path_(path) {
  replay();
  journal_ = std::make_unique<std::ofstream>(path_, std::ios::app);
  if (!*journal_) throw StoreError("cannot open journal: " + path_);
}

FileStore::~FileStore() = default;

void FileStore::replay() {
  std::ifstream in(path_);
  if (!in) return;  // fresh store
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // torn tail write after a crash
    std::string type = j.value("type", "");
    if (type == "job") {
      JobRow row;
      row.job = wire::job_from_json(j.at("job"));
      row.job.attempt_count = 0;
      row.state = JobState::pending;
      jobs_[row.job.job_id] = std::move(row);
    } else if (type == "result") {
      auto result = wire::result_from_json(j.at("result"));
      auto it = jobs_.find(result.job_id);
      if (it != jobs_.end() && !results_.count(result.job_id)) {
        it->second.state = JobState::done;
        results_.emplace(result.job_id, std::move(result));
      }
    }
  }
}

void FileStore::persist_job(const JobRow& row) {
  *journal_ << json{{"type", "job"}, {"job", wire::to_json(row.job)}}.dump()
            << '\n';
  journal_->flush();
}

void FileStore::persist_result(const wire::EvaluationResult& result) {
  *journal_ << json{{"type", "result"}, {"result", wire::to_json(result)}}
                   .dump()
            << '\n';
  journal_->flush();
}

// ---------------------------------------------------------------------------

SqliteStore::SqliteStore(const std::string& path, int max_job_attempts)
    : MemoryStore(max_job_attempts) {
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK)
    throw StoreError("cannot open sqlite store: " + path);
  exec("PRAGMA journal_mode=WAL");
  exec(
      "CREATE TABLE IF NOT EXISTS jobs ("
      " job_id TEXT PRIMARY KEY, job_json TEXT NOT NULL,"
      " state TEXT NOT NULL, worker_id TEXT)");
  exec(
      "CREATE TABLE IF NOT EXISTS results ("
      " job_id TEXT PRIMARY KEY, result_json TEXT NOT NULL)");
  replay();
}

SqliteStore::~SqliteStore() {
  if (db_) sqlite3_close(db_);
}

void SqliteStore::exec(const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "sqlite error";
    sqlite3_free(err);
    throw StoreError(msg + " [" + sql + "]");
  }
}

void SqliteStore::replay() {
  sqlite3_stmt* stmt = nullptr;
  sqlite3_prepare_v2(db_, "SELECT job_json, state FROM jobs", -1, &stmt,
                     nullptr);
  while (sqlite3_step(stmt) == SQLITE_ROW) {
    JobRow row;
    row.job = wire::job_from_json(json::parse(
        reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0))));
    std::string state =
        reinterpret_cast<const char*>(sqlite3_column_text(stmt, 1));
    row.state = state == "done"   ? JobState::done
                : state == "dead" ? JobState::dead
                                  : JobState::pending;
    jobs_[row.job.job_id] = std::move(row);
  }
  sqlite3_finalize(stmt);

  sqlite3_prepare_v2(db_, "SELECT result_json FROM results", -1, &stmt,
                     nullptr);
  while (sqlite3_step(stmt) == SQLITE_ROW) {
    auto result = wire::result_from_json(json::parse(
        reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0))));
    auto it = jobs_.find(result.job_id);
    if (it != jobs_.end()) it->second.state = JobState::done;
    results_.emplace(result.job_id, std::move(result));
  }
  sqlite3_finalize(stmt);
}

namespace {
const char* state_name(JobState s) {
  switch (s) {
    case JobState::pending:
      return "pending";
    case JobState::leased:
      return "leased";
    case JobState::done:
      return "done";
    case JobState::dead:
      return "dead";
  }
  return "pending";
}
}  // namespace

void SqliteStore::persist_job(const JobRow& row) {
  sqlite3_stmt* stmt = nullptr;
  sqlite3_prepare_v2(db_,
                     "INSERT OR REPLACE INTO jobs (job_id, job_json, state, "
                     "worker_id) VALUES (?,?,?,?)",
                     -1, &stmt, nullptr);
  std::string job_json = wire::to_json(row.job).dump();
  sqlite3_bind_text(stmt, 1, row.job.job_id.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_text(stmt, 2, job_json.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_text(stmt, 3, state_name(row.state), -1, SQLITE_STATIC);
  sqlite3_bind_text(stmt, 4, row.worker_id.c_str(), -1, SQLITE_TRANSIENT);
  if (sqlite3_step(stmt) != SQLITE_DONE) {
    sqlite3_finalize(stmt);
    throw StoreError("sqlite insert failed");
  }
  sqlite3_finalize(stmt);
}

void SqliteStore::persist_job_state(const JobRow& row) { persist_job(row); }

void SqliteStore::persist_result(const wire::EvaluationResult& result) {
  sqlite3_stmt* stmt = nullptr;
  sqlite3_prepare_v2(
      db_, "INSERT OR IGNORE INTO results (job_id, result_json) VALUES (?,?)",
      -1, &stmt, nullptr);
  std::string result_json = wire::to_json(result).dump();
  sqlite3_bind_text(stmt, 1, result.job_id.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_text(stmt, 2, result_json.c_str(), -1, SQLITE_TRANSIENT);
  if (sqlite3_step(stmt) != SQLITE_DONE) {
    sqlite3_finalize(stmt);
    throw StoreError("sqlite insert failed");
  }
  sqlite3_finalize(stmt);
}

std::unique_ptr<JobStore> open_store(const std::string& url,
                                     int max_job_attempts) {
  if (url.rfind("sqlite://", 0) == 0)
    return std::make_unique<SqliteStore>(url.substr(9), max_job_attempts);
  if (url.rfind("sqlite:", 0) == 0)
    return std::make_unique<SqliteStore>(url.substr(7), max_job_attempts);
  return std::make_unique<FileStore>(url, max_job_attempts);
}

}  // namespace snipex::store
