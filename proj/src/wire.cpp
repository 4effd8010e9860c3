#include "snipex/wire.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace snipex::wire {

using nlohmann::json;

json to_json(const corpus::Snippet& s) {
  return json{{"snippet_id", s.snippet_id},
              {"post_id", s.post_id},
              {"root_block_version_id", s.root_block_version_id},
              {"content", base64_encode(s.content)},
              {"line_count", s.line_count},
              {"answer_score", s.answer_score},
              {"is_accepted", s.is_accepted},
              {"created_at", format_iso8601(s.created_at)},
              {"github_ref_count", s.github_ref_count},
              {"tags", s.tags}};
}

corpus::Snippet snippet_from_json(const json& j) {
  corpus::Snippet s;
  s.snippet_id = j.at("snippet_id").get<std::string>();
  s.post_id = j.at("post_id").get<int64_t>();
  s.root_block_version_id = j.at("root_block_version_id").get<int64_t>();
  auto content = base64_decode(j.at("content").get<std::string>());
  if (!content) throw std::runtime_error("invalid base64 snippet content");
  s.content = *content;
  s.line_count = j.at("line_count").get<int64_t>();
  s.answer_score = j.at("answer_score").get<int64_t>();
  s.is_accepted = j.at("is_accepted").get<bool>();
  auto created = parse_iso8601(j.at("created_at").get<std::string>());
  if (!created) throw std::runtime_error("invalid created_at");
  s.created_at = *created;
  s.github_ref_count = j.at("github_ref_count").get<int64_t>();
  s.tags = j.at("tags").get<std::vector<std::string>>();
  return s;
}

namespace {

json to_json(const sandbox::RawExecution& raw) {
  json j{{"timed_out", raw.timed_out},
         {"stdout_tail", base64_encode(raw.stdout_tail)},
         {"stderr_tail", base64_encode(raw.stderr_tail)},
         {"duration_ms", raw.duration.count()}};
  if (raw.exit_status) j["exit_status"] = *raw.exit_status;
  if (raw.spawn_error) j["spawn_error"] = *raw.spawn_error;
  return j;
}

sandbox::RawExecution raw_from_json(const json& j) {
  sandbox::RawExecution raw;
  raw.timed_out = j.at("timed_out").get<bool>();
  raw.stdout_tail = *base64_decode(j.at("stdout_tail").get<std::string>());
  raw.stderr_tail = *base64_decode(j.at("stderr_tail").get<std::string>());
  raw.duration = Duration{j.at("duration_ms").get<int64_t>()};
  if (j.contains("exit_status")) raw.exit_status = j["exit_status"].get<int>();
  if (j.contains("spawn_error"))
    raw.spawn_error = j["spawn_error"].get<std::string>();
  return raw;
}

classifier::StatusCode status_from_name(const std::string& name) {
  auto code = classifier::Taxonomy::instance().by_name(name);
  if (!code) throw std::runtime_error("unknown status code: " + name);
  return *code;
}

}  // namespace

json to_json(const resolver::ExecutionOutcome& o) {
  json attempts = json::array();
  for (const auto& a : o.attempts)
    attempts.push_back({{"raw", to_json(a.raw)}, {"status", a.status.name}});
  json installs = json::array();
  for (const auto& m : o.installed_modules)
    installs.push_back({{"module", m.module}, {"succeeded", m.succeeded}});
  return json{{"snippet_id", o.snippet_id},
              {"interpreter_id", o.interpreter_id},
              {"final_status", o.final_status.name},
              {"attempts", attempts},
              {"installed_modules", installs},
              {"total_duration_ms", o.total_duration.count()},
              {"taxonomy_version", o.taxonomy_version}};
}

resolver::ExecutionOutcome outcome_from_json(const json& j) {
  resolver::ExecutionOutcome o;
  o.snippet_id = j.at("snippet_id").get<std::string>();
  o.interpreter_id = j.at("interpreter_id").get<std::string>();
  o.final_status = status_from_name(j.at("final_status").get<std::string>());
  for (const auto& a : j.at("attempts"))
    o.attempts.push_back({raw_from_json(a.at("raw")),
                          status_from_name(a.at("status").get<std::string>())});
  for (const auto& m : j.at("installed_modules"))
    o.installed_modules.push_back({m.at("module").get<std::string>(),
                                   m.at("succeeded").get<bool>()});
  o.total_duration = Duration{j.at("total_duration_ms").get<int64_t>()};
  o.taxonomy_version = j.at("taxonomy_version").get<std::string>();
  return o;
}

json to_json(const EvaluationJob& job) {
  return json{{"job_id", job.job_id},
              {"snippet", to_json(job.snippet)},
              {"interpreter_ids", job.interpreter_ids},
              {"lease_expiry", format_iso8601(job.lease_expiry)},
              {"attempt_count", job.attempt_count}};
}

EvaluationJob job_from_json(const json& j) {
  EvaluationJob job;
  job.job_id = j.at("job_id").get<std::string>();
  job.snippet = snippet_from_json(j.at("snippet"));
  job.interpreter_ids =
      j.at("interpreter_ids").get<std::vector<std::string>>();
  auto expiry = parse_iso8601(j.at("lease_expiry").get<std::string>());
  if (!expiry) throw std::runtime_error("invalid lease_expiry");
  job.lease_expiry = *expiry;
  job.attempt_count = j.at("attempt_count").get<int>();
  return job;
}

json to_json(const EvaluationResult& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes) outcomes.push_back(to_json(o));
  return json{{"job_id", r.job_id},
              {"worker_id", r.worker_id},
              {"outcomes", outcomes},
              {"submitted_at", format_iso8601(r.submitted_at)}};
}

EvaluationResult result_from_json(const json& j) {
  EvaluationResult r;
  r.job_id = j.at("job_id").get<std::string>();
  r.worker_id = j.at("worker_id").get<std::string>();
  for (const auto& o : j.at("outcomes"))
    r.outcomes.push_back(outcome_from_json(o));
  auto at = parse_iso8601(j.at("submitted_at").get<std::string>());
  if (!at) throw std::runtime_error("invalid submitted_at");
  r.submitted_at = *at;
  return r;
}

void write_outcomes(std::ostream& out,
                    const std::vector<resolver::ExecutionOutcome>& outcomes) {
  for (const auto& o : outcomes) out << to_json(o).dump() << '\n';
}

std::vector<resolver::ExecutionOutcome> read_outcomes(std::istream& in) {
  std::vector<resolver::ExecutionOutcome> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(outcome_from_json(json::parse(line)));
  }
  return out;
}

std::vector<resolver::ExecutionOutcome> read_outcomes_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  return read_outcomes(in);
}

}  // namespace snipex::wire
