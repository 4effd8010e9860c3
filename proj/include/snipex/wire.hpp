#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "snipex/corpus.hpp"
#include "snipex/resolver.hpp"

namespace snipex::wire {

struct EvaluationJob {
  std::string job_id;
  corpus::Snippet snippet;
  std::vector<std::string> interpreter_ids;
  TimePoint lease_expiry{};
  int attempt_count = 0;
};

struct EvaluationResult {
  std::string job_id;
  std::string worker_id;
  std::vector<resolver::ExecutionOutcome> outcomes;
  TimePoint submitted_at{};
};

nlohmann::json to_json(const corpus::Snippet& s);
corpus::Snippet snippet_from_json(const nlohmann::json& j);

nlohmann::json to_json(const resolver::ExecutionOutcome& o);
resolver::ExecutionOutcome outcome_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvaluationJob& job);
EvaluationJob job_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvaluationResult& r);
EvaluationResult result_from_json(const nlohmann::json& j);

// Results export: one ExecutionOutcome JSON object per line.
void write_outcomes(std::ostream& out,
                    const std::vector<resolver::ExecutionOutcome>& outcomes);
std::vector<resolver::ExecutionOutcome> read_outcomes(std::istream& in);
std::vector<resolver::ExecutionOutcome> read_outcomes_file(
    const std::string& path);

}  // namespace snipex::wire
