#pragma once

#include <string>
#include <vector>

#include "snipex/classifier.hpp"
#include "snipex/corpus.hpp"
#include "snipex/sandbox.hpp"

namespace snipex::resolver {

struct Attempt {
  sandbox::RawExecution raw;
  classifier::StatusCode status;
};

struct InstallRecord {
  std::string module;
  bool succeeded = false;
};

struct ExecutionOutcome {
  std::string snippet_id;
  std::string interpreter_id;
  classifier::StatusCode final_status;
  std::vector<Attempt> attempts;
  std::vector<InstallRecord> installed_modules;
  Duration total_duration{0};
  std::string taxonomy_version;
};

// Run-classify loop with pip-style resolution of missing imports: a failed
// import triggers one install attempt per distinct module, up to
// max_installs, then the snippet is re-run.
ExecutionOutcome evaluate(const corpus::Snippet& snippet,
                          const sandbox::InterpreterConfig& config,
                          int max_installs = 5);

std::vector<ExecutionOutcome> evaluate_all(
    const corpus::Snippet& snippet,
    const std::vector<sandbox::InterpreterConfig>& configs,
    int max_installs = 5);

}  // namespace snipex::resolver
