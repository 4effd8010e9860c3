#include "snipex/resolver.hpp"

#include <chrono>
#include <mutex>
#include <set>
#include <unordered_map>

namespace snipex::resolver {

namespace {

// concurrent installer invocations within one environment are serialized
std::mutex& install_lock(const std::string& interpreter_id) {
  static std::mutex registry_mutex;
  static std::unordered_map<std::string, std::mutex> locks;
  std::lock_guard<std::mutex> guard(registry_mutex);
  return locks[interpreter_id];
}

bool is_import_failure(const classifier::StatusCode& status) {
  return status.name == "ImportError" || status.name == "ModuleNotFoundError";
}

std::vector<std::string> installer_argv(
    const sandbox::InterpreterConfig& config, const std::string& module) {
  std::vector<std::string> argv;
  for (std::string arg : config.installer_command) {
    size_t pos;
    while ((pos = arg.find("{module}")) != std::string::npos)
      arg.replace(pos, 8, module);
    argv.push_back(std::move(arg));
  }
  return argv;
}

}  // namespace

ExecutionOutcome evaluate(const corpus::Snippet& snippet,
                          const sandbox::InterpreterConfig& config,
                          int max_installs) {
  if (max_installs < 1) throw std::invalid_argument("max_installs must be >= 1");

  auto start = std::chrono::steady_clock::now();
  ExecutionOutcome outcome;
  outcome.snippet_id = snippet.snippet_id;
  outcome.interpreter_id = config.id;
  outcome.taxonomy_version = classifier::Taxonomy::instance().version();

  std::string prepared = sandbox::prepare_source(snippet.content);
  std::set<std::string> tried_modules;

  for (;;) {
    auto raw = sandbox::run_snippet(prepared, config,
                                    sandbox::make_temp_workdir());
    auto status = classifier::classify(raw);
    outcome.attempts.push_back({std::move(raw), status});
    outcome.final_status = status;

    if (!is_import_failure(status)) break;
    if (static_cast<int>(tried_modules.size()) >= max_installs) break;
    auto module =
        classifier::extract_missing_module(outcome.attempts.back().raw.stderr_tail);
    if (!module || tried_modules.count(*module)) break;
    if (config.installer_command.empty()) break;

    tried_modules.insert(*module);
    sandbox::RawExecution install;
    {
      std::lock_guard<std::mutex> guard(install_lock(config.id));
      install = sandbox::run_command(installer_argv(config, *module),
                                     config.env_overrides,
                                     config.installer_timeout,
                                     config.max_output_bytes);
    }
    bool ok = install.exit_status && *install.exit_status == 0;
    outcome.installed_modules.push_back({*module, ok});
    // a failed install still gets one re-run; a hung installer does not
    if (install.timed_out) break;
  }

  outcome.total_duration = std::chrono::duration_cast<Duration>(
      std::chrono::steady_clock::now() - start);
  return outcome;
}

std::vector<ExecutionOutcome> evaluate_all(
    const corpus::Snippet& snippet,
    const std::vector<sandbox::InterpreterConfig>& configs,
    int max_installs) {
  if (configs.empty()) throw std::invalid_argument("configs must be non-empty");
  std::vector<ExecutionOutcome> outcomes;
  outcomes.reserve(configs.size());
  for (const auto& config : configs) {
    try {
      outcomes.push_back(evaluate(snippet, config, max_installs));
    } catch (const sandbox::EnvironmentError& e) {
      // harness failure recorded per entry; other configs continue
      ExecutionOutcome outcome;
      outcome.snippet_id = snippet.snippet_id;
      outcome.interpreter_id = config.id;
      outcome.taxonomy_version = classifier::Taxonomy::instance().version();
      sandbox::RawExecution raw;
      raw.spawn_error = e.what();
      outcome.final_status = classifier::classify(raw);
      outcome.attempts.push_back({std::move(raw), outcome.final_status});
      outcomes.push_back(std::move(outcome));
    }
  }
  return outcomes;
}

}  // namespace snipex::resolver
