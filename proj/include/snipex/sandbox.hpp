#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snipex/util.hpp"

namespace snipex::sandbox {

struct InterpreterConfig {
  std::string id;                        // e.g. "py2", "py3"
  std::vector<std::string> command;      // argv template, "{file}" placeholder
  std::vector<std::string> installer_command;  // "{module}" placeholder
  std::map<std::string, std::string> env_overrides;
  Duration timeout{10'000};              // per-run wall clock limit
  Duration installer_timeout{120'000};
  int64_t max_output_bytes = 64 * 1024;  // per stream
};

struct RawExecution {
  std::optional<int> exit_status;  // absent iff timed_out or spawn failed;
                                   // signal death maps to 128 + signo
  bool timed_out = false;
  std::string stdout_tail;  // last max_output_bytes of the stream
  std::string stderr_tail;
  Duration duration{0};
  std::optional<std::string> spawn_error;
};

class EnvironmentError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Entity decode, CRLF -> LF, BOM strip, common dedent; lossy UTF-8 repair.
std::string prepare_source(const std::string& raw);

// Writes source into workdir, runs one child in its own process group with
// stdin closed and streams captured, kills the whole group on timeout, and
// removes workdir afterwards.
RawExecution run_snippet(const std::string& source,
                         const InterpreterConfig& config,
                         const std::string& workdir);

// Same machinery for arbitrary commands (installer invocations).
RawExecution run_command(const std::vector<std::string>& argv,
                         const std::map<std::string, std::string>& env,
                         Duration timeout, int64_t max_output_bytes,
                         const std::string& cwd = {});

std::string make_temp_workdir();

std::vector<InterpreterConfig> load_configs(const std::string& path);
std::vector<InterpreterConfig> parse_configs(const std::string& json_text);

}  // namespace snipex::sandbox
