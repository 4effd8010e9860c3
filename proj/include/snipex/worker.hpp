#pragma once

#include <string>
#include <vector>

#include "snipex/sandbox.hpp"

namespace snipex::worker {

struct WorkerOptions {
  std::string api_base;  // e.g. "http://127.0.0.1:8080"
  std::string worker_id;
  int parallelism = 0;  // 0 = cores / 2
  std::vector<sandbox::InterpreterConfig> configs;
  int lease_seconds = 120;
  int max_installs = 5;
  int idle_shutdown_after_seconds = 60;
};

// Returns the number of jobs this worker submitted successfully.
// Throws on startup self-test failure.
size_t run_loop(const WorkerOptions& options);

}  // namespace snipex::worker
