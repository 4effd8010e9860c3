#pragma once

#include <memory>
#include <string>
#include <thread>

#include "snipex/store.hpp"

namespace httplib {
class Server;
}

namespace snipex::coordinator {

// JSON-over-HTTP front end for a JobStore.
//
//   POST /api/v1/jobs/lease   {worker_id, lease_seconds} -> 200 job | 204
//   POST /api/v1/jobs/renew   {job_id, worker_id, lease_seconds} -> 200 | 409
//   POST /api/v1/results      EvaluationResult -> 200 {status} | 404
//   GET  /api/v1/progress     -> counts
//   GET  /api/v1/taxonomy     -> taxonomy table
class Coordinator {
 public:
  explicit Coordinator(std::shared_ptr<store::JobStore> store);
  ~Coordinator();

  // Binds and serves on a background thread. port 0 picks a free port.
  int start(const std::string& host, int port);
  void stop();

  store::JobStore& store() { return *store_; }

 private:
  std::shared_ptr<store::JobStore> store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread serve_thread_;
};

}  // namespace snipex::coordinator
