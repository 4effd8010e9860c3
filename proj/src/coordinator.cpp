#include "snipex/coordinator.hpp"

#include "httplib.h"
#include "json.hpp"
#include "snipex/classifier.hpp"

namespace snipex::coordinator {

using nlohmann::json;

Coordinator::Coordinator(std::shared_ptr<store::JobStore> store)
    : store_(std::move(store)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Post("/api/v1/jobs/lease", [this](const httplib::Request& req,
                                        httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      std::string worker_id = body.at("worker_id").get<std::string>();
      int lease_seconds = body.value("lease_seconds", 120);
      if (worker_id.empty() || lease_seconds <= 0) {
        res.status = 400;
        res.set_content(R"({"error":"bad request"})", "application/json");
        return;
      }
      auto job = store_->lease_next(worker_id, lease_seconds);
      if (!job) {
        res.status = 204;
        return;
      }
      res.set_content(wire::to_json(*job).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  srv.Post("/api/v1/jobs/renew", [this](const httplib::Request& req,
                                        httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      bool ok = store_->renew(body.at("job_id").get<std::string>(),
                              body.at("worker_id").get<std::string>(),
                              body.value("lease_seconds", 120));
      if (ok) {
        res.set_content(R"({"status":"renewed"})", "application/json");
      } else {
        res.status = 409;
        res.set_content(R"({"status":"lost"})", "application/json");
      }
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  srv.Post("/api/v1/results", [this](const httplib::Request& req,
                                     httplib::Response& res) {
    try {
      auto result = wire::result_from_json(json::parse(req.body));
      switch (store_->submit_result(result)) {
        case store::Ack::accepted:
          res.set_content(R"({"status":"accepted"})", "application/json");
          break;
        case store::Ack::duplicate:
          res.set_content(R"({"status":"duplicate"})", "application/json");
          break;
        case store::Ack::unknown_job:
          res.status = 404;
          res.set_content(R"({"status":"unknown_job"})", "application/json");
          break;
      }
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  srv.Get("/api/v1/progress",
          [this](const httplib::Request&, httplib::Response& res) {
            auto p = store_->progress();
            res.set_content(json{{"pending", p.pending},
                                 {"leased", p.leased},
                                 {"done", p.done},
                                 {"dead", p.dead},
                                 {"results_per_second", p.results_per_second}}
                                .dump(),
                            "application/json");
          });

  srv.Get("/api/v1/taxonomy",
          [](const httplib::Request&, httplib::Response& res) {
            res.set_content(classifier::Taxonomy::instance().to_json(),
                            "application/json");
          });
}

Coordinator::~Coordinator() { stop(); }

int Coordinator::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else {
    if (!server_->bind_to_port(host, port))
      throw std::runtime_error("cannot bind " + host + ":" +
                               std::to_string(port));
  }
  serve_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Coordinator::stop() {
  if (server_) server_->stop();
  if (serve_thread_.joinable()) serve_thread_.join();
}

}  // namespace snipex::coordinator
