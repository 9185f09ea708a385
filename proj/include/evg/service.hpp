#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "evg/checkpoint.hpp"
#include "evg/session.hpp"

namespace evg {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  double threshold = 0.7;
  double idle_timeout_s = 120.0;  // disconnected sessions are dropped after this
  std::size_t max_sessions = 64;
  std::string static_dir;  // optional UI assets
  std::string model_name = "model";
};

/// HTTP + WebSocket front end over one loaded checkpoint.
///
///   GET    /model                  model summary
///   POST   /sessions               create a trial session (JSON body)
///   GET    /sessions/{id}/report   records and scores so far
///   DELETE /sessions/{id}          end a session, returning its report
///   GET    /sessions/{id}/surface  latest time surface (debug view)
///   POST   /infer                  HEV1 body, returns detections
///   WS     /sessions/{id}/live     pointer_batch / HEV1 frames up;
///                                  prompt, detection, stats, error down
class Server {
 public:
  Server(Checkpoint checkpoint, ServiceConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving on background threads; returns the port.
  unsigned short start();
  void stop();

  std::shared_ptr<Session> find_session(const std::string& id) const;
  std::size_t session_count() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Runs a server in the foreground until SIGINT or SIGTERM.
void run_service(const Checkpoint& checkpoint, const ServiceConfig& config);

}  // namespace evg
