#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "usnav/config.hpp"
#include "usnav/session.hpp"

namespace usnav {

// nav-service transports around a SessionHub:
//   TCP  u32-LE length-prefixed JSON client messages (replies + broadcasts)
//   UDP  one TrackingPacket per datagram, drained by a single ingest worker
//   HTTP GET /health
class NavServer {
 public:
  explicit NavServer(AppConfig config);
  ~NavServer();
  NavServer(const NavServer&) = delete;
  NavServer& operator=(const NavServer&) = delete;

  // Binds all endpoints (port 0 picks an ephemeral port) and starts serving.
  void start();
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  std::uint16_t port() const { return port_; }
  std::uint16_t udp_port() const { return udp_port_; }
  std::uint16_t http_port() const { return http_port_; }
  SessionHub& hub() { return *hub_; }
  Json health() const;

 private:
  struct Connection;
  struct Impl;

  void fan_out(const ServerMessage& msg);
  void serve_connection(Connection& conn);
  void reap_connections();

  AppConfig config_;
  std::unique_ptr<SessionHub> hub_;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
  std::uint16_t udp_port_ = 0;
  std::uint16_t http_port_ = 0;

  std::atomic<bool> running_{false};
  std::mutex state_mu_;
  std::condition_variable state_cv_;

  mutable std::mutex conns_mu_;
  std::list<std::unique_ptr<Connection>> conns_;
  std::vector<std::thread> threads_;
};

}  // namespace usnav
