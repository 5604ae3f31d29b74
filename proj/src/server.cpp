#include "usnav/server.hpp"

#include <set>

#include "httplib.h"
#include "usnav/bounded_queue.hpp"
#include "usnav/net.hpp"

namespace usnav {

namespace {
constexpr std::size_t kOutboxCapacity = 1024;
constexpr std::size_t kIngestCapacity = 4096;
constexpr auto kTickPeriod = std::chrono::milliseconds(10);
}  // namespace

struct NavServer::Connection {
  explicit Connection(net::TcpStream s) : stream(std::move(s)), outbox(kOutboxCapacity) {}

  net::TcpStream stream;
  BoundedQueue<std::string> outbox;
  std::mutex subs_mu;
  std::set<std::string> subscriptions;
  std::atomic<int> live_threads{2};
  std::thread reader;
  std::thread writer;

  bool subscribed(const std::string& id) {
    std::lock_guard lock(subs_mu);
    return subscriptions.count(id) != 0;
  }
};

struct NavServer::Impl {
  std::unique_ptr<net::TcpListener> listener;
  std::unique_ptr<net::UdpSocket> udp;
  httplib::Server http;
  BoundedQueue<std::vector<std::uint8_t>> ingest{kIngestCapacity};
  std::atomic<std::uint64_t> connections_accepted{0};
};

NavServer::NavServer(AppConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  hub_ = std::make_unique<SessionHub>(config_, [this](const ServerMessage& m) { fan_out(m); });
}

NavServer::~NavServer() { stop(); }

void NavServer::fan_out(const ServerMessage& msg) {
  const std::string body = msg.dump();
  std::lock_guard lock(conns_mu_);
  for (const auto& conn : conns_) {
    if (conn->subscribed(msg.session_id)) conn->outbox.push(body);
  }
}

void NavServer::serve_connection(Connection& conn) {
  try {
    while (auto raw = conn.stream.read_message()) {
      // Register before the hub runs so the subscriber sees every broadcast
      // that follows its acknowledgement.
      try {
        const Json j = Json::parse(*raw);
        if (j.is_object() && j.value("type", "") == "subscribe" && j.contains("session_id") &&
            j["session_id"].is_string() && hub_->has_session(j["session_id"])) {
          std::lock_guard lock(conn.subs_mu);
          conn.subscriptions.insert(j["session_id"].get<std::string>());
        }
      } catch (const Json::exception&) {
        // The hub reports malformed input to the sender.
      }
      for (const ServerMessage& reply : hub_->handle(*raw)) conn.outbox.push(reply.dump());
    }
  } catch (const Error&) {
    // Transport failure ends this connection only.
  }
  conn.outbox.close();
}

void NavServer::reap_connections() {
  std::list<std::unique_ptr<Connection>> dead;
  {
    std::lock_guard lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->live_threads.load() == 0) {
        dead.push_back(std::move(*it));
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : dead) {
    c->reader.join();
    c->writer.join();
  }
}

void NavServer::start() {
  if (running_.exchange(true)) return;
  Impl& im = *impl_;
  const ServiceConfig& sc = config_.service;

  im.listener = std::make_unique<net::TcpListener>(sc.host, sc.port);
  port_ = im.listener->port();
  im.udp = std::make_unique<net::UdpSocket>(sc.host, sc.udp_port);
  udp_port_ = im.udp->port();

  im.http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(health().dump(), "application/json");
  });
  if (sc.http_port == 0) {
    const int p = im.http.bind_to_any_port(sc.host);
    if (p <= 0) throw Error(ErrorCode::kTransport, "cannot bind health endpoint");
    http_port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!im.http.bind_to_port(sc.host, sc.http_port)) {
      throw Error(ErrorCode::kTransport, "cannot bind health endpoint");
    }
    http_port_ = sc.http_port;
  }

  threads_.emplace_back([this] { impl_->http.listen_after_bind(); });

  threads_.emplace_back([this] {
    while (auto stream = impl_->listener->accept()) {
      if (!running_) break;
      reap_connections();
      auto conn = std::make_unique<Connection>(std::move(*stream));
      Connection* c = conn.get();
      {
        std::lock_guard lock(conns_mu_);
        conns_.push_back(std::move(conn));
      }
      ++impl_->connections_accepted;
      c->reader = std::thread([this, c] {
        serve_connection(*c);
        --c->live_threads;
      });
      c->writer = std::thread([c] {
        try {
          while (auto body = c->outbox.pop()) c->stream.write_message(*body);
        } catch (const Error&) {
          c->stream.shutdown();  // peer is gone; stop the reader too
        }
        --c->live_threads;
      });
    }
  });

  threads_.emplace_back([this] {
    while (running_) {
      if (auto datagram = impl_->udp->receive()) impl_->ingest.push(std::move(*datagram));
    }
    impl_->ingest.close();
  });

  threads_.emplace_back([this] {
    while (auto datagram = impl_->ingest.pop()) hub_->ingest_bytes(*datagram, wall_now_us());
  });

  threads_.emplace_back([this] {
    std::unique_lock lock(state_mu_);
    while (running_) {
      state_cv_.wait_for(lock, kTickPeriod, [this] { return !running_.load(); });
      if (!running_) break;
      lock.unlock();
      hub_->tick(wall_now_us());
      lock.lock();
    }
  });
}

void NavServer::stop() {
  {
    std::lock_guard lock(state_mu_);
    if (!running_.exchange(false)) return;
  }
  state_cv_.notify_all();
  Impl& im = *impl_;
  im.http.stop();
  if (im.listener) im.listener->shutdown();
  if (im.udp) im.udp->shutdown();
  {
    std::lock_guard lock(conns_mu_);
    for (auto& c : conns_) {
      c->stream.shutdown();
      c->outbox.close();
    }
  }
  for (std::thread& t : threads_) t.join();
  threads_.clear();
  std::list<std::unique_ptr<Connection>> all;
  {
    std::lock_guard lock(conns_mu_);
    all.swap(conns_);
  }
  for (auto& c : all) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
}

void NavServer::wait() {
  std::unique_lock lock(state_mu_);
  state_cv_.wait(lock, [this] { return !running_.load(); });
}

Json NavServer::health() const {
  Json j = hub_->health();
  std::size_t open = 0, outbox_drops = 0;
  {
    std::lock_guard lock(conns_mu_);
    for (const auto& c : conns_) {
      if (c->live_threads.load() > 0) ++open;
      outbox_drops += c->outbox.drops();
    }
  }
  j["connections"] = {{"open", open}, {"accepted", impl_->connections_accepted.load()}};
  j["queues"] = {{"ingest_drops", impl_->ingest.drops()},
                 {"ingest_high_water", impl_->ingest.high_water()},
                 {"outbox_drops", outbox_drops}};
  return j;
}

}  // namespace usnav
