#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "twinlink/config.hpp"
#include "twinlink/protocol.hpp"
#include "twinlink/session.hpp"

namespace twinlink {

// ---------------------------------------------------------------------------
// Headless mode: scripted commands, tick loop at full speed.
// ---------------------------------------------------------------------------

struct HeadlessResult {
  nlohmann::json summary;
  std::int64_t ticks{0};
};

// Default run length: one second past the last scripted command.
inline std::int64_t default_duration_ticks(const std::vector<PilotCommand>& script, const DynamicsConfig& dyn) {
  const double last_ms = script.empty() ? 0.0 : static_cast<double>(script.back().issued_at_ms);
  return static_cast<std::int64_t>(std::ceil((last_ms + 1000.0) / dyn.tick_ms()));
}

// Runs one session for `ticks` ticks, submitting each scripted command on the
// first tick whose start time is >= issued_at. Rejected commands are logged
// in the flight log's "errors" column.
inline HeadlessResult run_headless(const TwinConfig& cfg, const std::vector<PilotCommand>& script,
                                   std::uint64_t seed, std::int64_t ticks, std::ostream& log_out) {
  TwinConfig c = cfg;
  c.seed = seed;
  Session session(1, c, Environment::from_config(c, seed), seed, std::nullopt, FlightLog(&log_out));
  std::size_t next = 0;
  const double tick_ms = c.dynamics.tick_ms();
  for (std::int64_t t = 0; t < ticks; ++t) {
    const double now_ms = static_cast<double>(t) * tick_ms;
    while (next < script.size() && static_cast<double>(script[next].issued_at_ms) <= now_ms + 1e-9) {
      session.submit_text(protocol::command_to_json(script[next]).dump());
      ++next;
    }
    session.run_tick();
  }
  session.log().flush();
  return {session.summary(), ticks};
}

// ---------------------------------------------------------------------------
// Live WebSocket server.
// ---------------------------------------------------------------------------

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

class Server;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server& server) : ws_(std::move(socket)), server_(server) {}

  void start();
  void send(std::string text) {
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write_next();
  }
  void close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
    ws_.next_layer().socket().close(ec);
  }
  [[nodiscard]] std::uint64_t session_id() const { return session_id_; }

 private:
  void read_next();
  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->outbox_.clear();
                        return;
                      }
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty()) self->write_next();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  std::uint64_t session_id_{0};
  bool closed_{false};
};

// Accepts pilot sessions, drives every live session's tick loop at wall-clock
// rate and persists flight logs under server.log_dir. All session state is
// touched only from the single io thread.
class Server {
 public:
  explicit Server(TwinConfig cfg) : cfg_(std::move(cfg)), acceptor_(ioc_), timer_(ioc_) { cfg_.validate(); }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds, opens log files and starts the io thread. Returns the bound port.
  unsigned short start() {
    std::filesystem::create_directories(cfg_.server.log_dir);
    index_.open(std::filesystem::path(cfg_.server.log_dir) / "sessions.jsonl", std::ios::trunc);
    if (!index_) throw ConfigError(cfg_.server.log_dir, "cannot create log files");

    const tcp::endpoint ep(net::ip::make_address(cfg_.server.bind), static_cast<unsigned short>(cfg_.server.port));
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();

    accept_next();
    next_tick_ = std::chrono::steady_clock::now();
    schedule_tick();
    running_ = true;
    thread_ = std::thread([this] { ioc_.run(); });
    return port_;
  }

  // Graceful shutdown: closes connections, flushes session logs and writes
  // server_summary.json. Safe to call more than once.
  void stop() {
    if (!running_.exchange(false)) return;
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      timer_.cancel();
      std::vector<std::uint64_t> ids;
      for (auto& [id, slot] : sessions_) ids.push_back(id);
      for (auto id : ids) end_session(id);
      write_summary();
      ioc_.stop();
    });
    if (thread_.joinable()) thread_.join();
  }

  [[nodiscard]] unsigned short port() const { return port_; }

  // Completed-session summaries; only meaningful after stop().
  [[nodiscard]] const std::vector<nlohmann::json>& finished() const { return finished_; }

 private:
  friend class Connection;

  struct Slot {
    std::unique_ptr<std::ofstream> file;
    std::unique_ptr<Session> session;
    std::weak_ptr<Connection> conn;
  };

  void accept_next() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), *this)->start();
      accept_next();
    });
  }

  std::uint64_t open_session(const std::shared_ptr<Connection>& conn) {
    const std::uint64_t id = ++last_id_;
    Slot slot;
    const auto path = std::filesystem::path(cfg_.server.log_dir) / ("session-" + std::to_string(id) + ".jsonl");
    slot.file = std::make_unique<std::ofstream>(path, std::ios::trunc);
    const std::uint64_t seed = derive_seed(cfg_.seed, {id});
    slot.session = std::make_unique<Session>(id, cfg_, Environment::from_config(cfg_, seed), seed, std::nullopt,
                                             FlightLog(slot.file.get()));
    slot.conn = conn;
    sessions_.emplace(id, std::move(slot));
    return id;
  }

  void on_message(std::uint64_t id, const std::string& text) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    if (auto err = it->second.session->submit_text(text)) {
      if (auto c = it->second.conn.lock()) c->send(protocol::error_frame(*err, id).dump());
    }
  }

  void end_session(std::uint64_t id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    auto& slot = it->second;
    slot.session->log().flush();
    auto summary = slot.session->summary();
    index_ << summary.dump() << '\n';
    index_.flush();
    finished_.push_back(summary);
    if (auto c = slot.conn.lock()) c->close();
    sessions_.erase(it);
  }

  void schedule_tick() {
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(cfg_.dynamics.tick_dt));
    next_tick_ += period;
    timer_.expires_at(next_tick_);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      on_tick();
      schedule_tick();
    });
  }

  void on_tick() {
    const double tick_hz = 1.0 / cfg_.dynamics.tick_dt;
    const auto decimation = static_cast<std::int64_t>(std::max(1.0, std::ceil(tick_hz / cfg_.server.telemetry_hz)));
    for (auto& [id, slot] : sessions_) {
      auto frame = slot.session->run_tick();
      auto conn = slot.conn.lock();
      if (!conn) continue;
      for (const auto& ev : frame.decisions) {
        if (ev.decision.verdict == Verdict::kDeniedStop) {
          auto msg = decision_event_to_json(ev);
          msg["topic"] = "decision";
          msg["session"] = id;
          msg["tick"] = frame.tick;
          conn->send(msg.dump());
        }
      }
      if (frame.tick % decimation == 0) conn->send(telemetry_to_json(frame).dump());
    }
  }

  void write_summary() {
    index_.flush();
    nlohmann::json s = {{"sessions", finished_}, {"port", port_}};
    std::ofstream out(std::filesystem::path(cfg_.server.log_dir) / "server_summary.json", std::ios::trunc);
    out << s.dump(2) << '\n';
  }

  TwinConfig cfg_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  net::steady_timer timer_;
  std::chrono::steady_clock::time_point next_tick_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  unsigned short port_{0};
  std::uint64_t last_id_{0};
  std::map<std::uint64_t, Slot> sessions_;
  std::ofstream index_;
  std::vector<nlohmann::json> finished_;
};

inline void Connection::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->session_id_ = self->server_.open_session(self);
    self->send(nlohmann::json({{"topic", "hello"}, {"session", self->session_id_}}).dump());
    self->read_next();
  });
}

inline void Connection::read_next() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->server_.end_session(self->session_id_);
      return;
    }
    const std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    self->server_.on_message(self->session_id_, text);
    self->read_next();
  });
}

}  // namespace twinlink
