// Copyright 2026 The shapeservo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Live episode service: newline-delimited JSON over TCP, one episode per
// connection. SessionCore holds the protocol logic without any I/O; Server
// wires it to Boost.Asio sockets and a fixed-rate tick timer.
//
// Everything runs on one io_context thread, so client commands are applied
// strictly between control ticks and a live episode is never mutated
// concurrently.

#pragma once

#include <boost/asio.hpp>
#include <chrono>
#include <csignal>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapeservo/config_io.hpp"
#include "shapeservo/log_io.hpp"
#include "shapeservo/plant.hpp"
#include "shapeservo/reference.hpp"

namespace shapeservo {

inline constexpr int kServiceVersion = 1;
inline constexpr const char* kServiceSchema = "shapeservo.service/1";

struct ServiceConfig {
  RobotConfig robot;
  Camera camera = default_camera();
  ControlGains gains;
  SimConfig sim;
  NoiseConfig noise;
  /// Loaded into every new session; may be empty.
  Scenario scenario;
  /// Wall-clock tick period; defaults to sim.dt.
  std::optional<double> tick_period_s;
  /// Threshold for references created by set_reference.
  double default_threshold = 0.1;
  std::size_t max_line_bytes = 1 << 20;

  double tick_period() const { return tick_period_s.value_or(sim.dt); }
};

/// Protocol state machine of one session.
class SessionCore {
 public:
  explicit SessionCore(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.scenario.references.empty()) make_episode(cfg_.scenario);
  }

  bool running() const { return running_; }
  const ServiceConfig& config() const { return cfg_; }
  const Episode* episode() const { return episode_ ? &*episode_ : nullptr; }

  json welcome() const {
    return {{"type", "welcome"},
            {"schema", kServiceSchema},
            {"version", kServiceVersion},
            {"robot", to_json(cfg_.robot)},
            {"camera", to_json(cfg_.camera)},
            {"gains", to_json(cfg_.gains)},
            {"sim", to_json(cfg_.sim)},
            {"tick_period_s", cfg_.tick_period()},
            {"status", status()}};
  }

  std::vector<json> handle_line(const std::string& line) {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error& e) {
      return {error_message(nullptr, "parse_error", e.what())};
    }
    return handle(msg);
  }

  std::vector<json> handle(const json& msg) {
    const json id = msg.is_object() && msg.contains("id") ? msg["id"] : json(nullptr);
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      return {error_message(id, "bad_request", "message must be an object with a string 'type'")};
    }
    const std::string type = msg["type"];
    try {
      if (type == "hello") return on_hello(msg, id);
      if (type == "start") return on_start(id);
      if (type == "pause") return on_pause(id);
      if (type == "reset") return on_reset(id);
      if (type == "step") return on_step(msg, id);
      if (type == "advance") return on_advance(id);
      if (type == "set_reference") return on_set_reference(msg, id);
      if (type == "load_scenario") return on_load_scenario(msg, id);
      if (type == "get_state") return {snapshot()};
      return {error_message(id, "unknown_type", "unknown message type '" + type + "'")};
    } catch (const UnreachableError& e) {
      json err = error_message(id, "unreachable", e.what());
      err["residual"] = e.residual();
      return {err};
    } catch (const InfeasibleError& e) {
      return {error_message(id, "infeasible", e.what())};
    } catch (const VisibilityError& e) {
      return {error_message(id, "visibility", e.what())};
    } catch (const ConfigError& e) {
      return {error_message(id, "bad_request", e.what())};
    } catch (const Error& e) {
      return {error_message(id, "bad_request", e.what())};
    } catch (const json::exception& e) {
      return {error_message(id, "bad_request", e.what())};
    }
  }

  /// One control cycle when running. Returns the streamed messages.
  std::vector<json> tick() {
    if (!running_) return {};
    return advance_one();
  }

 private:
  std::string status() const {
    if (!episode_) return "idle";
    if (episode_->finished()) return to_string(episode_->log().termination);
    return running_ ? "running" : "paused";
  }

  static json error_message(const json& id, const std::string& code, const std::string& message) {
    json j{{"type", "error"}, {"code", code}, {"message", message}};
    if (!id.is_null()) j["id"] = id;
    return j;
  }

  json ack(const json& id, const std::string& command) const {
    json j{{"type", "ack"}, {"command", command}, {"status", status()}};
    if (!id.is_null()) j["id"] = id;
    return j;
  }

  void make_episode(Scenario sc) {
    episode_.emplace(cfg_.robot, cfg_.camera, cfg_.gains, std::move(sc), cfg_.sim, cfg_.noise);
    running_ = false;
  }

  /// Current plant pose without running a cycle.
  json snapshot() const {
    json j{{"type", "snapshot"}, {"status", status()}};
    if (!episode_) return j;
    const auto& plant = episode_->plant();
    auto cables = json::array();
    for (const auto& c : plant.cables) cables.push_back({c.l1, c.l2, c.l3});
    const auto arcs = cables_to_arcs(cfg_.robot, plant.cables);
    j["step"] = episode_->steps();
    j["time"] = plant.time;
    j["cables"] = cables;
    j["arcs"] = to_json(std::span<const ArcParams>(arcs));
    j["features"] = to_json(extract_shape_features(cfg_.robot, arcs, cfg_.camera));
    j["ref_index"] = episode_->reference_index();
    j["reference"] = to_json(episode_->scenario().references[episode_->reference_index()].features);
    j["references"] = episode_->scenario().references.size();
    return j;
  }

  std::vector<json> advance_one() {
    std::vector<json> out;
    const TrajectoryRecord* rec = episode_->step();
    if (rec != nullptr) {
      json s = to_json(*rec);
      s["type"] = "state";
      s["status"] = status();
      out.push_back(std::move(s));
    }
    if (episode_->finished()) {
      running_ = false;
      const auto& log = episode_->log();
      json end{{"type", "episode_end"}, {"termination", to_string(log.termination)}, {"steps", episode_->steps()}};
      if (log.termination == Termination::Aborted) {
        end["abort_reason"] = log.abort_reason;
        end["abort_step"] = log.abort_step;
      }
      out.push_back(std::move(end));
    }
    return out;
  }

  std::vector<json> require_live_episode(const json& id) const {
    if (!episode_) return {error_message(id, "no_reference", "no reference loaded")};
    if (episode_->finished()) {
      return {error_message(id, "episode_finished", "episode ended; reset or set a new reference")};
    }
    return {};
  }

  std::vector<json> on_hello(const json& msg, const json& id) {
    const int version = msg.value("version", kServiceVersion);
    if (version != kServiceVersion) {
      return {error_message(id, "unsupported_version", "server speaks version " + std::to_string(kServiceVersion))};
    }
    json w = welcome();
    if (!id.is_null()) w["id"] = id;
    return {w};
  }

  std::vector<json> on_start(const json& id) {
    if (auto err = require_live_episode(id); !err.empty()) return err;
    running_ = true;
    return {ack(id, "start")};
  }

  std::vector<json> on_pause(const json& id) {
    running_ = false;
    return {ack(id, "pause")};
  }

  std::vector<json> on_reset(const json& id) {
    if (episode_) episode_->reset();
    running_ = false;
    return {ack(id, "reset"), snapshot()};
  }

  std::vector<json> on_step(const json& msg, const json& id) {
    if (running_) return {error_message(id, "bad_request", "step is only allowed while paused")};
    if (auto err = require_live_episode(id); !err.empty()) return err;
    const int count = msg.value("count", 1);
    if (count < 1) return {error_message(id, "bad_request", "count must be positive")};
    std::vector<json> out{ack(id, "step")};
    for (int k = 0; k < count && !episode_->finished(); ++k) {
      for (auto& m : advance_one()) out.push_back(std::move(m));
    }
    return out;
  }

  std::vector<json> on_advance(const json& id) {
    if (auto err = require_live_episode(id); !err.empty()) return err;
    if (episode_->reference_index() + 1 >= episode_->scenario().references.size()) {
      return {error_message(id, "bad_request", "already at the last reference")};
    }
    episode_->request_manual_advance();
    return {ack(id, "advance")};
  }

  std::vector<json> on_set_reference(const json& msg, const json& id) {
    detail::check_keys(msg, {"type", "id", "pixel", "depth_m", "position", "tangent", "criterion", "obstacles",
                             "obstacle_margin", "threshold", "append", "label"},
                       "set_reference");
    json target = msg;
    for (const char* k : {"type", "id", "threshold", "append", "label"}) target.erase(k);
    const auto spec = target_from_json(target, 1.0, "set_reference");
    const auto g = resolve_target(spec, cfg_.robot, cfg_.camera);  // throws: prior reference kept
    Reference ref{g.features, msg.value("threshold", cfg_.default_threshold), g.arcs, msg.value("label", "")};
    if (!(ref.threshold > 0.0)) throw ConfigError("set_reference: threshold must be positive");
    const bool append = msg.value("append", false);
    if (!episode_) {
      Scenario sc;
      sc.references.push_back(std::move(ref));
      make_episode(std::move(sc));
    } else if (append) {
      episode_->append_reference(std::move(ref));
    } else {
      episode_->replace_reference(std::move(ref));
    }
    json a = ack(id, "set_reference");
    a["reference"] = to_json(g);
    a["ref_index"] = episode_->scenario().references.size() - 1;
    return {a};
  }

  std::vector<json> on_load_scenario(const json& msg, const json& id) {
    if (!msg.contains("scenario")) throw ConfigError("load_scenario: missing 'scenario'");
    make_episode(scenario_from_json(msg["scenario"], cfg_.robot, cfg_.camera));
    json a = ack(id, "load_scenario");
    a["references"] = episode_->scenario().references.size();
    return {a, snapshot()};
  }

  ServiceConfig cfg_;
  std::optional<Episode> episode_;
  bool running_ = false;
};

// --- transport --------------------------------------------------------------

namespace asio = boost::asio;

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(asio::ip::tcp::socket socket, const ServiceConfig& cfg)
      : socket_(std::move(socket)), timer_(socket_.get_executor()), core_(cfg), buffer_(cfg.max_line_bytes) {}

  void start() {
    send(core_.welcome());
    read();
  }

  void close() {
    boost::system::error_code ignored;
    timer_.cancel();
    socket_.shutdown(asio::ip::tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

 private:
  void read() {
    asio::async_read_until(socket_, buffer_, '\n', [self = shared_from_this()](auto ec, std::size_t n) {
      if (ec == asio::error::not_found) {
        self->send({{"type", "error"}, {"code", "bad_request"}, {"message", "line too long"}});
        self->closing_ = true;
        return;
      }
      if (ec) {
        self->close();
        return;
      }
      std::string line(asio::buffers_begin(self->buffer_.data()), asio::buffers_begin(self->buffer_.data()) + n);
      self->buffer_.consume(n);
      while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
      if (!line.empty()) {
        const bool was_running = self->core_.running();
        for (auto& m : self->core_.handle_line(line)) self->send(m);
        if (!was_running && self->core_.running()) self->schedule_tick(true);
      }
      self->read();
    });
  }

  void schedule_tick(bool first) {
    const auto period = std::chrono::duration_cast<asio::steady_timer::duration>(
        std::chrono::duration<double>(core_.config().tick_period()));
    // fixed rate: next expiry follows the previous one, not the handler
    timer_.expires_at((first ? asio::steady_timer::clock_type::now() : timer_.expiry()) + period);
    timer_.async_wait([self = shared_from_this()](auto ec) {
      if (ec || !self->core_.running()) return;
      for (auto& m : self->core_.tick()) self->send(m);
      if (self->core_.running()) self->schedule_tick(false);
    });
  }

  void send(const json& msg) {
    outbox_.push_back(msg.dump() + "\n");
    if (outbox_.size() == 1) write();
  }

  void write() {
    asio::async_write(socket_, asio::buffer(outbox_.front()), [self = shared_from_this()](auto ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) {
        self->write();
      } else if (self->closing_) {
        self->close();
      }
    });
  }

  asio::ip::tcp::socket socket_;
  asio::steady_timer timer_;
  SessionCore core_;
  asio::streambuf buffer_;
  std::deque<std::string> outbox_;
  bool closing_ = false;
};

class Server {
 public:
  /// Port 0 picks a free port (see port()).
  Server(asio::io_context& io, ServiceConfig cfg, unsigned short port, const std::string& address = "127.0.0.1")
      : acceptor_(io, {asio::ip::make_address(address), port}), cfg_(std::move(cfg)) {
    // surface configuration errors at startup, not on first connection
    SessionCore probe(cfg_);
    accept();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void stop() {
    boost::system::error_code ignored;
    acceptor_.close(ignored);
    for (auto& w : sessions_) {
      if (auto s = w.lock()) s->close();
    }
  }

 private:
  void accept() {
    acceptor_.async_accept([this](auto ec, asio::ip::tcp::socket socket) {
      if (ec) return;
      auto session = std::make_shared<Session>(std::move(socket), cfg_);
      sessions_.push_back(session);
      session->start();
      accept();
    });
  }

  asio::ip::tcp::acceptor acceptor_;
  ServiceConfig cfg_;
  std::vector<std::weak_ptr<Session>> sessions_;
};

/// Blocks until SIGINT / SIGTERM.
inline void serve(const ServiceConfig& cfg, unsigned short port, const std::string& address = "127.0.0.1",
                  const std::function<void(unsigned short)>& on_listen = {}) {
  asio::io_context io;
  Server server(io, cfg, port, address);
  if (on_listen) on_listen(server.port());
  asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](auto, int) {
    server.stop();
    io.stop();
  });
  io.run();
}

}  // namespace shapeservo
