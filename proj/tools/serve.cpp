// Copyright 2026 The stintopt Authors
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


// Live session: one TCP client, JSON lines in both directions. The main
// thread paces the closed loop against the wall clock; a reader thread
// parses inbound lines and a writer thread drains the outbound queue.
// Commands are applied between simulation steps only.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cmath>
#include <csignal>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "commands.hpp"
#include "stintopt/errors.hpp"

namespace stintopt::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr auto kFrame = std::chrono::milliseconds(50);  // 20 Hz telemetry

class Outbox {
 public:
  void push(const json& j) {
    {
      std::lock_guard lock(mutex_);
      lines_.push_back(j.dump() + '\n');
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_one();
  }
  // Blocks until a line is available; false once closed and drained.
  bool pop(std::string& line) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !lines_.empty(); });
    if (lines_.empty()) return false;
    line = std::move(lines_.front());
    lines_.pop_front();
    return true;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  bool closed_ = false;
};

class Inbox {
 public:
  void push(json j) {
    std::lock_guard lock(mutex_);
    commands_.push_back(std::move(j));
  }
  std::vector<json> take() {
    std::lock_guard lock(mutex_);
    std::vector<json> out(commands_.begin(), commands_.end());
    commands_.clear();
    return out;
  }

 private:
  std::mutex mutex_;
  std::deque<json> commands_;
};

json error_message(const std::string& what) { return {{"type", "error"}, {"message", what}}; }

void send_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return;
    off += static_cast<std::size_t>(n);
  }
}

void reader_loop(int fd, Inbox& inbox, Outbox& outbox, std::atomic<bool>& connected) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        outbox.push(error_message("malformed message: not a JSON object"));
      } else if (!j.contains("type") || j["type"] != "command") {
        outbox.push(error_message("unsupported message type; expected \"command\""));
      } else {
        inbox.push(std::move(j));
      }
    }
  }
  connected = false;
}

/// One closed-loop session; rebuilt from scratch on reset.
class Session {
 public:
  Session(const RunConfig& config, const StintSetup& setup,
          std::shared_ptr<const PlanSnapshot> initial)
      : config_(config), setup_(setup), initial_(std::move(initial)) {
    reset();
  }

  void reset() {
    loop_.reset();
    auto scenario = DisturbanceScenario::named(parse_scenario(config_.scenario),
                                               setup_.boundary.s0, setup_.boundary.S_stint,
                                               setup_.lap_length);
    loop_ = std::make_unique<ClosedLoop>(setup_, config_.controller, std::move(scenario),
                                         DriverModel{}, initial_,
                                         ClosedLoop::Planner::kBackground);
    reported_ = false;
    external_ = false;
  }

  ClosedLoop& loop() { return *loop_; }
  bool external() const { return external_; }
  void set_external(bool e) { external_ = e; }
  bool reported() const { return reported_; }
  void mark_reported() { reported_ = true; }

 private:
  const RunConfig& config_;
  const StintSetup& setup_;
  std::shared_ptr<const PlanSnapshot> initial_;
  std::unique_ptr<ClosedLoop> loop_;
  bool reported_ = false;
  bool external_ = false;
};

ScenarioKind trigger_kind(const std::string& name) {
  if (name == "drafting") return ScenarioKind::kDrafting;
  if (name == "fcy") return ScenarioKind::kFullCourseYellow;
  if (name == "degradation") return ScenarioKind::kTireDegradation;
  if (name == "clear") return ScenarioKind::kNone;
  return parse_scenario(name);  // also accept the CamelCase names
}

struct PaceState {
  bool paused = false;
};

/// Applies one command; returns the ack payload. Throws InputError for
/// anything malformed, which the caller turns into an error message.
json apply(const json& cmd, Session& session, PaceState& pace) {
  ClosedLoop& loop = session.loop();
  if (cmd.contains("set_variant")) {
    const Variant v = parse_variant(cmd.at("set_variant").get<std::string>());
    loop.set_variant(v);
    return {{"command", "set_variant"}, {"variant", to_string(v)}};
  }
  if (cmd.contains("trigger")) {
    const ScenarioKind k = trigger_kind(cmd.at("trigger").get<std::string>());
    loop.trigger(k);
    return {{"command", "trigger"}, {"scenario", to_string(k)}};
  }
  if (cmd.contains("set_map")) {
    const int id = cmd.at("set_map").get<int>();
    loop.set_map(id);
    return {{"command", "set_map"}, {"map", id}};
  }
  if (cmd.contains("driver_override")) {
    const json& d = cmd.at("driver_override");
    std::optional<bool> throttle;
    if (d.is_null() || d == "auto") {
      throttle.reset();
    } else if (d == "coast_ack" || d == "lift") {
      throttle = false;
    } else if (d == "throttle") {
      throttle = true;
    } else if (d.is_object() && d.contains("throttle")) {
      const json& u = d.at("throttle");
      if (u.is_boolean()) {
        throttle = u.get<bool>();
      } else if (u.is_number()) {
        throttle = u.get<double>() > 0.5;
      } else {
        throw InputError("driver_override.throttle must be 0, 1 or a boolean");
      }
    } else {
      throw InputError("driver_override must be {\"throttle\":0|1}, \"coast_ack\" or \"auto\"");
    }
    loop.set_driver_throttle(throttle);
    session.set_external(throttle.has_value());
    json ack = {{"command", "driver_override"},
                {"mode", throttle ? "external" : "automated"}};
    if (throttle) ack["throttle"] = *throttle ? 1 : 0;
    return ack;
  }
  if (cmd.contains("pause")) {
    const json& p = cmd.at("pause");
    pace.paused = p.is_boolean() ? p.get<bool>() : true;
    return {{"command", "pause"}, {"paused", pace.paused}};
  }
  if (cmd.contains("resume")) {
    pace.paused = false;
    return {{"command", "resume"}, {"paused", false}};
  }
  if (cmd.contains("reset")) {
    session.reset();
    return {{"command", "reset"}};
  }
  throw InputError("unknown command; expected one of set_variant, trigger, set_map, "
                   "driver_override, pause, resume, reset");
}

json telemetry(const TelemetryRow& r, const VehicleState& x, Session& session,
               const RunConfig& c) {
  ClosedLoop& loop = session.loop();
  const Controller& ctl = loop.controller();
  return {{"type", "telemetry"},
          {"s", x.s},
          {"t", x.t},
          {"lap", static_cast<int>(x.s / c.track.lap_length) + 1},
          {"v", r.E_kin > 0.0 ? std::sqrt(2.0 * r.E_kin / c.vehicle.m_eq) : 0.0},
          {"E_kin", r.E_kin},
          {"E_b", r.E_b},
          {"theta_m", r.theta_m},
          {"theta_b", r.theta_b},
          {"u_th", r.u_th},
          {"coast", r.coast_signal},
          {"coasting", r.coasting},
          {"driver_coast", r.driver_coast},
          {"grip_limited", r.grip_limited},
          {"cap_active", r.cap_active},
          {"lambda_kin", r.lambda_kin},
          {"lambda_star_adj", r.lambda_adj},
          {"error", r.error},
          {"variant", to_string(ctl.config().variant)},
          {"map", ctl.config().active_map},
          {"scenario", loop.scenario().name()},
          {"driver", session.external() ? "external" : "automated"}};
}

}  // namespace

int cmd_serve(const RunConfig& c, int port) {
  std::signal(SIGPIPE, SIG_IGN);
  const StintSetup setup = make_setup(c);
  const auto initial = initial_plan(setup.boundary, setup.track, setup.params, GripSchedule{},
                                    setup.maps, c.controller);

  const int server = ::socket(AF_INET, SOCK_STREAM, 0);
  if (server < 0) throw StintError("socket() failed");
  const int yes = 1;
  ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(server, 1) != 0) {
    ::close(server);
    throw StintError("cannot listen on 127.0.0.1:" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &len);
  std::cout << "listening on port " << ntohs(addr.sin_port) << std::endl;

  const int client = ::accept(server, nullptr, nullptr);
  ::close(server);
  if (client < 0) throw StintError("accept() failed");

  Inbox inbox;
  Outbox outbox;
  std::atomic<bool> connected{true};
  std::thread writer([&] {
    std::string line;
    while (outbox.pop(line)) send_all(client, line);
  });
  std::thread reader([&] { reader_loop(client, inbox, outbox, connected); });

  outbox.push({{"type", "hello"},
               {"config_hash", config_hash(c)},
               {"seed", c.seed},
               {"timescale", c.timescale},
               {"S_stint", setup.boundary.S_stint},
               {"lap_length", setup.lap_length},
               {"n_laps", c.n_laps}});

  Session session(c, setup, initial);
  PaceState pace;
  // Simulated time is tied to wall time since the last resume (or reset).
  auto anchor_wall = Clock::now();
  double anchor_sim = session.loop().state().t;
  auto next_frame = Clock::now();

  while (connected) {
    for (const json& cmd : inbox.take()) {
      const bool was_paused = pace.paused;
      try {
        json ack = apply(cmd, session, pace);
        ack["type"] = "ack";
        outbox.push(ack);
        if (cmd.contains("reset") || (was_paused && !pace.paused)) {
          anchor_wall = Clock::now();
          anchor_sim = session.loop().state().t;
        }
      } catch (const std::exception& e) {
        outbox.push(error_message(e.what()));
      }
    }

    ClosedLoop& loop = session.loop();
    if (!pace.paused && !loop.finished()) {
      const double elapsed =
          std::chrono::duration<double>(Clock::now() - anchor_wall).count();
      const double target = anchor_sim + c.timescale * elapsed;
      const TelemetryRow* last = nullptr;
      try {
        while (!loop.finished() && loop.state().t < target) last = &loop.step();
      } catch (const std::exception& e) {
        outbox.push(error_message(std::string("simulation: ") + e.what()));
      }
      for (const Event& e : loop.drain_events()) outbox.push(to_json(e));
      if (last) outbox.push(telemetry(*last, loop.state(), session, c));
    }
    if (loop.finished() && !session.reported()) {
      for (const Event& e : loop.drain_events()) outbox.push(to_json(e));
      StintLog log = loop.finish();
      try {
        write_telemetry_csv(log, c.out / "telemetry.csv");
      } catch (const std::exception& e) {
        outbox.push(error_message(e.what()));
      }
      json m = metrics_json(log);
      m["config_hash"] = config_hash(c);
      m["seed"] = c.seed;
      std::filesystem::create_directories(c.out);
      std::ofstream(c.out / "metrics.json") << m.dump(2) << '\n';
      m.erase("laps");
      m.erase("events");
      m["type"] = "metrics";
      outbox.push(m);
      session.mark_reported();
    }

    next_frame += kFrame;
    const auto now = Clock::now();
    if (next_frame < now) next_frame = now;
    std::this_thread::sleep_until(next_frame);
  }

  ::shutdown(client, SHUT_RDWR);
  reader.join();
  outbox.close();
  writer.join();
  ::close(client);
  return kExitOk;
}

}  // namespace stintopt::cli
