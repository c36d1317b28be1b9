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


// Drives the stintopt binary as a subprocess.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(STINTOPT_BIN) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  Outcome r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("stintopt_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Two-lap stint on the synthetic track with explicit targets.
json small_config(int laps = 2) {
  return {{"track", {{"seed", 1}, {"corners", 10}, {"lap_length", 4200}}},
          {"stint",
           {{"n_laps", laps},
            {"v0", 30},
            {"E_b_target", 200e6 - laps * 16e6},
            {"theta_b_target", 332.15}}},
          {"controller", {{"variant", "FixedCostate"}}},
          {"seed", 1}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  ADD_FAILURE() << "no column " << name;
  return 0;
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("optimize").code, 1);  // --config missing
  EXPECT_EQ(run("frobnicate --config x.json").code, 1);
  EXPECT_EQ(run("optimize --config /nonexistent/config.json").code, 1);
}

TEST(Cli, UnknownConfigKeyIsRejected) {
  const fs::path dir = scratch("badkey");
  json j = small_config();
  j["stint"]["n_lap"] = 3;
  const Outcome r = run("optimize --config " + write_config(dir, j).string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("n_lap"), std::string::npos) << r.output;
}

TEST(Cli, OptimizeWritesPlanFiles) {
  const fs::path dir = scratch("optimize");
  const Outcome r = run("optimize --config " + write_config(dir, small_config()).string() +
                    " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json plan = json::parse(slurp(dir / "out" / "plan.json"));
  EXPECT_EQ(plan["meta"]["status"], "optimal");
  EXPECT_EQ(plan["meta"]["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(plan["meta"]["seed"], 1);
  EXPECT_GT(plan["meta"]["t_pred"].get<double>(), 0.0);

  const auto nodes = read_csv(dir / "out" / "plan_nodes.csv");
  ASSERT_GT(nodes.size(), 100u);
  const std::size_t lk = column(nodes[0], "lambda_kin");
  for (std::size_t i = 1; i < nodes.size(); ++i) EXPECT_LE(std::stod(nodes[i][lk]), 1e-6);

  const auto plot = read_csv(dir / "out" / "plot.csv");
  ASSERT_EQ(plot.size(), nodes.size());
  for (const char* c : {"s", "power_kW", "E_kin_MJ", "E_b_MJ", "theta_m_C", "theta_b_C",
                        "lambda_kin"}) {
    column(plot[0], c);
  }
}

TEST(Cli, InfeasibleTargetExitsWithTwo) {
  const fs::path dir = scratch("infeasible");
  json j = small_config();
  j["stint"]["E_b_target"] = 200e6 + 1.0;
  const Outcome r = run("optimize --config " + write_config(dir, j).string() + " --out " +
                    (dir / "out").string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("terminal battery energy"), std::string::npos) << r.output;
}

TEST(Cli, AdaptVerifiesWitnesses) {
  const fs::path dir = scratch("adapt");
  const Outcome r = run("adapt --config " + write_config(dir, small_config()).string() +
                    " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json cp = json::parse(slurp(dir / "out" / "coast_plan.json"));
  EXPECT_TRUE(cp["meta"]["witnesses_verified"].get<bool>());
  const auto maps = read_csv(dir / "out" / "maps.csv");
  ASSERT_EQ(maps.size(), 4u);
  const std::size_t gap = column(maps[0], "gap_pct");
  for (std::size_t i = 1; i < maps.size(); ++i) EXPECT_GE(std::stod(maps[i][gap]), 0.0);
}

// Zero-gain, fixed-threshold closed loop on the undisturbed stint is the
// open-loop simulation the adapt cost came from.
TEST(Cli, AdaptThenSimulateAgree) {
  const fs::path dir = scratch("consistency");
  json j = small_config();
  j["controller"] = {{"variant", "FixedCostateAndThreshold"}, {"K_p", 0.0}, {"K_i", 0.0}};
  const std::string cfg = write_config(dir, j).string();
  ASSERT_EQ(run("adapt --config " + cfg + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + (dir / "s").string()).code, 0);
  const json cp = json::parse(slurp(dir / "a" / "coast_plan.json"));
  const json m = json::parse(slurp(dir / "s" / "metrics.json"));
  double cost = 0.0;
  for (const auto& mp : cp["coast_plan"]["maps"]) {
    if (mp["id"] == 0) cost = mp["cost"].get<double>();
  }
  ASSERT_GT(cost, 0.0);
  EXPECT_NEAR(m["t_stint"].get<double>(), cost, 0.002 * cost);
  EXPECT_TRUE(m["completed"].get<bool>());
  EXPECT_EQ(m["meta"]["config_hash"], cp["meta"]["config_hash"]);
}

TEST(Cli, SimulateWritesTelemetryTraceAndMetrics) {
  const fs::path dir = scratch("simulate");
  const Outcome r = run("simulate --config " + write_config(dir, small_config()).string() +
                    " --scenario FullCourseYellow --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json m = json::parse(slurp(dir / "out" / "metrics.json"));
  EXPECT_EQ(m["scenario"], "FullCourseYellow");
  EXPECT_TRUE(m["time_loss_pct"].is_number());
  EXPECT_LE(m["audit_residual"].get<double>(), 1e-6);
  const auto tel = read_csv(dir / "out" / "telemetry.csv");
  const auto trace = read_csv(dir / "out" / "controller_trace.csv");
  EXPECT_EQ(tel.size(), trace.size());
  EXPECT_GT(tel.size(), 8000u);
}

TEST(Cli, FailedRunExitsWithOne) {
  // Far too little energy for two laps: the battery floor is hit mid-stint.
  const fs::path dir = scratch("depleted");
  json j = small_config();
  j["stint"]["E_b0"] = 25e6;
  j["stint"]["E_b_target"] = 20e6;
  const Outcome r = run("simulate --config " + write_config(dir, j).string() + " --out " +
                    (dir / "out").string());
  EXPECT_NE(r.code, 0) << r.output;
}

TEST(Cli, SweepGridSize) {
  const fs::path dir = scratch("sweep");
  json j = small_config();
  j["stint"].erase("E_b_target");
  j["stint"].erase("theta_b_target");
  j["stint"]["t_charge"] = 400;
  j["sweep"] = {{"laps", {2, 3}}, {"charge_times", {150, 200}}};
  const Outcome r = run("sweep --config " + write_config(dir, j).string() + " --out " +
                    (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(dir / "out" / "sweep.csv");
  EXPECT_EQ(rows.size(), 5u);  // header plus 2 x 2
}

TEST(Cli, RepeatedRunsAreBitIdentical) {
  const fs::path dir = scratch("determinism");
  const std::string cfg = write_config(dir, small_config()).string();
  for (const char* cmd : {"optimize", "adapt", "simulate"}) {
    ASSERT_EQ(run(std::string(cmd) + " --config " + cfg + " --out " + (dir / "a").string()).code, 0);
    ASSERT_EQ(run(std::string(cmd) + " --config " + cfg + " --out " + (dir / "b").string()).code, 0);
  }
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    const fs::path other = dir / "b" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 8u);
}

TEST(Cli, SeedChangesTheHash) {
  const fs::path dir = scratch("seed");
  const std::string cfg = write_config(dir, small_config()).string();
  ASSERT_EQ(run("optimize --config " + cfg + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run("optimize --config " + cfg + " --seed 2 --out " + (dir / "b").string()).code, 0);
  const json a = json::parse(slurp(dir / "a" / "plan.json"));
  const json b = json::parse(slurp(dir / "b" / "plan.json"));
  EXPECT_NE(a["meta"]["config_hash"], b["meta"]["config_hash"]);
  EXPECT_EQ(b["meta"]["seed"], 2);
}

// ---------------------------------------------------------------------------
// serve

class ServeSession {
 public:
  explicit ServeSession(const std::string& args) {
    const std::string cmd = std::string(STINTOPT_BIN) + " serve --port 0 " + args;
    proc_ = ::popen(cmd.c_str(), "r");
    char line[256] = {};
    if (!std::fgets(line, sizeof line, proc_)) return;
    const std::string s(line);
    const int port = std::stoi(s.substr(s.rfind(' ') + 1));
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd_);
      fd_ = -1;
    }
    timeval tv{0, 20000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~ServeSession() {
    if (fd_ >= 0) ::close(fd_);
    if (proc_) exit_code_ = ::pclose(proc_);
  }
  bool connected() const { return fd_ >= 0; }

  void send(const std::string& line) {
    const std::string s = line + "\n";
    ASSERT_EQ(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL), static_cast<ssize_t>(s.size()));
  }
  void command(const json& body) {
    json j = body;
    j["type"] = "command";
    send(j.dump());
  }

  /// Messages received within `seconds` (or until `stop` matches).
  std::vector<json> read(double seconds,
                         const std::function<bool(const json&)>& stop = nullptr) {
    std::vector<json> out;
    const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    char chunk[65536];
    while (std::chrono::steady_clock::now() < end) {
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n == 0) break;
      if (n > 0) buffer_.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buffer_.find('\n')) != std::string::npos) {
        out.push_back(json::parse(buffer_.substr(0, nl)));
        buffer_.erase(0, nl + 1);
        if (stop && stop(out.back())) return out;
      }
    }
    return out;
  }

 private:
  FILE* proc_ = nullptr;
  int fd_ = -1;
  std::string buffer_;
  int exit_code_ = 0;
};

std::vector<json> of_type(const std::vector<json>& msgs, const std::string& type) {
  std::vector<json> out;
  for (const auto& m : msgs) {
    if (m["type"] == type) out.push_back(m);
  }
  return out;
}

class Serve : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scratch("serve");
    cfg_ = write_config(dir_, small_config()).string();
  }
  std::string args(double timescale) const {
    return "--config " + cfg_ + " --out " + (dir_ / "out").string() + " --timescale " +
           std::to_string(timescale);
  }
  fs::path dir_;
  std::string cfg_;
};

TEST_F(Serve, StreamsTelemetryAndPauses) {
  ServeSession s(args(10));
  ASSERT_TRUE(s.connected());
  const auto first = s.read(1.0);
  ASSERT_FALSE(first.empty());
  EXPECT_EQ(first[0]["type"], "hello");
  EXPECT_EQ(first[0]["config_hash"].get<std::string>().size(), 16u);
  const auto tel = of_type(first, "telemetry");
  EXPECT_GE(tel.size(), 10u);  // at least 10 Hz
  for (std::size_t i = 1; i < tel.size(); ++i) {
    EXPECT_GT(tel[i]["s"].get<double>(), tel[i - 1]["s"].get<double>());
  }
  for (const char* key : {"s", "t", "v", "E_b", "coast", "lambda_kin", "lambda_star_adj",
                          "scenario", "variant", "grip_limited"}) {
    EXPECT_TRUE(tel.back().contains(key)) << key;
  }

  s.command({{"pause", true}});
  // The ack arrives; at most the frame already in flight follows it.
  auto after = s.read(0.2, [](const json& m) { return m["type"] == "ack"; });
  ASSERT_FALSE(after.empty());
  EXPECT_EQ(after.back()["command"], "pause");
  const auto paused = s.read(0.5);
  EXPECT_LE(of_type(paused, "telemetry").size(), 1u);

  s.command({{"resume", true}});
  const auto resumed = of_type(s.read(0.5), "telemetry");
  ASSERT_FALSE(resumed.empty());
  EXPECT_GT(resumed.back()["s"].get<double>(), tel.back()["s"].get<double>());
}

TEST_F(Serve, MalformedMessagesDoNotEndTheSession) {
  ServeSession s(args(10));
  ASSERT_TRUE(s.connected());
  s.send("{not json");
  s.send(R"({"type":"command","launch":"rockets"})");
  s.send(R"({"type":"command","set_variant":"Nope"})");
  s.send(R"({"hello":1})");
  const auto msgs = s.read(0.6);
  EXPECT_EQ(of_type(msgs, "error").size(), 4u);
  s.command({{"set_variant", "FullyOnline"}});
  const auto later = s.read(0.5);
  const auto acks = of_type(later, "ack");
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0]["variant"], "FullyOnline");
  EXPECT_FALSE(of_type(later, "telemetry").empty());
  EXPECT_EQ(of_type(later, "telemetry").back()["variant"], "FullyOnline");
}

TEST_F(Serve, CautionCoversTheNextLap) {
  ServeSession s(args(40));
  ASSERT_TRUE(s.connected());
  s.read(0.3);
  s.command({{"trigger", "fcy"}});
  const auto msgs = s.read(30.0, [](const json& m) { return m["type"] == "metrics"; });
  bool saw_start = false;
  for (const auto& e : of_type(msgs, "event")) saw_start = saw_start || e["kind"] == "fcy_start";
  EXPECT_TRUE(saw_start);
  int capped = 0;
  for (const auto& t : of_type(msgs, "telemetry")) {
    if (t["cap_active"].get<bool>()) {
      ++capped;
      EXPECT_GE(t["s"].get<double>(), 4200.0);  // the lap after the trigger
      EXPECT_LE(t["s"].get<double>(), 8400.0);
      EXPECT_LE(t["v"].get<double>(), 80.0 / 3.6 + 1e-6);
    }
  }
  EXPECT_GT(capped, 0);
  const auto metrics = of_type(msgs, "metrics");
  ASSERT_EQ(metrics.size(), 1u);
  EXPECT_TRUE(metrics[0]["completed"].get<bool>());
  EXPECT_TRUE(fs::exists(dir_ / "out" / "telemetry.csv"));
}

TEST_F(Serve, DriverOverrideMarksDriverCoasts) {
  ServeSession s(args(10));
  ASSERT_TRUE(s.connected());
  s.read(0.3);
  s.command({{"driver_override", {{"throttle", 0}}}});
  const auto msgs = s.read(0.6);
  const auto acks = of_type(msgs, "ack");
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0]["mode"], "external");
  const auto tel = of_type(msgs, "telemetry");
  ASSERT_FALSE(tel.empty());
  EXPECT_EQ(tel.back()["driver"], "external");
  EXPECT_TRUE(tel.back()["coasting"].get<bool>() || tel.back()["grip_limited"].get<bool>());
  EXPECT_TRUE(tel.back()["driver_coast"].get<bool>() || tel.back()["grip_limited"].get<bool>());

  s.command({{"driver_override", "auto"}});
  const auto back = of_type(s.read(0.4), "telemetry");
  ASSERT_FALSE(back.empty());
  EXPECT_EQ(back.back()["driver"], "automated");
  EXPECT_FALSE(back.back()["driver_coast"].get<bool>());
}

TEST_F(Serve, ResetRestartsTheStint) {
  ServeSession s(args(10));
  ASSERT_TRUE(s.connected());
  const auto before = of_type(s.read(0.6), "telemetry");
  ASSERT_FALSE(before.empty());
  s.command({{"reset", true}});
  const auto msgs = s.read(0.3);
  const auto tel = of_type(msgs, "telemetry");
  ASSERT_FALSE(tel.empty());
  EXPECT_LT(tel.back()["s"].get<double>(), before.back()["s"].get<double>());
}

}  // namespace
