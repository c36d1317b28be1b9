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


#include "stintopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "stintopt/errors.hpp"

namespace stintopt {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

const ThrottleMap& find_map(const std::vector<ThrottleMap>& maps, int id) {
  for (const auto& m : maps) {
    if (m.id == id) return m;
  }
  throw InputError("throttle map " + std::to_string(id) + " is not configured");
}

bool covers(const Disturbance& d, double s) { return s >= d.s_start && s < d.s_end; }

}  // namespace

// ---------------------------------------------------------------------------
// Scenarios

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kNone: return "None";
    case ScenarioKind::kDrafting: return "Drafting";
    case ScenarioKind::kTireDegradation: return "TireDegradation";
    case ScenarioKind::kFullCourseYellow: return "FullCourseYellow";
    case ScenarioKind::kComposite: return "Composite";
  }
  return "None";
}

ScenarioKind parse_scenario(std::string_view name) {
  if (name == "None" || name == "none") return ScenarioKind::kNone;
  if (name == "Drafting" || name == "drafting") return ScenarioKind::kDrafting;
  if (name == "TireDegradation" || name == "degradation") {
    return ScenarioKind::kTireDegradation;
  }
  if (name == "FullCourseYellow" || name == "fcy") return ScenarioKind::kFullCourseYellow;
  throw InputError("unknown scenario '" + std::string(name) + "'");
}

DisturbanceScenario DisturbanceScenario::named(ScenarioKind kind, double s0,
                                               double S_stint, double lap_length,
                                               int fcy_lap) {
  if (!(S_stint > s0)) throw InputError("scenario needs a non-empty stint");
  DisturbanceScenario sc;
  sc.kind = kind;
  using K = Disturbance::Kind;
  switch (kind) {
    case ScenarioKind::kNone:
      break;
    case ScenarioKind::kDrafting:
      sc.disturbances.push_back({K::kDrafting, s0, S_stint, 0.9});
      break;
    case ScenarioKind::kTireDegradation:
      sc.disturbances.push_back({K::kTireDegradation, s0, S_stint, 0.9});
      break;
    case ScenarioKind::kFullCourseYellow: {
      if (!(lap_length > 0.0) || fcy_lap < 1) {
        throw InputError("full-course yellow needs a lap length and a lap >= 1");
      }
      const double a = std::max(s0, (fcy_lap - 1) * lap_length);
      const double b = std::min(S_stint, fcy_lap * lap_length);
      if (!(b > a)) throw InputError("full-course-yellow lap lies outside the stint");
      sc.disturbances.push_back({K::kSpeedCap, a, b, kFcyCap});
      break;
    }
    case ScenarioKind::kComposite:
      throw InputError("composite scenarios are built from parts");
  }
  return sc;
}

DisturbanceScenario DisturbanceScenario::composite(std::vector<DisturbanceScenario> parts) {
  DisturbanceScenario sc;
  sc.kind = parts.size() == 1 ? parts.front().kind : ScenarioKind::kComposite;
  for (auto& p : parts) {
    sc.disturbances.insert(sc.disturbances.end(), p.disturbances.begin(),
                           p.disturbances.end());
  }
  return sc;
}

GripSchedule DisturbanceScenario::plant() const {
  GripSchedule g;
  for (const auto& d : disturbances) {
    if (!(d.s_end > d.s_start)) continue;
    switch (d.kind) {
      case Disturbance::Kind::kDrafting:
        g.with_aero_window({d.s_start, d.s_end, d.value});
        break;
      case Disturbance::Kind::kTireDegradation: {
        // One ramp at a time: a later one starts from the grip reached so far.
        const double from = g.at(d.s_start).mu_scale;
        g.with_mu_ramp({d.s_start, d.s_end, from, d.value});
        break;
      }
      case Disturbance::Kind::kSpeedCap:
        g.with_cap_window({d.s_start, d.s_end, d.value});
        break;
    }
  }
  return g;
}

GripSchedule DisturbanceScenario::knowledge(double s) const {
  const GripSchedule truth = plant();
  GripState base;
  base.mu_scale = truth.at(s).mu_scale;
  GripSchedule k(base);
  for (const auto& d : disturbances) {
    if (!covers(d, s)) continue;
    if (d.kind == Disturbance::Kind::kDrafting) {
      k.with_aero_window({s, d.s_end, d.value});
    } else if (d.kind == Disturbance::Kind::kSpeedCap) {
      k.with_cap_window({s, d.s_end, d.value});
    }
  }
  return k;
}

bool DisturbanceScenario::cap_active(double s) const {
  return std::any_of(disturbances.begin(), disturbances.end(), [&](const auto& d) {
    return d.kind == Disturbance::Kind::kSpeedCap && covers(d, s);
  });
}

void DriverModel::validate() const {
  if (!(reaction_delay >= 0.0)) throw InputError("reaction delay must be >= 0");
}

nlohmann::json to_json(const Event& e) {
  return {{"type", "event"}, {"kind", e.kind}, {"s", e.s}, {"t", e.t},
          {"detail", e.detail}};
}

// ---------------------------------------------------------------------------
// Closed loop

ClosedLoop::ClosedLoop(const StintSetup& setup, ControllerConfig config,
                       DisturbanceScenario scenario, DriverModel driver,
                       std::shared_ptr<const PlanSnapshot> initial, Planner planner)
    : setup_(setup),
      scenario_(std::move(scenario)),
      driver_(driver),
      planner_(planner) {
  driver_.validate();
  config.validate();
  setup_.boundary.validate();
  if (!initial) throw InputError("closed loop needs an initial plan");
  map_ = find_map(setup_.maps, config.active_map);
  grid_ = build_grid(setup_.track, setup_.boundary.s0, setup_.boundary.S_stint,
                     GridMode::kSimulation);
  rebuild_envelope();
  controller_ = std::make_unique<Controller>(config, std::move(initial),
                                             setup_.boundary, setup_.params);
  x_ = setup_.boundary.x0;
  x_.s = grid_.front();
  next_request_t_ = x_.t + config.mpc_period;
  log_.variant = to_string(config.variant);
  log_.scenario = scenario_.name();
  log_.rows.reserve(grid_.size());
  cap_was_active_ = scenario_.cap_active(x_.s);
  if (cap_was_active_) event("fcy_start");
}

ClosedLoop::~ClosedLoop() {
  if (worker_.joinable()) worker_.join();
}

void ClosedLoop::rebuild_envelope() {
  plant_ = scenario_.plant();
  envelope_ = driver_energy_limit(setup_.track, setup_.params, plant_, grid_.front(),
                                  grid_.back(), grid_.nodes);
  grade_.resize(grid_.size());
  grip_.resize(grid_.size());
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    grade_[k] = setup_.track.grade_at(grid_.nodes[k]);
    grip_[k] = plant_.at(grid_.nodes[k]);
  }
}

void ClosedLoop::event(std::string kind, std::string detail) {
  log_.events.push_back({std::move(kind), x_.s, x_.t, std::move(detail)});
}

void ClosedLoop::fail(const std::string& what) {
  log_.metrics.completed = false;
  log_.metrics.failure = what;
  finished_ = true;
  event("violation", what);
}

PlanRequest ClosedLoop::make_request() const {
  const ControllerConfig& c = controller_->config();
  PlanRequest r;
  r.variant = c.variant;
  r.measured = x_;
  r.boundary = setup_.boundary;
  r.track = &setup_.track;
  r.params = setup_.params;
  // Only a full re-solve learns about disturbances; the fixed co-state
  // variant keeps bisecting on the nominal model.
  if (c.variant == Variant::kFullyOnline) r.knowledge = scenario_.knowledge(x_.s);
  r.maps = setup_.maps;
  r.active_map = c.active_map;
  r.v_coast_min = c.v_coast_min;
  r.previous = controller_->plan_ptr();
  r.sequence = sequence_ + 1;
  return r;
}

void ClosedLoop::collect_worker(bool wait) {
  if (!worker_.joinable()) return;
  {
    std::lock_guard<std::mutex> lock(slot_->mutex);
    if (!slot_->done && !wait) return;
  }
  worker_.join();
  if (slot_->plan) {
    const double latency = controller_->config().mpc_latency;
    queue_.push_back({std::max(slot_->request_t + latency, x_.t), slot_->plan});
  } else {
    ++log_.metrics.failed_updates;
    event("plan_failed", slot_->error);
  }
  slot_.reset();
}

void ClosedLoop::launch_plan() {
  PlanRequest req = make_request();
  ++sequence_;
  const double latency = controller_->config().mpc_latency;
  if (planner_ == Planner::kLogical) {
    try {
      queue_.push_back({x_.t + latency, mpc_update(req)});
    } catch (const StintError& e) {
      ++log_.metrics.failed_updates;
      event("plan_failed", e.what());
    }
    return;
  }
  slot_ = std::make_shared<WorkerSlot>();
  slot_->request_t = x_.t;
  worker_ = std::thread([slot = slot_, req = std::move(req)] {
    std::shared_ptr<const PlanSnapshot> plan;
    std::string error;
    try {
      plan = mpc_update(req);
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard<std::mutex> lock(slot->mutex);
    slot->plan = std::move(plan);
    slot->error = std::move(error);
    slot->done = true;
  });
}

void ClosedLoop::schedule_plans() {
  collect_worker(false);
  for (auto it = queue_.begin(); it != queue_.end();) {
    if (it->deliver_t <= x_.t) {
      controller_->post(it->plan);
      it = queue_.erase(it);
    } else {
      ++it;
    }
  }
  const ControllerConfig& c = controller_->config();
  if (x_.t < next_request_t_) return;
  next_request_t_ = x_.t + c.mpc_period;
  if (c.variant == Variant::kFixedCostateAndThreshold) return;
  if (grid_.back() - x_.s < c.min_horizon) return;
  if (worker_.joinable()) return;  // previous request still running
  launch_plan();
}

const TelemetryRow& ClosedLoop::step() {
  if (finished_) throw InputError("stint already finished");
  schedule_plans();

  const bool cap = scenario_.cap_active(x_.s);
  if (cap != cap_was_active_) {
    event(cap ? "fcy_start" : "fcy_end");
    cap_was_active_ = cap;
  }
  const int adopted = controller_->plans_adopted();
  const Feedback& fb = controller_->observe(x_, cap);
  if (controller_->plans_adopted() != adopted) {
    event("plan_updated", "sequence " + std::to_string(controller_->plan().sequence));
  }

  bool coast_cmd = controller_->decide(x_, false);
  const bool external = driver_.mode == DriverModel::Mode::kExternal;
  if (!external) {
    const auto lag = static_cast<std::size_t>(
        std::llround(driver_.reaction_delay / kSimulationStep));
    delayed_.push_back(coast_cmd);
    while (delayed_.size() > lag + 1) delayed_.pop_front();
    coast_cmd = delayed_.size() == lag + 1 ? delayed_.front() : false;
  } else {
    coast_cmd = !external_throttle_.value_or(true);
  }

  const std::size_t k = k_;
  const double h = grid_.step(k);
  TelemetryRow row;
  row.s = x_.s;
  row.t = x_.t;
  row.E_kin = x_.E_kin;
  row.E_b = x_.E_b;
  row.theta_m = x_.theta_m;
  row.theta_b = x_.theta_b;
  row.lambda_kin = fb.lambda_at_s;
  row.lambda_adj = fb.lambda_adj;
  row.error = fb.error;
  row.cap_active = cap;

  DriveStep d;
  try {
    d = drive_step(x_, have_prev_ ? &prev_ : nullptr, h, h_prev_, envelope_[k + 1],
                   grip_[k], grade_[k], map_, setup_.params, [&] { return coast_cmd; });
  } catch (const StallError& e) {
    log_.rows.push_back(row);
    fail("stall at s=" + num(e.position()));
    return log_.rows.back();
  } catch (const InfeasibleBrakingError& e) {
    log_.rows.push_back(row);
    fail("infeasible braking at s=" + num(e.position()));
    return log_.rows.back();
  }
  row.F_m = d.input.F_m;
  row.F_brake = d.input.F_brake;
  row.u_th = d.input.u_th;
  row.grip_limited = d.grip_limited;
  row.coasting = d.coasting;
  row.coast_signal = controller_->decide(x_, d.grip_limited);
  row.driver_coast = external && d.coasting;
  log_.rows.push_back(row);

  log_.flows = step_flows(have_prev_ ? &prev_ : nullptr, d.derivative, log_.flows, h,
                          h_prev_);
  x_ = d.next;
  x_.s = grid_.nodes[k + 1];
  prev_ = d.derivative;
  have_prev_ = true;
  h_prev_ = h;
  ++k_;

  if (x_.E_b < setup_.params.E_b_min) {
    TelemetryRow last{};
    last.s = x_.s, last.t = x_.t, last.E_kin = x_.E_kin, last.E_b = x_.E_b;
    last.theta_m = x_.theta_m, last.theta_b = x_.theta_b;
    log_.rows.push_back(last);
    fail("battery depleted at s=" + num(x_.s));
    return log_.rows[log_.rows.size() - 2];
  }
  if (k_ + 1 == grid_.size()) {
    TelemetryRow last{};
    last.s = x_.s, last.t = x_.t, last.E_kin = x_.E_kin, last.E_b = x_.E_b;
    last.theta_m = x_.theta_m, last.theta_b = x_.theta_b;
    last.lambda_kin = controller_->plan().lambda_at(x_.s);
    last.lambda_adj = fb.lambda_adj;
    last.cap_active = scenario_.cap_active(x_.s);
    log_.rows.push_back(last);
    finished_ = true;
    event("stint_end");
    return log_.rows[log_.rows.size() - 2];
  }
  return log_.rows.back();
}

void ClosedLoop::run() {
  while (!finished_) step();
}

void ClosedLoop::trigger(ScenarioKind kind) {
  const double s = x_.s;
  const double S = grid_.back();
  using K = Disturbance::Kind;
  auto& ds = scenario_.disturbances;
  switch (kind) {
    case ScenarioKind::kNone:
      for (auto& d : ds) {
        if (d.s_end > s) d.s_end = std::max(d.s_start, s);
      }
      break;
    case ScenarioKind::kDrafting:
      if (S > s) ds.push_back({K::kDrafting, s, S, 0.9});
      break;
    case ScenarioKind::kTireDegradation:
      if (S > s) ds.push_back({K::kTireDegradation, s, S, 0.9 * plant_.at(s).mu_scale});
      break;
    case ScenarioKind::kFullCourseYellow: {
      // The caution starts at the next lap boundary so the car can slow down.
      const double lap = setup_.lap_length > 0.0 ? setup_.lap_length : setup_.track.s_lap();
      const double a = (std::floor(s / lap + 1e-9) + 1.0) * lap;
      if (S > a) ds.push_back({K::kSpeedCap, a, std::min(S, a + lap), kFcyCap});
      break;
    }
    case ScenarioKind::kComposite:
      throw InputError("trigger one disturbance at a time");
  }
  if (scenario_.kind != kind) {
    scenario_.kind = scenario_.kind == ScenarioKind::kNone ? kind : ScenarioKind::kComposite;
  }
  rebuild_envelope();
  event("disturbance", to_string(kind));
}

void ClosedLoop::set_variant(Variant v) {
  ControllerConfig c = controller_->config();
  c.variant = v;
  controller_->set_config(c);
  log_.variant = to_string(v);
  event("variant", to_string(v));
}

void ClosedLoop::set_map(int id) {
  map_ = find_map(setup_.maps, id);
  ControllerConfig c = controller_->config();
  c.active_map = id;
  controller_->set_config(c);
  event("map", std::to_string(id));
}

void ClosedLoop::set_driver_throttle(std::optional<bool> throttle) {
  external_throttle_ = throttle;
  driver_.mode = throttle ? DriverModel::Mode::kExternal : DriverModel::Mode::kAutomated;
  delayed_.clear();
}

std::vector<Event> ClosedLoop::drain_events() {
  std::vector<Event> out(log_.events.begin() + static_cast<std::ptrdiff_t>(events_read_),
                         log_.events.end());
  events_read_ = log_.events.size();
  return out;
}

StintLog ClosedLoop::finish() {
  collect_worker(true);
  log_.metrics.plan_updates = controller_->plans_adopted();
  summarize(log_, setup_);
  return std::move(log_);
}

// ---------------------------------------------------------------------------
// Metrics

void summarize(StintLog& log, const StintSetup& setup) {
  const auto& p = setup.params;
  const auto& b = setup.boundary;
  StintMetrics& m = log.metrics;
  log.laps.clear();
  m.violations.clear();
  if (log.rows.empty()) return;
  const double lap = setup.lap_length > 0.0 ? setup.lap_length : setup.track.s_lap();

  const auto lap_of = [&](double s) { return static_cast<int>(std::floor(s / lap + 1e-9)); };
  bool battery_floor = true, motor = true, battery = true;
  m.max_theta_m = -std::numeric_limits<double>::infinity();
  m.max_theta_b = m.max_theta_m;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const TelemetryRow& r = log.rows[i];
    const int L = lap_of(r.s);
    // the final node belongs to the lap it closes
    const int idx = (i + 1 == log.rows.size() && !log.laps.empty()) ? log.laps.back().lap : L;
    if (log.laps.empty() || log.laps.back().lap != idx) {
      LapSummary ls;
      ls.lap = idx;
      ls.t_lap = r.t;  // start time, turned into a duration below
      ls.E_b_used = r.E_b;
      ls.max_theta_m = r.theta_m;
      ls.max_theta_b = r.theta_b;
      log.laps.push_back(ls);
    }
    LapSummary& ls = log.laps.back();
    ls.max_theta_m = std::max(ls.max_theta_m, r.theta_m);
    ls.max_theta_b = std::max(ls.max_theta_b, r.theta_b);
    const bool onset = r.coasting && (i == 0 || !log.rows[i - 1].coasting);
    if (onset) ls.coast_onsets.push_back(r.s - idx * lap);
    m.max_theta_m = std::max(m.max_theta_m, r.theta_m);
    m.max_theta_b = std::max(m.max_theta_b, r.theta_b);
    if (r.E_b < p.E_b_min) battery_floor = false;
    if (r.theta_m > p.theta_m_max) motor = false;
    if (r.theta_b > p.theta_b_max) battery = false;
  }
  // Laps hold start time and energy so far; lap j+1 is still unmodified
  // when lap j reads it.
  for (std::size_t j = 0; j < log.laps.size(); ++j) {
    const bool last = j + 1 == log.laps.size();
    const double t_end = last ? log.rows.back().t : log.laps[j + 1].t_lap;
    const double E_end = last ? log.rows.back().E_b : log.laps[j + 1].E_b_used;
    log.laps[j].t_lap = t_end - log.laps[j].t_lap;
    log.laps[j].E_b_used = log.laps[j].E_b_used - E_end;
  }

  const TelemetryRow& end = log.rows.back();
  m.t_stint = end.t - b.x0.t;
  m.terminal_E_b = end.E_b;
  m.terminal_E_b_error = (end.E_b - b.E_b_target) / p.E_b_max;
  m.terminal_theta_b = end.theta_b;
  if (!battery_floor) m.violations.push_back("battery energy floor");
  if (!motor) m.violations.push_back("motor temperature");
  if (!battery) m.violations.push_back("battery temperature");
  if (m.completed) {
    if (end.E_b < b.E_b_target) m.violations.push_back("terminal battery energy");
    if (end.theta_b > b.theta_b_target) m.violations.push_back("terminal battery temperature");
  } else {
    m.violations.push_back(m.failure);
  }

  const double used = b.x0.E_b - end.E_b;
  const double booked = log.flows.wheel + log.flows.motor_loss + log.flows.battery_loss +
                        log.flows.aux;
  m.audit_residual = std::abs(used - booked) / std::max(std::abs(used), 1.0);
}

void write_telemetry_csv(const StintLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "s,t,E_kin,E_b,theta_m,theta_b,F_m,F_brake,u_th,lambda_kin,lambda_adj,"
         "error,coast_signal,coasting,grip_limited,cap_active,driver_coast\n";
  for (const auto& r : log.rows) {
    out << num(r.s) << ',' << num(r.t) << ',' << num(r.E_kin) << ',' << num(r.E_b) << ','
        << num(r.theta_m) << ',' << num(r.theta_b) << ',' << num(r.F_m) << ','
        << num(r.F_brake) << ',' << num(r.u_th) << ',' << num(r.lambda_kin) << ','
        << num(r.lambda_adj) << ',' << num(r.error) << ',' << r.coast_signal << ','
        << r.coasting << ',' << r.grip_limited << ',' << r.cap_active << ','
        << r.driver_coast << '\n';
  }
}

nlohmann::json metrics_json(const StintLog& log) {
  const StintMetrics& m = log.metrics;
  nlohmann::json laps = nlohmann::json::array();
  for (const auto& l : log.laps) {
    laps.push_back({{"lap", l.lap}, {"t_lap", l.t_lap}, {"E_b_used", l.E_b_used},
                    {"max_theta_m", l.max_theta_m}, {"max_theta_b", l.max_theta_b},
                    {"coast_onsets", l.coast_onsets}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : log.events) events.push_back(to_json(e));
  nlohmann::json j = {
      {"variant", log.variant},
      {"scenario", log.scenario},
      {"completed", m.completed},
      {"failure", m.failure},
      {"t_stint", m.t_stint},
      {"terminal_E_b", m.terminal_E_b},
      {"terminal_E_b_error", m.terminal_E_b_error},
      {"terminal_theta_b", m.terminal_theta_b},
      {"max_theta_m", m.max_theta_m},
      {"max_theta_b", m.max_theta_b},
      {"violations", m.violations},
      {"audit_residual", m.audit_residual},
      {"plan_updates", m.plan_updates},
      {"failed_updates", m.failed_updates},
      {"energy_flows",
       {{"wheel", log.flows.wheel},
        {"motor_loss", log.flows.motor_loss},
        {"battery_loss", log.flows.battery_loss},
        {"aux", log.flows.aux}}},
      {"laps", laps},
      {"events", events},
  };
  j["time_loss_pct"] = m.time_loss_pct ? nlohmann::json(*m.time_loss_pct) : nlohmann::json();
  return j;
}

// ---------------------------------------------------------------------------
// Batch runs

StintLog run_closed_loop(const ControllerConfig& config, const DisturbanceScenario& scenario,
                         const StintSetup& setup, const DriverModel& driver,
                         std::shared_ptr<const PlanSnapshot> initial) {
  if (!initial) {
    initial = initial_plan(setup.boundary, setup.track, setup.params, GripSchedule{},
                           setup.maps, config);
  }
  ClosedLoop loop(setup, config, scenario, driver, std::move(initial));
  loop.run();
  return loop.finish();
}

OracleResult oracle_solve(const DisturbanceScenario& scenario, const StintSetup& setup,
                          const ControllerConfig& config) {
  OracleResult r;
  const GripSchedule truth = scenario.plant();
  r.plan = solve_plan(setup.track, setup.params, truth, setup.boundary);
  AdaptOptions opt;
  opt.simulation.v_coast_min = config.v_coast_min;
  r.coast = solve_problem2(r.plan, {find_map(setup.maps, config.active_map)},
                           setup.boundary, setup.track, setup.params, truth, opt);
  r.t_oracle = r.coast.maps.front().cost;
  r.E_kin_max = max_kinetic_energy(setup.track, setup.params, truth, r.plan.grid.nodes);
  return r;
}

std::vector<ComparisonRow> compare_variants(const std::vector<ScenarioKind>& scenarios,
                                            const std::vector<Variant>& variants,
                                            const StintSetup& setup,
                                            const ControllerConfig& base) {
  const auto& b = setup.boundary;
  const auto initial = initial_plan(b, setup.track, setup.params, GripSchedule{},
                                    setup.maps, base);
  std::vector<ComparisonRow> rows;
  for (ScenarioKind kind : scenarios) {
    const auto sc = DisturbanceScenario::named(kind, b.s0, b.S_stint, setup.lap_length);
    const OracleResult oracle = oracle_solve(sc, setup, base);
    for (Variant v : variants) {
      ControllerConfig c = base;
      c.variant = v;
      const StintLog log = run_closed_loop(c, sc, setup, {}, initial);
      const StintMetrics& m = log.metrics;
      ComparisonRow row;
      row.scenario = to_string(kind);
      row.variant = to_string(v);
      row.t_stint = m.t_stint;
      row.t_oracle = oracle.t_oracle;
      row.loss_pct = 100.0 * (m.t_stint - oracle.t_oracle) / oracle.t_oracle;
      row.terminal_Eb_err = m.terminal_E_b_error;
      row.max_theta_m = m.max_theta_m;
      row.max_theta_b = m.max_theta_b;
      row.completed = m.completed;
      row.failure = m.failure;
      row.energy_ok = m.completed && m.terminal_E_b_error >= -0.005 &&
                      std::find(m.violations.begin(), m.violations.end(),
                                "battery energy floor") == m.violations.end();
      row.thermal_ok = m.completed && m.max_theta_m <= setup.params.theta_m_max &&
                       m.max_theta_b <= setup.params.theta_b_max &&
                       m.terminal_theta_b <= b.theta_b_target;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scenario,variant,t_stint,t_oracle,loss_pct,terminal_Eb_err,max_theta_m,"
         "max_theta_b,energy_ok,thermal_ok,completed,failure\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.variant << ',' << num(r.t_stint) << ','
        << num(r.t_oracle) << ',' << num(r.loss_pct) << ',' << num(r.terminal_Eb_err)
        << ',' << num(r.max_theta_m) << ',' << num(r.max_theta_b) << ',' << r.energy_ok
        << ',' << r.thermal_ok << ',' << r.completed << ",\"" << r.failure << "\"\n";
  }
}

// ---------------------------------------------------------------------------
// Strategy sweep

double ChargeModel::E_b_target(double t_charge, const VehicleParams& p) const {
  if (!(t_charge >= 0.0)) throw InputError("charge time must be >= 0");
  return std::max(p.E_b_min, p.E_b_max - P_charge * t_charge);
}

double ChargeModel::theta_b_target(double t_charge, const VehicleParams& p) const {
  const double charged = p.E_b_max - E_b_target(t_charge, p);
  return p.theta_b_max - q_charge * charged / p.C_b;
}

std::vector<SweepRow> sweep_strategy(const std::vector<int>& laps,
                                     const std::vector<double>& charge_times,
                                     const ChargeModel& charge, const StintSetup& setup) {
  const double lap = setup.lap_length > 0.0 ? setup.lap_length : setup.track.s_lap();
  std::vector<SweepRow> rows;
  for (int n : laps) {
    if (n < 1) throw InputError("lap count must be >= 1");
    const std::size_t first = rows.size();
    for (double tc : charge_times) {
      SweepRow row;
      row.n_laps = n;
      row.t_charge = tc;
      row.E_b_target = charge.E_b_target(tc, setup.params);
      row.theta_b_target = charge.theta_b_target(tc, setup.params);
      row.capacity_limited = row.E_b_target <= setup.params.E_b_min;
      StintBoundary b = setup.boundary;
      b.S_stint = b.s0 + n * lap;
      b.E_b_target = row.E_b_target;
      b.theta_b_target = row.theta_b_target;
      try {
        const PlanSolution plan =
            solve_plan(setup.track, setup.params, GripSchedule{}, b);
        const CoastPlan cp = solve_problem2(plan, setup.maps, b, setup.track,
                                            setup.params, GripSchedule{});
        row.feasible = true;
        row.t_stint = cp.best().cost;
        row.average = (row.t_stint + tc + charge.pit_loss) / n;
      } catch (const StintError&) {
        row.feasible = false;
      }
      rows.push_back(row);
    }
    std::size_t best = rows.size();
    for (std::size_t i = first; i < rows.size(); ++i) {
      if (rows[i].feasible && (best == rows.size() || rows[i].average < rows[best].average)) {
        best = i;
      }
    }
    if (best < rows.size()) rows[best].optimal = true;
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "n_laps,t_charge,E_b_target,theta_b_target,feasible,t_stint,average,optimal,"
         "capacity_limited\n";
  for (const auto& r : rows) {
    out << r.n_laps << ',' << num(r.t_charge) << ',' << num(r.E_b_target) << ','
        << num(r.theta_b_target) << ',' << r.feasible << ','
        << (r.feasible ? num(r.t_stint) : "") << ','
        << (r.feasible ? num(r.average) : "") << ',' << r.optimal << ','
        << r.capacity_limited << '\n';
  }
}

}  // namespace stintopt
