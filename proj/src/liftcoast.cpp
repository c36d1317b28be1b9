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


#include "stintopt/liftcoast.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "stintopt/errors.hpp"

namespace stintopt {

void ThrottleMap::validate(const VehicleParams& p) const {
  if (!(P_full > 0.0) || P_full > p.P_max) {
    throw InputError("throttle map " + std::to_string(id) +
                     ": full-throttle power must lie in (0, P_max]");
  }
}

double throttle_force(const ThrottleMap& map, double u_th, double E_kin,
                      const VehicleParams& p) {
  if (u_th == 0.0) return 0.0;
  const double v = speed_of(E_kin, p);
  return u_th * std::min(p.F_m_max, map.P_full / v);
}

DriveStep drive_step(const VehicleState& state, const Derivative* prev,
                     double h, double h_prev, double envelope_next,
                     const GripState& grip, double grade, const ThrottleMap& map,
                     const VehicleParams& params,
                     const std::function<bool()>& coast) {
  DriveStep out;
  ControlInput full{throttle_force(map, 1.0, state.E_kin, params), 0.0, 1.0};
  Derivative f = derivatives(state, full, grip, params, grade);
  const Ab2Weights w = prev ? ab2_weights(h, h_prev) : Ab2Weights{};
  const double predicted =
      state.E_kin + h * (w.curr * f.E_kin - w.prev * (prev ? prev->E_kin : 0.0));

  if (predicted > envelope_next) {
    out.grip_limited = true;
    out.input = invert_for_bound(state, envelope_next, prev, h, params, grip,
                                 grade, h_prev);
    out.input.u_th = out.input.F_m > 0.0 ? out.input.F_m / full.F_m : 0.0;
    out.derivative = derivatives(state, out.input, grip, params, grade);
  } else if (coast && coast()) {
    out.coasting = true;
    out.input = {};
    out.derivative = derivatives(state, out.input, grip, params, grade);
  } else {
    out.input = full;
    out.derivative = f;
  }
  out.next = step_ab2(prev, out.derivative, state, h, h_prev);
  if (out.grip_limited) out.next.E_kin = envelope_next;  // remove round-off
  return out;
}

std::string ConstraintReport::first_violation() const {
  if (!completed) return failure;
  if (!battery_floor) return "battery energy floor";
  if (!terminal_energy) return "terminal battery energy";
  if (!motor_temperature) return "motor temperature";
  if (!battery_temperature) return "battery temperature";
  if (!terminal_temperature) return "terminal battery temperature";
  return "";
}

StintSimulator::StintSimulator(const TrackProfile& track,
                               const VehicleParams& params,
                               const GripSchedule& grip,
                               const StintBoundary& boundary,
                               const std::vector<double>& lambda_s,
                               const std::vector<double>& lambda,
                               SimulationOptions options)
    : params_(params), boundary_(boundary), options_(options) {
  boundary_.validate();
  if (lambda_s.empty() || lambda_s.size() != lambda.size()) {
    throw InputError("simulator: co-state positions and values differ in size");
  }
  grid_ = build_grid(track, boundary.s0, boundary.S_stint, GridMode::kSimulation);
  lambda_ = resample(lambda_s, lambda, grid_.nodes);
  envelope_ = driver_energy_limit(track, params, grip, boundary.s0,
                                  boundary.S_stint, grid_.nodes);
  grade_.reserve(grid_.size());
  grip_.reserve(grid_.size());
  for (double s : grid_.nodes) {
    grade_.push_back(track.grade_at(s));
    grip_.push_back(grip.at(s));
  }
}

double StintSimulator::lambda_min() const {
  return *std::min_element(lambda_.begin(), lambda_.end());
}

double StintSimulator::lambda_max() const {
  return *std::max_element(lambda_.begin(), lambda_.end());
}

StintResult StintSimulator::run(double lambda_c, const ThrottleMap& map) const {
  map.validate(params_);
  StintResult r;
  StintTrajectory& tr = r.trajectory;
  const std::size_t n = grid_.size();
  if (options_.record) {
    for (auto* v : {&tr.s, &tr.t, &tr.E_kin, &tr.E_b, &tr.theta_m, &tr.theta_b,
                    &tr.F_m, &tr.F_brake, &tr.u_th, &tr.lambda}) {
      v->reserve(n);
    }
  }
  const auto record = [&](const VehicleState& x, const DriveStep* d,
                          std::size_t k) {
    if (!options_.record) return;
    tr.s.push_back(x.s);
    tr.t.push_back(x.t);
    tr.E_kin.push_back(x.E_kin);
    tr.E_b.push_back(x.E_b);
    tr.theta_m.push_back(x.theta_m);
    tr.theta_b.push_back(x.theta_b);
    tr.lambda.push_back(lambda_[k]);
    tr.F_m.push_back(d ? d->input.F_m : 0.0);
    tr.F_brake.push_back(d ? d->input.F_brake : 0.0);
    tr.u_th.push_back(d ? d->input.u_th : 0.0);
    tr.coast.push_back(d ? d->coasting : 0);
    tr.grip_limited.push_back(d ? d->grip_limited : 0);
  };
  const auto check = [&](const VehicleState& x) {
    if (x.E_b < params_.E_b_min) r.report.battery_floor = false;
    if (x.theta_m > params_.theta_m_max) r.report.motor_temperature = false;
    if (x.theta_b > params_.theta_b_max) r.report.battery_temperature = false;
    r.max_theta_m = std::max(r.max_theta_m, x.theta_m);
    r.max_theta_b = std::max(r.max_theta_b, x.theta_b);
  };

  VehicleState x = boundary_.x0;
  x.s = grid_.front();
  check(x);
  Derivative prev;
  bool have_prev = false;
  double h_prev = 0.0;
  try {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double h = grid_.step(k);
      const auto wants_coast = [&] {
        if (lambda_[k] < lambda_c) return false;
        if (options_.v_coast_min &&
            speed_of(x.E_kin, params_) < *options_.v_coast_min) {
          return false;
        }
        return true;
      };
      const DriveStep d =
          drive_step(x, have_prev ? &prev : nullptr, h, h_prev, envelope_[k + 1],
                     grip_[k], grade_[k], map, params_, wants_coast);
      record(x, &d, k);
      r.flows = step_flows(have_prev ? &prev : nullptr, d.derivative, r.flows, h,
                           h_prev);
      x = d.next;
      x.s = grid_.nodes[k + 1];
      prev = d.derivative;
      have_prev = true;
      h_prev = h;
      check(x);
    }
  } catch (const StallError& e) {
    r.report.completed = false;
    r.report.failure = "stall";
    r.report.failure_s = e.position();
  } catch (const InfeasibleBrakingError& e) {
    r.report.completed = false;
    r.report.failure = "infeasible braking";
    r.report.failure_s = e.position();
  }
  if (r.report.completed) {
    record(x, nullptr, n - 1);
    if (x.E_b < boundary_.E_b_target) r.report.terminal_energy = false;
    if (x.theta_b > boundary_.theta_b_target) r.report.terminal_temperature = false;
  }
  r.final_state = x;
  r.t_stint = x.t - boundary_.x0.t;
  return r;
}

StintResult simulate_stint(double lambda_c, const ThrottleMap& map,
                           const StintBoundary& boundary, const TrackProfile& track,
                           const VehicleParams& params, const GripSchedule& grip,
                           const std::vector<double>& lambda_s,
                           const std::vector<double>& lambda,
                           SimulationOptions options) {
  return StintSimulator(track, params, grip, boundary, lambda_s, lambda, options)
      .run(lambda_c, map);
}

Verdict verdict_of(const StintResult& r) {
  if (r.constraints_ok()) return Verdict::kFeasible;
  if (!r.report.completed && r.report.failure == "stall") return Verdict::kStalled;
  return Verdict::kInfeasible;
}

BisectionResult bisect_threshold(const std::function<Verdict(double)>& trial,
                                 double lo, double hi, double tol) {
  if (!(lo <= hi) || !(tol > 0.0)) {
    throw InputError("bisection: need lo <= hi and tol > 0");
  }
  BisectionResult r;
  ++r.evaluations;
  if (trial(hi) == Verdict::kFeasible) {
    r.lambda_star = hi;
    r.feasible = true;
    return r;
  }
  double l = lo, u = hi;
  while (u - l > tol) {
    const double c = 0.5 * (l + u);
    ++r.iterations;
    ++r.evaluations;
    switch (trial(c)) {
      case Verdict::kFeasible:
        r.feasible = true;
        l = c;
        break;
      case Verdict::kStalled:
        l = c;
        break;
      case Verdict::kInfeasible:
        u = c;
        break;
    }
  }
  if (!r.feasible && l == lo) {
    ++r.evaluations;
    r.feasible = trial(lo) == Verdict::kFeasible;
  }
  r.lambda_star = l;
  if (r.feasible) r.witness_infeasible = l + tol;
  return r;
}

BisectionResult bisect_threshold(const std::function<bool(double)>& feasible,
                                 double lo, double hi, double tol) {
  return bisect_threshold(
      [&](double c) { return feasible(c) ? Verdict::kFeasible : Verdict::kInfeasible; },
      lo, hi, tol);
}

const MapPlan& CoastPlan::best() const {
  const MapPlan* best = nullptr;
  for (const auto& m : maps) {
    if (m.feasible && (!best || m.cost < best->cost)) best = &m;
  }
  if (!best) {
    throw InfeasibleProblemError("throttle maps", "no feasible throttle map");
  }
  return *best;
}

namespace {

double bisection_tolerance(const StintSimulator& sim, double relative) {
  const double width = sim.lambda_max() - sim.lambda_min();
  // A flat co-state still needs a positive tolerance.
  return relative * std::max(width, 1e-12);
}

}  // namespace

CoastPlan solve_problem2(const std::vector<double>& lambda_s,
                         const std::vector<double>& lambda, double t_convex,
                         const std::vector<ThrottleMap>& maps,
                         const StintBoundary& boundary, const TrackProfile& track,
                         const VehicleParams& params, const GripSchedule& grip,
                         const AdaptOptions& options) {
  if (maps.empty()) throw InputError("at least one throttle map is required");
  SimulationOptions sim_options = options.simulation;
  sim_options.record = false;
  const StintSimulator sim(track, params, grip, boundary, lambda_s, lambda,
                           sim_options);
  CoastPlan out;
  out.s0 = boundary.s0;
  out.S_stint = boundary.S_stint;
  out.s = sim.grid().nodes;
  out.lambda_kin = sim.lambda();
  out.t_convex = t_convex;
  const double lo = sim.lambda_min();
  const double hi = sim.lambda_max();
  const double tol = bisection_tolerance(sim, options.relative_tolerance);
  for (const auto& map : maps) {
    map.validate(params);
    const auto start = std::chrono::steady_clock::now();
    const BisectionResult b = bisect_threshold(
        [&](double c) { return verdict_of(sim.run(c, map)); }, lo, hi, tol);
    MapPlan mp;
    mp.map = map;
    mp.lambda_star = b.lambda_star;
    mp.feasible = b.feasible;
    mp.evaluations = b.evaluations;
    mp.iterations = b.iterations;
    mp.witness_infeasible = b.witness_infeasible;
    if (b.feasible) {
      ++mp.evaluations;
      mp.cost = sim.run(b.lambda_star, map).t_stint;
    }
    mp.seconds = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start).count();
    out.maps.push_back(mp);
  }
  bool any = false;
  for (const auto& m : out.maps) any = any || m.feasible;
  if (!any) {
    throw InfeasibleProblemError(
        "throttle maps",
        "no throttle map meets the stint targets even when coasting wherever "
        "possible; relax the terminal battery energy or temperature target");
  }
  return out;
}

CoastPlan solve_problem2(const PlanSolution& plan, const std::vector<ThrottleMap>& maps,
                         const StintBoundary& boundary, const TrackProfile& track,
                         const VehicleParams& params, const GripSchedule& grip,
                         const AdaptOptions& options) {
  return solve_problem2(plan.grid.nodes, robustify_costate(plan), plan.t_pred, maps,
                        boundary, track, params, grip, options);
}

bool verify_witnesses(const CoastPlan& plan, const StintBoundary& boundary,
                      const TrackProfile& track, const VehicleParams& params,
                      const GripSchedule& grip, const SimulationOptions& options) {
  SimulationOptions o = options;
  o.record = false;
  const StintSimulator sim(track, params, grip, boundary, plan.s, plan.lambda_kin, o);
  for (const auto& m : plan.maps) {
    if (!m.feasible) continue;
    if (!sim.run(m.lambda_star, m.map).constraints_ok()) return false;
    if (m.witness_infeasible &&
        sim.run(*m.witness_infeasible, m.map).constraints_ok()) {
      return false;
    }
  }
  return true;
}

nlohmann::json to_json(const CoastPlan& plan) {
  nlohmann::json maps = nlohmann::json::array();
  for (const auto& m : plan.maps) {
    nlohmann::json j{{"id", m.map.id},
                     {"P_full", m.map.P_full},
                     {"lambda_star", m.lambda_star},
                     {"cost", m.cost},
                     {"feasible", m.feasible},
                     {"evaluations", m.evaluations},
                     {"iterations", m.iterations}};
    j["witness_infeasible"] = m.witness_infeasible
                                  ? nlohmann::json(*m.witness_infeasible)
                                  : nlohmann::json(nullptr);
    maps.push_back(std::move(j));
  }
  return {{"s0", plan.s0},         {"S_stint", plan.S_stint},
          {"s", plan.s},           {"lambda_kin", plan.lambda_kin},
          {"t_convex", plan.t_convex}, {"maps", maps}};
}

CoastPlan coast_plan_from_json(const nlohmann::json& j) {
  try {
    CoastPlan p;
    p.s0 = j.at("s0").get<double>();
    p.S_stint = j.at("S_stint").get<double>();
    p.s = j.at("s").get<std::vector<double>>();
    p.lambda_kin = j.at("lambda_kin").get<std::vector<double>>();
    p.t_convex = j.at("t_convex").get<double>();
    if (p.s.size() != p.lambda_kin.size()) {
      throw InputError("coast plan: s and lambda_kin differ in length");
    }
    for (const auto& m : j.at("maps")) {
      MapPlan mp;
      mp.map.id = m.at("id").get<int>();
      mp.map.P_full = m.at("P_full").get<double>();
      mp.lambda_star = m.at("lambda_star").get<double>();
      mp.cost = m.at("cost").get<double>();
      mp.feasible = m.at("feasible").get<bool>();
      mp.evaluations = m.value("evaluations", 0);
      mp.iterations = m.value("iterations", 0);
      if (m.contains("witness_infeasible") && !m["witness_infeasible"].is_null()) {
        mp.witness_infeasible = m["witness_infeasible"].get<double>();
      }
      p.maps.push_back(mp);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("coast plan JSON: ") + e.what());
  }
}

}  // namespace stintopt
