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


#include "stintopt/controller.hpp"

#include <algorithm>
#include <cmath>

#include "stintopt/errors.hpp"

namespace stintopt {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFullyOnline: return "FullyOnline";
    case Variant::kFixedCostate: return "FixedCostate";
    case Variant::kFixedCostateAndThreshold: return "FixedCostateAndThreshold";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kFullyOnline, Variant::kFixedCostate,
                    Variant::kFixedCostateAndThreshold}) {
    if (name == to_string(v)) return v;
  }
  throw InputError("unknown controller variant '" + std::string(name) + "'");
}

void ControllerConfig::validate() const {
  if (K_p < 0.0 || K_i < 0.0) throw InputError("feedback gains must be >= 0");
  if (!(delta_s_window > 0.0)) throw InputError("energy-rate window must be > 0");
  if (!(mpc_latency >= 0.0) || !(mpc_period > mpc_latency)) {
    throw InputError("mpc_period must exceed the solve latency");
  }
  if (v_coast_min && !(*v_coast_min > 0.0)) {
    throw InputError("v_coast_min must be positive");
  }
  if (!(min_horizon >= 0.0)) throw InputError("min_horizon must be >= 0");
}

nlohmann::json to_json(const ControllerConfig& c) {
  nlohmann::json j{{"variant", to_string(c.variant)},
                   {"mpc_period", c.mpc_period},
                   {"mpc_latency", c.mpc_latency},
                   {"K_p", c.K_p},
                   {"K_i", c.K_i},
                   {"delta_s_window", c.delta_s_window},
                   {"anti_windup_fcy", c.anti_windup_fcy},
                   {"active_map", c.active_map},
                   {"min_horizon", c.min_horizon}};
  j["v_coast_min"] = c.v_coast_min ? nlohmann::json(*c.v_coast_min) : nlohmann::json();
  return j;
}

ControllerConfig controller_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("controller config must be an object");
  ControllerConfig c;
  try {
    if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
    c.mpc_period = j.value("mpc_period", c.mpc_period);
    c.mpc_latency = j.value("mpc_latency", c.mpc_latency);
    c.K_p = j.value("K_p", c.K_p);
    c.K_i = j.value("K_i", c.K_i);
    c.delta_s_window = j.value("delta_s_window", c.delta_s_window);
    c.anti_windup_fcy = j.value("anti_windup_fcy", c.anti_windup_fcy);
    c.active_map = j.value("active_map", c.active_map);
    c.min_horizon = j.value("min_horizon", c.min_horizon);
    if (j.contains("v_coast_min") && !j["v_coast_min"].is_null()) {
      c.v_coast_min = j["v_coast_min"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("controller config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t PlanSnapshot::index_at(double s) const {
  const double k = std::round((s - s_begin) / kSimulationStep);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), lambda.size() - 1);
}

double PlanSnapshot::lambda_width() const {
  const auto [lo, hi] = std::minmax_element(lambda.begin(), lambda.end());
  return *hi - *lo;
}

namespace {

const ThrottleMap& find_map(const std::vector<ThrottleMap>& maps, int id) {
  for (const auto& m : maps) {
    if (m.id == id) return m;
  }
  throw InputError("throttle map " + std::to_string(id) + " is not configured");
}

std::shared_ptr<const PlanSnapshot> make_snapshot(
    const CoastPlan& cp, const MapPlan& chosen, const StintBoundary& boundary,
    const TrackProfile& track, const VehicleParams& params,
    const GripSchedule& grip, std::optional<double> v_coast_min,
    std::shared_ptr<const PlanSolution> convex, int sequence) {
  SimulationOptions o;
  o.v_coast_min = v_coast_min;
  o.record = true;
  const StintSimulator sim(track, params, grip, boundary, cp.s, cp.lambda_kin, o);
  const StintResult r = sim.run(chosen.lambda_star, chosen.map);
  auto snap = std::make_shared<PlanSnapshot>();
  snap->sequence = sequence;
  snap->s_begin = sim.grid().front();
  snap->lambda = sim.lambda();
  snap->E_b_ref = r.trajectory.E_b;
  snap->E_b_ref.resize(snap->lambda.size(),
                       snap->E_b_ref.empty() ? boundary.x0.E_b : snap->E_b_ref.back());
  snap->lambda_star = chosen.lambda_star;
  snap->map = chosen.map;
  snap->t_end = boundary.x0.t + chosen.cost;
  snap->E_kin_end = r.final_state.E_kin;
  snap->convex = std::move(convex);
  return snap;
}

const MapPlan& choose(const CoastPlan& cp, int active) {
  for (const auto& m : cp.maps) {
    if (m.map.id == active && m.feasible) return m;
  }
  return cp.best();
}

}  // namespace

std::shared_ptr<const PlanSnapshot> initial_plan(
    const StintBoundary& boundary, const TrackProfile& track,
    const VehicleParams& params, const GripSchedule& grip,
    const std::vector<ThrottleMap>& maps, const ControllerConfig& config) {
  config.validate();
  auto convex = std::make_shared<const PlanSolution>(
      solve_plan(track, params, grip, boundary));
  AdaptOptions opt;
  opt.simulation.v_coast_min = config.v_coast_min;
  const CoastPlan cp =
      solve_problem2(*convex, maps, boundary, track, params, grip, opt);
  return make_snapshot(cp, choose(cp, config.active_map), boundary, track, params,
                       grip, config.v_coast_min, convex, 0);
}

std::shared_ptr<const PlanSnapshot> mpc_update(const PlanRequest& req) {
  if (!req.track || !req.previous) {
    throw InputError("plan request needs a track and a previous plan");
  }
  StintBoundary b = req.boundary;
  b.s0 = req.measured.s;
  b.x0 = req.measured;
  if (!(b.S_stint > b.s0)) return req.previous;  // terminal: nothing left to plan
  const ThrottleMap& map = find_map(req.maps, req.active_map);
  AdaptOptions opt;
  opt.simulation.v_coast_min = req.v_coast_min;

  switch (req.variant) {
    case Variant::kFullyOnline: {
      auto convex = std::make_shared<const PlanSolution>(solve_plan(
          *req.track, req.params, req.knowledge, b, req.previous->convex.get()));
      const CoastPlan cp = solve_problem2(*convex, {map}, b, *req.track, req.params,
                                          req.knowledge, opt);
      return make_snapshot(cp, cp.maps.front(), b, *req.track, req.params,
                           req.knowledge, req.v_coast_min, convex, req.sequence);
    }
    case Variant::kFixedCostate: {
      const PlanSnapshot& prev = *req.previous;
      std::vector<double> s(prev.lambda.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = prev.s_begin + static_cast<double>(k) * kSimulationStep;
      }
      const CoastPlan cp = solve_problem2(s, prev.lambda, 0.0, {map}, b, *req.track,
                                          req.params, req.knowledge, opt);
      return make_snapshot(cp, cp.maps.front(), b, *req.track, req.params,
                           req.knowledge, req.v_coast_min, prev.convex, req.sequence);
    }
    case Variant::kFixedCostateAndThreshold:
      break;
  }
  throw InputError("the fixed-threshold variant does not re-plan");
}

double feedback_threshold(double lambda_star, double scale, double error,
                          double integral, const ControllerConfig& config) {
  return lambda_star + scale * (config.K_p * error + config.K_i * integral);
}

double energy_rate_error(double drop, double ds, double E_kin0, double E_b0,
                         double E_b_target, double s0, double S_stint,
                         double E_kin_end) {
  if (!(ds > 0.0) || !(S_stint > s0)) {
    throw InputError("energy rate needs positive distances");
  }
  return drop / ds - (E_kin0 + E_b0 - E_b_target - E_kin_end) / (S_stint - s0);
}

double energy_rate_threshold(double lambda_fixed, double scale, double dx,
                             double integral, const ControllerConfig& config) {
  return lambda_fixed - scale * (config.K_p * dx + config.K_i * integral);
}

bool decide_signal(double lambda_at_s, double lambda_adj, bool grip_limited,
                   double v, std::optional<double> v_coast_min) {
  if (grip_limited) return false;
  if (v_coast_min && v < *v_coast_min) return false;
  return lambda_at_s >= lambda_adj;
}

Controller::Controller(ControllerConfig config, std::shared_ptr<const PlanSnapshot> plan,
                       const StintBoundary& boundary, const VehicleParams& params)
    : config_(config), boundary_(boundary), params_(params), plan_(std::move(plan)) {
  config_.validate();
  if (!plan_ || plan_->lambda.empty()) throw InputError("controller needs a plan");
  gain_scale_ = std::max(plan_->lambda_width(), 1e-12);
  lambda_fixed_ = plan_->lambda_star;
  E_kin_end_ = plan_->E_kin_end;
}

void Controller::set_config(const ControllerConfig& config) {
  config.validate();
  if (config.variant != config_.variant) {
    lambda_fixed_ = plan_->lambda_star;
    E_kin_end_ = plan_->E_kin_end;
    window_.clear();
    reset_integral();
  }
  config_ = config;
}

void Controller::post(std::shared_ptr<const PlanSnapshot> plan) {
  if (!plan) return;
  std::lock_guard<std::mutex> lock(mailbox_mutex_);
  pending_ = std::move(plan);
  has_pending_.store(true, std::memory_order_release);
}

const Feedback& Controller::observe(const VehicleState& x, bool cap_active) {
  if (has_pending_.exchange(false, std::memory_order_acq_rel)) {
    std::lock_guard<std::mutex> lock(mailbox_mutex_);
    plan_ = std::move(pending_);
    ++adopted_;
    reset_integral();
  }
  const double ds = last_s_ ? std::max(0.0, x.s - *last_s_) : 0.0;
  last_s_ = x.s;
  feedback_.lambda_at_s = plan_->lambda_at(x.s);

  if (config_.variant != Variant::kFixedCostateAndThreshold) {
    feedback_.error = (x.E_b - plan_->E_b_ref_at(x.s)) / params_.E_b_max;
    integral_ += feedback_.error * ds / 1000.0;
    feedback_.integral = integral_;
    feedback_.lambda_adj = feedback_threshold(plan_->lambda_star, gain_scale_,
                                              feedback_.error, integral_, config_);
    return feedback_;
  }

  const double total = x.E_kin + x.E_b;
  window_.emplace_back(x.s, total);
  while (window_.size() > 1 && x.s - window_[1].first >= config_.delta_s_window) {
    window_.pop_front();
  }
  const double span = x.s - window_.front().first;
  if (!(span > 0.0)) {
    feedback_ = {feedback_.lambda_at_s, lambda_fixed_, 0.0, integral_};
    return feedback_;
  }
  const auto& x0 = boundary_.x0;
  const double target_rate =
      (x0.E_kin + x0.E_b - boundary_.E_b_target - E_kin_end_) /
      (boundary_.S_stint - boundary_.s0);
  const double dx = energy_rate_error(window_.front().second - total, span, x0.E_kin,
                                      x0.E_b, boundary_.E_b_target, boundary_.s0,
                                      boundary_.S_stint, E_kin_end_) /
                    target_rate;
  const bool filled = span >= config_.delta_s_window - 1e-9;
  const bool frozen = config_.anti_windup_fcy && cap_active;
  if (filled && !frozen) integral_ += dx * ds / 1000.0;
  feedback_.error = dx;
  feedback_.integral = integral_;
  feedback_.lambda_adj = energy_rate_threshold(lambda_fixed_, gain_scale_, dx,
                                               filled ? integral_ : 0.0, config_);
  return feedback_;
}

bool Controller::decide(const VehicleState& x, bool grip_limited) const {
  return decide_signal(feedback_.lambda_at_s, feedback_.lambda_adj, grip_limited,
                       speed_of(x.E_kin, params_), config_.v_coast_min);
}

}  // namespace stintopt
