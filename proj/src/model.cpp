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

#include "stintopt/model.hpp"

#include <algorithm>
#include <cmath>

#include "stintopt/errors.hpp"

namespace stintopt {

double speed_of(double E_kin, const VehicleParams& p) {
  return std::sqrt(2.0 * E_kin / p.m_eq);
}

double resistance(double E_kin, const GripState& grip, double grade,
                  const VehicleParams& p) {
  return p.drag_per_energy(grip.aero_scale) * E_kin +
         p.c_r * p.m * kGravity * std::cos(grade) +
         p.m * kGravity * std::sin(grade);
}

Derivative derivatives(const VehicleState& state, const ControlInput& input,
                       const GripState& grip, const VehicleParams& params,
                       double grade) {
  if (!(state.E_kin > 0.0)) throw StallError(state.s);
  const double lethargy = 1.0 / speed_of(state.E_kin, params);
  Derivative d;
  d.E_kin = input.F_m + input.F_brake -
            resistance(state.E_kin, grip, grade, params);
  d.t = lethargy;

  const double loss_m = params.alpha_m * input.F_m * input.F_m + params.beta_m;
  const double aux = params.P_aux * lethargy;
  const double f_dc = input.F_m + loss_m + aux;
  const double loss_b = params.alpha_b * f_dc * f_dc;
  d.E_b = -(f_dc + loss_b);
  d.theta_m = (loss_m - params.h_m * (state.theta_m - params.theta_cool) *
                            lethargy) / params.C_m;
  d.theta_b = (loss_b - params.h_b * (state.theta_b - params.theta_cool) *
                            lethargy) / params.C_b;
  d.flows = {input.F_m, loss_m, loss_b, aux};
  return d;
}

Ab2Weights ab2_weights(double h, double h_prev) {
  const double ratio = h / (h_prev > 0.0 ? h_prev : h);
  return {1.0 + 0.5 * ratio, 0.5 * ratio};
}

VehicleState step_ab2(const Derivative* prev, const Derivative& curr,
                      const VehicleState& state, double h, double h_prev) {
  if (!(h > 0.0)) throw InputError("step length must be positive");
  const Ab2Weights w = prev ? ab2_weights(h, h_prev) : Ab2Weights{};
  const Derivative zero;
  const Derivative& p = prev ? *prev : zero;
  const auto combine = [&](double fc, double fp) {
    return h * (w.curr * fc - w.prev * fp);
  };
  VehicleState next = state;
  next.E_kin += combine(curr.E_kin, p.E_kin);
  next.E_b += combine(curr.E_b, p.E_b);
  next.theta_m += combine(curr.theta_m, p.theta_m);
  next.theta_b += combine(curr.theta_b, p.theta_b);
  next.t += combine(curr.t, p.t);
  next.s += h;
  if (!(next.E_kin > 0.0)) throw StallError(next.s);
  return next;
}

EnergyFlows step_flows(const Derivative* prev, const Derivative& curr,
                       const EnergyFlows& total, double h, double h_prev) {
  const Ab2Weights w = prev ? ab2_weights(h, h_prev) : Ab2Weights{};
  const EnergyFlows zero;
  const EnergyFlows& p = prev ? prev->flows : zero;
  const auto combine = [&](double fc, double fp) {
    return h * (w.curr * fc - w.prev * fp);
  };
  EnergyFlows next = total;
  next.wheel += combine(curr.flows.wheel, p.wheel);
  next.motor_loss += combine(curr.flows.motor_loss, p.motor_loss);
  next.battery_loss += combine(curr.flows.battery_loss, p.battery_loss);
  next.aux += combine(curr.flows.aux, p.aux);
  return next;
}

MotorLimits motor_limits(double E_kin, const VehicleParams& p) {
  const double v = speed_of(E_kin, p);
  return {std::max(-p.F_m_max, -p.P_regen / v),
          std::min(p.F_m_max, p.P_max / v)};
}

ControlInput invert_for_bound(const VehicleState& state, double E_kin_target,
                              const Derivative* prev, double h,
                              const VehicleParams& params,
                              const GripState& grip, double grade,
                              double h_prev) {
  if (!(E_kin_target > 0.0)) {
    throw InputError("kinetic-energy target must be positive");
  }
  if (!(state.E_kin > 0.0)) throw StallError(state.s);
  const Ab2Weights w = prev ? ab2_weights(h, h_prev) : Ab2Weights{};
  const double prev_f = prev ? prev->E_kin : 0.0;
  const double needed =
      ((E_kin_target - state.E_kin) / h + w.prev * prev_f) / w.curr;
  const double total = needed + resistance(state.E_kin, grip, grade, params);

  const MotorLimits lim = motor_limits(state.E_kin, params);
  if (total > lim.upper * (1.0 + 1e-12)) {
    throw InputError("kinetic-energy target above propulsive capability at s=" +
                     std::to_string(state.s));
  }
  ControlInput u;
  u.F_m = std::clamp(total, lim.lower, lim.upper);
  u.F_brake = total - u.F_m;
  if (u.F_brake > 0.0) u.F_brake = 0.0;
  if (u.F_brake < -params.F_brake_max) {
    throw InfeasibleBrakingError(state.s, -params.F_brake_max - u.F_brake);
  }
  u.u_th = u.F_m > 0.0 ? u.F_m / lim.upper : 0.0;
  return u;
}

std::vector<double> braking_envelope(std::span<const double> E_max,
                                     std::span<const double> steps,
                                     const DecelForce& decel) {
  if (E_max.empty()) return {};
  if (steps.size() + 1 != E_max.size()) {
    throw InputError("braking envelope: steps/bound size mismatch");
  }
  std::vector<double> bound(E_max.begin(), E_max.end());
  for (std::size_t k = bound.size() - 1; k-- > 0;) {
    const double reach = bound[k + 1] + steps[k] * decel(k, bound[k + 1]);
    bound[k] = std::min(E_max[k], reach);
  }
  return bound;
}

std::vector<double> braking_envelope(std::span<const double> E_max,
                                     std::span<const double> nodes,
                                     const TrackProfile& track,
                                     const GripSchedule& grip,
                                     const VehicleParams& params) {
  if (nodes.size() != E_max.size()) {
    throw InputError("braking envelope: nodes/bound size mismatch");
  }
  std::vector<double> steps(nodes.size() > 0 ? nodes.size() - 1 : 0);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    steps[k] = nodes[k + 1] - nodes[k];
  }
  constexpr double kDerate = 0.9;
  const auto decel = [&](std::size_t k, double E_next) {
    const double v = speed_of(E_next, params);
    const double regen = std::min(params.F_m_max, params.P_regen / v);
    const double s = nodes[k];
    return kDerate * (params.F_brake_max + regen) +
           resistance(E_next, grip.at(s), track.grade_at(s), params);
  };
  return braking_envelope(E_max, steps, decel);
}

std::vector<double> driver_energy_limit(const TrackProfile& track,
                                        const VehicleParams& params,
                                        const GripSchedule& grip, double s0,
                                        double s_end,
                                        std::span<const double> nodes) {
  const Grid fine = build_grid(track, s0, s_end, GridMode::kSimulation);
  const auto bound = max_kinetic_energy(track, params, grip, fine.nodes);
  const auto env = braking_envelope(bound, fine.nodes, track, grip, params);
  std::vector<double> out;
  out.reserve(nodes.size());
  std::size_t j = 0;
  for (double s : nodes) {
    if (s < fine.front() - 1e-9 || s > fine.back() + 1e-9) {
      throw InputError("driver limit queried outside its horizon");
    }
    while (j + 2 < fine.size() && fine.nodes[j + 1] <= s) ++j;
    const double w = std::clamp((s - fine.nodes[j]) / fine.step(j), 0.0, 1.0);
    out.push_back(env[j] + w * (env[j + 1] - env[j]));
  }
  return out;
}

}  // namespace stintopt
