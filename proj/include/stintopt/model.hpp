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

#ifndef STINTOPT_MODEL_HPP_
#define STINTOPT_MODEL_HPP_

#include <functional>
#include <span>
#include <vector>

#include "stintopt/track.hpp"
#include "stintopt/vehicle.hpp"

namespace stintopt {

struct VehicleState {
  double E_kin = 0.0;    // J
  double E_b = 0.0;      // J
  double theta_m = 0.0;  // K
  double theta_b = 0.0;  // K
  double s = 0.0;        // m
  double t = 0.0;        // s

  bool operator==(const VehicleState&) const = default;
};

struct ControlInput {
  double F_m = 0.0;      // N, negative = regeneration
  double F_brake = 0.0;  // N, <= 0
  double u_th = 0.0;     // throttle position in [0, 1]
};

/// Energy flows out of the battery, per meter. Their sum equals -dE_b/ds.
struct EnergyFlows {
  double wheel = 0.0;         // F_m
  double motor_loss = 0.0;    // F_loss_m
  double battery_loss = 0.0;  // F_loss_b
  double aux = 0.0;           // P_aux * lethargy
};

/// Per-meter state derivatives plus the flow breakdown used for audits.
struct Derivative {
  double E_kin = 0.0;
  double E_b = 0.0;
  double theta_m = 0.0;
  double theta_b = 0.0;
  double t = 0.0;  // lethargy
  EnergyFlows flows;
};

double speed_of(double E_kin, const VehicleParams& p);

/// Non-propulsive longitudinal resistance: drag + rolling + grade [N].
double resistance(double E_kin, const GripState& grip, double grade,
                  const VehicleParams& p);

/// Exact (non-relaxed) space-domain dynamics. Throws StallError when
/// E_kin <= 0.
Derivative derivatives(const VehicleState& state, const ControlInput& input,
                       const GripState& grip, const VehicleParams& params,
                       double grade = 0.0);

/// Variable-step second-order Adams-Bashforth weights (w_curr, w_prev) such
/// that x+ = x + h*(w_curr*f[k] - w_prev*f[k-1]). With h == h_prev this is
/// (3/2, 1/2); without history it degenerates to explicit Euler (1, 0).
struct Ab2Weights {
  double curr = 1.0;
  double prev = 0.0;
};
Ab2Weights ab2_weights(double h, double h_prev);

/// Advances `state` by one step of length h. `prev` is the derivative at
/// the previous node (nullptr bootstraps with Euler); `h_prev` is the length
/// of the previous step and defaults to h. Throws StallError when the new
/// kinetic energy is not positive.
VehicleState step_ab2(const Derivative* prev, const Derivative& curr,
                      const VehicleState& state, double h,
                      double h_prev = 0.0);

/// Accumulates energy flows with the same weights as step_ab2.
EnergyFlows step_flows(const Derivative* prev, const Derivative& curr,
                       const EnergyFlows& total, double h, double h_prev = 0.0);

/// Force limits of the electric machine at the current speed.
struct MotorLimits {
  double lower;  // max(-F_m_max, -P_regen/v)
  double upper;  // min(F_m_max, P_max/v)
};
MotorLimits motor_limits(double E_kin, const VehicleParams& p);

/// Inputs that make the next AB2 step land exactly on `E_kin_target`.
/// The total longitudinal force goes to the machine first (regeneration
/// before friction), the remainder to the friction brake. Throws
/// InfeasibleBrakingError when friction capacity is insufficient and
/// InputError when the target needs more than the machine can deliver.
ControlInput invert_for_bound(const VehicleState& state, double E_kin_target,
                              const Derivative* prev, double h,
                              const VehicleParams& params,
                              const GripState& grip, double grade = 0.0,
                              double h_prev = 0.0);

/// Largest decelerating force available at a node given the kinetic energy
/// it must reach [N].
using DecelForce = std::function<double(std::size_t k, double E_next)>;

/// Backward sweep bound[k] = min(E_max[k], bound[k+1] + h_k*F_decel).
/// `steps[k]` is the length of interval k; steps.size() == E_max.size()-1.
std::vector<double> braking_envelope(std::span<const double> E_max,
                                     std::span<const double> steps,
                                     const DecelForce& decel);

/// Envelope for the vehicle: combined friction + regenerative + drag and
/// rolling force, derated by 10% to leave room for the AB2 lag.
std::vector<double> braking_envelope(std::span<const double> E_max,
                                     std::span<const double> nodes,
                                     const TrackProfile& track,
                                     const GripSchedule& grip,
                                     const VehicleParams& params);

/// Kinetic-energy limit a driver at the grip limit actually follows: the
/// grip bound tightened by the braking envelope. The envelope is swept on
/// the 1 m grid over [s0, s_end] and read back at `nodes` by linear
/// interpolation, so coarse and fine grids see the same braking points.
std::vector<double> driver_energy_limit(const TrackProfile& track,
                                        const VehicleParams& params,
                                        const GripSchedule& grip, double s0,
                                        double s_end,
                                        std::span<const double> nodes);

}  // namespace stintopt

#endif  // STINTOPT_MODEL_HPP_
