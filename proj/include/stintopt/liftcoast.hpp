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


#ifndef STINTOPT_LIFTCOAST_HPP_
#define STINTOPT_LIFTCOAST_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stintopt/model.hpp"
#include "stintopt/plan.hpp"

namespace stintopt {

/// Full throttle delivers a fixed power P_full, limited by the motor force.
struct ThrottleMap {
  int id = 0;
  double P_full = 0.0;  // W

  void validate(const VehicleParams& p) const;
};

/// F_m = u_th * min(F_m_max, P_full / v).
double throttle_force(const ThrottleMap& map, double u_th, double E_kin,
                      const VehicleParams& p);

/// One 1 m plant step under the full-throttle-or-coast rule. The step is
/// grip-limited when the full-throttle prediction would exceed the
/// envelope at the next node; the inputs then land exactly on the envelope.
/// Otherwise the driver coasts when `coast` says so, else goes full throttle.
struct DriveStep {
  ControlInput input;
  Derivative derivative;
  VehicleState next;
  bool grip_limited = false;
  bool coasting = false;
};

DriveStep drive_step(const VehicleState& state, const Derivative* prev,
                     double h, double h_prev, double envelope_next,
                     const GripState& grip, double grade, const ThrottleMap& map,
                     const VehicleParams& params,
                     const std::function<bool()>& coast);

struct SimulationOptions {
  /// Below this speed coast instructions are suppressed.
  std::optional<double> v_coast_min;
  /// Keep per-node trajectories in the result.
  bool record = false;
};

/// Constraint outcome of one simulated stint. Each family is reported on
/// its own so callers can tell intermediate and terminal violations apart.
struct ConstraintReport {
  bool battery_floor = true;       // E_b >= E_b_min everywhere
  bool terminal_energy = true;     // E_b[N] >= E_b_target
  bool motor_temperature = true;   // theta_m <= theta_m_max everywhere
  bool battery_temperature = true; // theta_b <= theta_b_max everywhere
  bool terminal_temperature = true;// theta_b[N] <= theta_b_target
  bool completed = true;           // no stall and no infeasible braking
  std::string failure;             // stall / braking message
  std::optional<double> failure_s;

  bool ok() const {
    return battery_floor && terminal_energy && motor_temperature &&
           battery_temperature && terminal_temperature && completed;
  }
  /// Name of the first failing family, "" when ok.
  std::string first_violation() const;
};

struct StintTrajectory {
  std::vector<double> s, t, E_kin, E_b, theta_m, theta_b, F_m, F_brake, u_th,
      lambda;
  std::vector<std::uint8_t> coast, grip_limited;
};

struct StintResult {
  double t_stint = 0.0;
  ConstraintReport report;
  VehicleState final_state;
  EnergyFlows flows;  // battery outflow breakdown, AB2-integrated
  double max_theta_m = 0.0;
  double max_theta_b = 0.0;
  StintTrajectory trajectory;  // filled when recording

  bool constraints_ok() const { return report.ok(); }
};

/// Forward simulation of a full-throttle-or-coast stint on the 1 m grid.
/// Grid, bound, braking envelope and per-node grip are precomputed once so
/// repeated runs (bisection) only march the dynamics.
class StintSimulator {
 public:
  /// `lambda` is the robustified co-state on `lambda_s` positions; it is
  /// resampled onto the simulation grid.
  StintSimulator(const TrackProfile& track, const VehicleParams& params,
                 const GripSchedule& grip, const StintBoundary& boundary,
                 const std::vector<double>& lambda_s,
                 const std::vector<double>& lambda, SimulationOptions options = {});

  StintResult run(double lambda_c, const ThrottleMap& map) const;

  const Grid& grid() const { return grid_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& envelope() const { return envelope_; }
  double lambda_min() const;
  double lambda_max() const;

 private:
  const VehicleParams params_;
  const StintBoundary boundary_;
  SimulationOptions options_;
  Grid grid_;
  std::vector<double> lambda_, envelope_, grade_;
  std::vector<GripState> grip_;
};

/// Plain-data wrapper: builds a simulator for a single run.
StintResult simulate_stint(double lambda_c, const ThrottleMap& map,
                           const StintBoundary& boundary, const TrackProfile& track,
                           const VehicleParams& params, const GripSchedule& grip,
                           const std::vector<double>& lambda_s,
                           const std::vector<double>& lambda,
                           SimulationOptions options = {});

struct BisectionResult {
  double lambda_star = 0.0;
  bool feasible = false;
  int iterations = 0;   // halvings of the bracket
  int evaluations = 0;  // calls of the feasibility function
  /// Bracketing pair: lambda_star is feasible, witness_infeasible (within
  /// tol above it) is not. Absent when the upper end is feasible.
  std::optional<double> witness_infeasible;
};

/// Outcome of one threshold trial. A stall means the driver coasted so much
/// that the car stopped, which only more throttle (a higher threshold) can
/// cure, so it moves the bracket the same way a feasible trial does.
enum class Verdict { kFeasible, kInfeasible, kStalled };

/// Largest threshold in [lo, hi] whose stint is feasible, to within `tol`.
/// The upper end is tried first; then the bracket is halved at its
/// midpoint. When no midpoint is feasible the lower end is tried last.
BisectionResult bisect_threshold(const std::function<Verdict(double)>& trial,
                                 double lo, double hi, double tol);
BisectionResult bisect_threshold(const std::function<bool(double)>& feasible,
                                 double lo, double hi, double tol);

/// Verdict of a simulated stint.
Verdict verdict_of(const StintResult& r);

struct MapPlan {
  ThrottleMap map;
  double lambda_star = 0.0;
  double cost = 0.0;  // predicted stint time [s]
  bool feasible = false;
  int evaluations = 0;
  int iterations = 0;
  std::optional<double> witness_infeasible;
  double seconds = 0.0;  // wall-clock bisection time, not serialized
};

struct CoastPlan {
  double s0 = 0.0;
  double S_stint = 0.0;
  std::vector<double> s;           // 1 m simulation grid
  std::vector<double> lambda_kin;  // robustified co-state on `s`
  std::vector<MapPlan> maps;
  double t_convex = 0.0;           // relaxed lower bound

  const MapPlan& best() const;
};

struct AdaptOptions {
  SimulationOptions simulation;
  /// Bisection tolerance as a fraction of the co-state range.
  double relative_tolerance = 1e-4;
};

/// Runs the threshold bisection per throttle map. Throws
/// InfeasibleProblemError when no map is feasible.
CoastPlan solve_problem2(const PlanSolution& plan, const std::vector<ThrottleMap>& maps,
                         const StintBoundary& boundary, const TrackProfile& track,
                         const VehicleParams& params, const GripSchedule& grip,
                         const AdaptOptions& options = {});

/// Same, on an already robustified co-state (for re-bisection on a stored
/// trajectory). `lambda_s` need not cover the whole stint; values are held
/// constant beyond its ends.
CoastPlan solve_problem2(const std::vector<double>& lambda_s,
                         const std::vector<double>& lambda, double t_convex,
                         const std::vector<ThrottleMap>& maps,
                         const StintBoundary& boundary, const TrackProfile& track,
                         const VehicleParams& params, const GripSchedule& grip,
                         const AdaptOptions& options = {});

/// Re-simulates both ends of every feasible map's bracket; true when the
/// feasible end is feasible and the infeasible end is not.
bool verify_witnesses(const CoastPlan& plan, const StintBoundary& boundary,
                      const TrackProfile& track, const VehicleParams& params,
                      const GripSchedule& grip, const SimulationOptions& options = {});

nlohmann::json to_json(const CoastPlan& plan);
CoastPlan coast_plan_from_json(const nlohmann::json& j);

}  // namespace stintopt

#endif  // STINTOPT_LIFTCOAST_HPP_
