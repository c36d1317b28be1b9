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


#ifndef STINTOPT_CONTROLLER_HPP_
#define STINTOPT_CONTROLLER_HPP_

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stintopt/liftcoast.hpp"
#include "stintopt/plan.hpp"

namespace stintopt {

enum class Variant { kFullyOnline, kFixedCostate, kFixedCostateAndThreshold };

std::string to_string(Variant v);
/// Accepts the CamelCase names used in outputs. Throws InputError.
Variant parse_variant(std::string_view name);

struct ControllerConfig {
  Variant variant = Variant::kFullyOnline;
  double mpc_period = 25.0;       // s of simulated time between re-plans
  double mpc_latency = 2.5;       // s from request to installed plan
  double K_p = 0.5;               // per unit normalized error
  double K_i = 0.01;              // per unit normalized error and km
  double delta_s_window = 4200.0; // m, energy-rate window
  bool anti_windup_fcy = true;
  std::optional<double> v_coast_min;  // m/s
  int active_map = 0;
  double min_horizon = 200.0;     // m; no re-plan closer to the finish

  /// Throws InputError on negative gains, non-positive window or a period
  /// not exceeding the latency.
  void validate() const;
};

nlohmann::json to_json(const ControllerConfig& c);
ControllerConfig controller_config_from_json(const nlohmann::json& j);

/// Everything the control loop reads from a plan. Immutable once built and
/// shared between the planner and the control loop.
struct PlanSnapshot {
  int sequence = 0;
  double s_begin = 0.0;
  std::vector<double> lambda;   // robustified co-state, 1 m grid from s_begin
  std::vector<double> E_b_ref;  // predicted battery energy on the same grid
  double lambda_star = 0.0;
  ThrottleMap map;
  double t_end = 0.0;  // predicted stint end time [s]
  double E_kin_end = 0.0;  // predicted kinetic energy at the finish [J]
  std::shared_ptr<const PlanSolution> convex;  // reference lethargy source

  std::size_t index_at(double s) const;
  double lambda_at(double s) const { return lambda[index_at(s)]; }
  double E_b_ref_at(double s) const { return E_b_ref[index_at(s)]; }
  double lambda_width() const;
};

/// Inputs of one re-plan. Self-contained so it can run on another thread.
struct PlanRequest {
  Variant variant = Variant::kFullyOnline;
  VehicleState measured;
  StintBoundary boundary;  // original stint; s0/x0 are replaced
  const TrackProfile* track = nullptr;
  VehicleParams params;
  GripSchedule knowledge;
  std::vector<ThrottleMap> maps;
  int active_map = 0;
  std::optional<double> v_coast_min;
  std::shared_ptr<const PlanSnapshot> previous;
  int sequence = 0;
};

/// Convex plan + bisection for every map, then the snapshot for the active map
/// (or the fastest feasible one if it is infeasible).
std::shared_ptr<const PlanSnapshot> initial_plan(
    const StintBoundary& boundary, const TrackProfile& track,
    const VehicleParams& params, const GripSchedule& grip,
    const std::vector<ThrottleMap>& maps, const ControllerConfig& config);

/// Shrinking-horizon update. FullyOnline re-solves the convex plan from the
/// measured state; FixedCostate re-runs only the bisection on the previous
/// snapshot's co-state. At or past the finish the previous plan is returned
/// unchanged. Throws on failure; the caller keeps the old plan.
std::shared_ptr<const PlanSnapshot> mpc_update(const PlanRequest& request);

/// lambda* + scale * (K_p e + K_i integral), integral in normalized-error km.
double feedback_threshold(double lambda_star, double scale, double error,
                          double integral, const ControllerConfig& config);

/// Measured minus target energy use per metre [J/m]. `drop` is the decrease
/// of kinetic plus battery energy over `ds`. The target spreads the usable
/// energy evenly over the stint; `E_kin_end` is the kinetic energy the car
/// still carries over the line, which is not available for use.
double energy_rate_error(double drop, double ds, double E_kin0, double E_b0,
                         double E_b_target, double s0, double S_stint,
                         double E_kin_end = 0.0);

/// lambda_fixed - scale * (K_p dx + K_i integral), dx normalized.
double energy_rate_threshold(double lambda_fixed, double scale, double dx,
                             double integral, const ControllerConfig& config);

/// Coast when the co-state reaches the threshold, the driver is at full
/// throttle (not grip-limited) and the speed floor, if any, is met.
bool decide_signal(double lambda_at_s, double lambda_adj, bool grip_limited,
                   double v, std::optional<double> v_coast_min);

/// Per-step feedback result.
struct Feedback {
  double lambda_at_s = 0.0;
  double lambda_adj = 0.0;
  double error = 0.0;  // normalized E_b error or energy-rate error
  double integral = 0.0;
};

/// The control loop side of the controller. Plans arrive through post()
/// from any thread and are adopted at the next observe() call; every other
/// member is confined to the control thread.
class Controller {
 public:
  Controller(ControllerConfig config, std::shared_ptr<const PlanSnapshot> plan,
             const StintBoundary& boundary, const VehicleParams& params);

  const ControllerConfig& config() const { return config_; }
  void set_config(const ControllerConfig& config);

  void post(std::shared_ptr<const PlanSnapshot> plan);

  /// Adopts a pending plan (resetting the integral), then updates the
  /// feedback from the measured state. Call once per step.
  const Feedback& observe(const VehicleState& x, bool cap_active);

  bool decide(const VehicleState& x, bool grip_limited) const;

  const Feedback& feedback() const { return feedback_; }
  const PlanSnapshot& plan() const { return *plan_; }
  std::shared_ptr<const PlanSnapshot> plan_ptr() const { return plan_; }
  double gain_scale() const { return gain_scale_; }
  int plans_adopted() const { return adopted_; }

 private:
  void reset_integral() { integral_ = 0.0; }

  ControllerConfig config_;
  StintBoundary boundary_;
  VehicleParams params_;
  std::shared_ptr<const PlanSnapshot> plan_;
  double gain_scale_ = 0.0;
  double lambda_fixed_ = 0.0;
  double E_kin_end_ = 0.0;

  std::mutex mailbox_mutex_;
  std::shared_ptr<const PlanSnapshot> pending_;
  std::atomic<bool> has_pending_{false};

  Feedback feedback_;
  double integral_ = 0.0;
  std::optional<double> last_s_;
  std::deque<std::pair<double, double>> window_;  // (s, E_kin + E_b)
  int adopted_ = 0;
};

}  // namespace stintopt

#endif  // STINTOPT_CONTROLLER_HPP_
