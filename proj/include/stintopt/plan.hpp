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


#ifndef STINTOPT_PLAN_HPP_
#define STINTOPT_PLAN_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stintopt/conic.hpp"
#include "stintopt/model.hpp"
#include "stintopt/track.hpp"
#include "stintopt/vehicle.hpp"

namespace stintopt {

struct StintBoundary {
  double s0 = 0.0;
  double S_stint = 0.0;
  VehicleState x0;
  double E_b_target = 0.0;      // terminal battery energy floor [J]
  double theta_b_target = 0.0;  // terminal battery temperature ceiling [K]

  /// Throws InputError on an empty horizon or a non-positive initial speed.
  void validate() const;
};

/// Variable block per optimizer node. Internally energies are held in MJ,
/// forces in kN, speed in 10 m/s and lethargy in 10 ms/m to keep the conic
/// problem well scaled.
enum PlanVar : int {
  kVarEkin,
  kVarSpeed,
  kVarLethargy,
  kVarEb,
  kVarThetaM,
  kVarThetaB,
  kVarFm,
  kVarFbrake,
  kVarLossM,
  kVarFdc,
  kVarLossB,
  kVarsPerNode,
};

inline constexpr int kOrthantRowsPerNode = 11;
inline constexpr int kConesPerNode = 4;
inline constexpr int kEqualitiesPerInterval = 4;
inline constexpr int kInitialConditions = 4;
inline constexpr int kTerminalRows = 2;

struct PlanProblem {
  ConicProblem conic;
  Grid grid;
  /// Driver limit per node (grip bound tightened by the braking envelope).
  std::vector<double> E_kin_max;
  /// Equality row of the kinetic-energy dynamics on interval k.
  int dynamics_row(std::size_t k) const {
    return kInitialConditions + static_cast<int>(k) * kEqualitiesPerInterval;
  }
};

struct PlanSolution {
  Grid grid;
  std::vector<double> E_kin, v, lethargy, F_m, F_brake, F_loss_m, F_dc,
      F_loss_b, E_b, theta_m, theta_b;
  std::vector<double> E_kin_max;
  /// Kinetic-energy co-state dt/dE_kin per node [s/J].
  std::vector<double> lambda_kin;
  double t_pred = 0.0;
  std::string status;
  int iterations = 0;
  /// Share of nodes whose lethargy and speed relaxations are tight to 1e-4.
  double tight_fraction = 0.0;
  double max_tightness_residual = 0.0;
  /// Set when any relaxation residual exceeds 1e-3.
  bool tightness_warning = false;
};

/// Constant-speed lethargy guess at two thirds of the straight-line cap.
std::vector<double> initial_lethargy(const Grid& grid, const VehicleParams& p);

/// Lethargy of a previous plan interpolated onto `grid`; nodes outside the
/// old plan fall back to the constant-speed guess.
std::vector<double> lethargy_from(const PlanSolution& previous, const Grid& grid,
                                  const VehicleParams& p);

/// Builds the relaxed minimum-time problem on `grid`. Throws
/// InfeasibleProblemError for boundaries that are impossible before solving
/// and InputError for inconsistent dimensions.
PlanProblem build_problem(const TrackProfile& track, const VehicleParams& params,
                          const GripSchedule& grip, const StintBoundary& boundary,
                          const Grid& grid,
                          const std::vector<double>& lethargy_ref);

/// Solves a built problem. Throws InfeasibleProblemError naming the
/// constraint family of the infeasibility certificate, SolverError when the
/// solver fails.
PlanSolution solve(const PlanProblem& problem, const VehicleParams& params,
                   const ConicSettings& settings = {});

/// Grid construction, reference lethargy, build and solve in one call.
PlanSolution solve_plan(const TrackProfile& track, const VehicleParams& params,
                        const GripSchedule& grip, const StintBoundary& boundary,
                        const PlanSolution* previous = nullptr);

/// Apex nodes: last node of each plateau of planned E_kin that is lower than
/// its neighbors and lowest within `window` meters.
std::vector<std::size_t> detect_apexes(const std::vector<double>& E_kin,
                                       const std::vector<double>& s,
                                       double window = 10.0);

/// Flattens the co-state between each apex and the minimum of the co-state
/// before the next apex.
std::vector<double> robustify(const std::vector<double>& lambda,
                              const std::vector<std::size_t>& apexes);

std::vector<double> robustify_costate(const PlanSolution& plan);

/// Linear interpolation of (xs, ys) at `at`, clamped at the ends.
std::vector<double> resample(const std::vector<double>& xs,
                             const std::vector<double>& ys,
                             const std::vector<double>& at);

nlohmann::json to_json(const PlanSolution& plan);
PlanSolution plan_from_json(const nlohmann::json& j);

}  // namespace stintopt

#endif  // STINTOPT_PLAN_HPP_
