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


#ifndef STINTOPT_CONIC_HPP_
#define STINTOPT_CONIC_HPP_

#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace stintopt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Second-order cone program in standard form
///
///   minimize c'x  subject to  A x = b,  G x + s = h,  s in K,
///
/// where K is the product of a nonnegative orthant of dimension `n_orthant`
/// followed by second-order cones {(u0, u1) : u0 >= |u1|} of the listed
/// dimensions. Optional row tags name the constraint family of each row and
/// are used only for infeasibility diagnostics.
struct ConicProblem {
  Eigen::VectorXd c;
  SparseMatrix A;
  Eigen::VectorXd b;
  SparseMatrix G;
  Eigen::VectorXd h;
  int n_orthant = 0;
  std::vector<int> soc_dims;
  std::vector<std::string> eq_tags;
  std::vector<std::string> cone_tags;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(b.size()); }
  int num_cone_rows() const { return static_cast<int>(h.size()); }
  /// Throws InputError on inconsistent dimensions.
  void validate() const;
};

struct ConicSettings {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  /// Looser tolerances accepted when progress stalls.
  double feastol_inaccurate = 1e-5;
  double abstol_inaccurate = 5e-5;
  double reltol_inaccurate = 5e-5;
  int max_iterations = 100;
  int equilibration_passes = 15;
  int refinement_steps = 6;
  double static_regularization = 1e-9;
};

enum class ConicStatus {
  kOptimal,
  kOptimalInaccurate,
  kPrimalInfeasible,
  kDualInfeasible,
  kMaxIterations,
  kNumericalFailure,
};

const char* to_string(ConicStatus status);

/// Solution in the original (unscaled) coordinates. Duals follow the
/// Lagrangian c'x + y'(Ax - b) + z'(Gx - h), so z lies in the dual cone and
/// the sensitivity of the optimal value to b is -y. For infeasibility
/// statuses x (dual infeasible) or (y, z) (primal infeasible) hold the
/// certificate normalized to unit objective.
struct ConicResult {
  ConicStatus status = ConicStatus::kNumericalFailure;
  Eigen::VectorXd x, y, z, s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  /// For kPrimalInfeasible: the tag with the largest share of the
  /// certificate, or "" when no tags were given.
  std::string infeasible_family;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling
/// and Mehrotra predictor-corrector steps. Never throws on infeasibility;
/// inspect `status`.
ConicResult solve_conic(const ConicProblem& problem,
                        const ConicSettings& settings = {});

}  // namespace stintopt

#endif  // STINTOPT_CONIC_HPP_
