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


#include "stintopt/plan.hpp"

#include <algorithm>
#include <cmath>

#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

// Unit scales of the conic variables.
constexpr double kEnergyUnit = 1e6;     // J
constexpr double kForceUnit = 1e3;      // N
constexpr double kSpeedUnit = 10.0;     // m/s
constexpr double kLethargyUnit = 1e-2;  // s/m
constexpr double kTightTolerance = 1e-4;
constexpr double kTightWarning = 1e-3;

using Triplets = std::vector<Eigen::Triplet<double>>;

int var(std::size_t node, int which) {
  return static_cast<int>(node) * kVarsPerNode + which;
}

// Largest potential-energy release available between s0 and S_stint [J].
double max_potential_release(const TrackProfile& track, const VehicleParams& p,
                             const Grid& grid) {
  double height = 0.0;
  double lowest = 0.0;
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    height += std::sin(track.grade_at(grid.nodes[k])) * grid.step(k);
    lowest = std::min(lowest, height);
  }
  return -lowest * p.m * kGravity;
}

void check_boundary(const TrackProfile& track, const VehicleParams& p,
                    const StintBoundary& b, const Grid& grid) {
  constexpr const char* kTerminalEnergy = "terminal battery energy";
  constexpr const char* kTerminalTemp = "terminal battery temperature";
  if (b.E_b_target > p.E_b_max) {
    throw InfeasibleProblemError(kTerminalEnergy,
                                 "target above the battery capacity E_b_max");
  }
  if (b.E_b_target < p.E_b_min) {
    throw InputError("terminal battery energy target below E_b_min");
  }
  const double reachable =
      b.x0.E_b + b.x0.E_kin + max_potential_release(track, p, grid);
  if (b.E_b_target > reachable) {
    throw InfeasibleProblemError(
        kTerminalEnergy,
        "target exceeds initial battery energy plus all recoverable energy");
  }
  if (b.theta_b_target < p.theta_cool) {
    throw InfeasibleProblemError(kTerminalTemp,
                                 "target below the coolant temperature");
  }
  if (b.theta_b_target > p.theta_b_max) {
    throw InputError("terminal battery temperature target above theta_b_max");
  }
}

double relative(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-12);
}

}  // namespace

void StintBoundary::validate() const {
  if (!(s0 >= 0.0) || !(S_stint > s0)) {
    throw InputError("stint boundary: need 0 <= s0 < S_stint");
  }
  if (!(x0.E_kin > 0.0)) {
    throw InputError("stint boundary: initial kinetic energy must be positive");
  }
}

std::vector<double> initial_lethargy(const Grid& grid, const VehicleParams& p) {
  return std::vector<double>(grid.size(), 1.5 / p.v_max);
}

std::vector<double> lethargy_from(const PlanSolution& previous, const Grid& grid,
                                  const VehicleParams& p) {
  auto out = initial_lethargy(grid, p);
  const auto& old = previous.grid.nodes;
  if (old.size() < 2) return out;
  const auto mapped = resample(old, previous.lethargy, grid.nodes);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.nodes[k] >= old.front() && grid.nodes[k] <= old.back()) {
      out[k] = mapped[k];
    }
  }
  return out;
}

PlanProblem build_problem(const TrackProfile& track, const VehicleParams& params,
                          const GripSchedule& grip, const StintBoundary& boundary,
                          const Grid& grid,
                          const std::vector<double>& lethargy_ref) {
  params.validate();
  boundary.validate();
  if (grid.size() < 2) throw InputError("optimizer grid needs two nodes");
  if (std::abs(grid.front() - boundary.s0) > 1e-6 ||
      std::abs(grid.back() - boundary.S_stint) > 1e-6) {
    throw InputError("grid does not match the stint horizon");
  }
  if (lethargy_ref.size() != grid.size()) {
    throw InputError("reference lethargy size does not match the grid");
  }
  for (double l : lethargy_ref) {
    if (!(l > 0.0)) throw InputError("reference lethargy must be positive");
  }
  check_boundary(track, params, boundary, grid);

  const std::size_t nodes = grid.size();
  const std::size_t N = grid.intervals();
  const int n = static_cast<int>(nodes) * kVarsPerNode;
  const int p_rows = kInitialConditions + static_cast<int>(N) * kEqualitiesPerInterval +
                     static_cast<int>(nodes);
  const int orth = static_cast<int>(nodes) * kOrthantRowsPerNode + kTerminalRows;
  const int m_rows = orth + static_cast<int>(nodes) * kConesPerNode * 3;

  PlanProblem out;
  out.grid = grid;
  out.E_kin_max = driver_energy_limit(track, params, grip, boundary.s0,
                                      boundary.S_stint, grid.nodes);

  // Per-node drag coefficient and constant resistance [kN].
  std::vector<double> drag(nodes), rest(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const double s = grid.nodes[k];
    const GripState g = grip.at(s);
    const double grade = track.grade_at(s);
    drag[k] = params.drag_per_energy(g.aero_scale) * kEnergyUnit / kForceUnit;
    rest[k] = (params.c_r * params.m * kGravity * std::cos(grade) +
               params.m * kGravity * std::sin(grade)) / kForceUnit;
  }

  ConicProblem& cp = out.conic;
  cp.c = Eigen::VectorXd::Zero(n);
  cp.b = Eigen::VectorXd::Zero(p_rows);
  cp.h = Eigen::VectorXd::Zero(m_rows);
  cp.n_orthant = orth;
  cp.soc_dims.assign(nodes * kConesPerNode, 3);
  cp.eq_tags.resize(static_cast<std::size_t>(p_rows));
  cp.cone_tags.resize(static_cast<std::size_t>(m_rows));
  Triplets ta, tg;
  ta.reserve(static_cast<std::size_t>(p_rows) * 8);
  tg.reserve(static_cast<std::size_t>(m_rows) * 2);

  // Objective: trapezoidal integral of lethargy [s].
  for (std::size_t k = 0; k < N; ++k) {
    const double w = 0.5 * grid.step(k) * kLethargyUnit;
    cp.c[var(k, kVarLethargy)] += w;
    cp.c[var(k + 1, kVarLethargy)] += w;
  }

  // Initial conditions.
  const VehicleState& x0 = boundary.x0;
  const std::pair<int, double> init[kInitialConditions] = {
      {kVarEkin, x0.E_kin / kEnergyUnit},
      {kVarEb, x0.E_b / kEnergyUnit},
      {kVarThetaM, x0.theta_m},
      {kVarThetaB, x0.theta_b}};
  for (int i = 0; i < kInitialConditions; ++i) {
    ta.emplace_back(i, var(0, init[i].first), 1.0);
    cp.b[i] = init[i].second;
    cp.eq_tags[static_cast<std::size_t>(i)] = "initial conditions";
  }

  // Trapezoidal collocation of the four state equations.
  for (std::size_t k = 0; k < N; ++k) {
    const double h = grid.step(k);
    const int r = out.dynamics_row(k);
    const double hf = 0.5 * h * kForceUnit / kEnergyUnit;
    for (std::size_t j : {k, k + 1}) {
      ta.emplace_back(r, var(j, kVarFm), -hf);
      ta.emplace_back(r, var(j, kVarFbrake), -hf);
      ta.emplace_back(r, var(j, kVarEkin), hf * drag[j]);
      ta.emplace_back(r + 1, var(j, kVarFdc), hf);
      ta.emplace_back(r + 1, var(j, kVarLossB), hf);
    }
    ta.emplace_back(r, var(k + 1, kVarEkin), 1.0);
    ta.emplace_back(r, var(k, kVarEkin), -1.0);
    cp.b[r] = -hf * (rest[k] + rest[k + 1]);
    ta.emplace_back(r + 1, var(k + 1, kVarEb), 1.0);
    ta.emplace_back(r + 1, var(k, kVarEb), -1.0);

    const struct {
      int state, loss;
      double C, hc;
      const char* tag;
    } thermal[2] = {{kVarThetaM, kVarLossM, params.C_m, params.h_m, "electric machine"},
                    {kVarThetaB, kVarLossB, params.C_b, params.h_b, "battery"}};
    for (int t = 0; t < 2; ++t) {
      const int row = r + 2 + t;
      const double w = 0.5 * h / thermal[t].C;
      ta.emplace_back(row, var(k + 1, thermal[t].state),
                      1.0 + w * thermal[t].hc * lethargy_ref[k + 1]);
      ta.emplace_back(row, var(k, thermal[t].state),
                      -1.0 + w * thermal[t].hc * lethargy_ref[k]);
      ta.emplace_back(row, var(k, thermal[t].loss), -w * kForceUnit);
      ta.emplace_back(row, var(k + 1, thermal[t].loss), -w * kForceUnit);
      cp.b[row] = w * thermal[t].hc * params.theta_cool *
                  (lethargy_ref[k] + lethargy_ref[k + 1]);
      cp.eq_tags[static_cast<std::size_t>(row)] = thermal[t].tag;
    }
    cp.eq_tags[static_cast<std::size_t>(r)] = "vehicle dynamics";
    cp.eq_tags[static_cast<std::size_t>(r) + 1] = "battery";
  }

  // DC-side force balance F_dc = F_m + F_loss_m + P_aux * lethargy.
  const int dc0 = kInitialConditions + static_cast<int>(N) * kEqualitiesPerInterval;
  for (std::size_t k = 0; k < nodes; ++k) {
    const int row = dc0 + static_cast<int>(k);
    ta.emplace_back(row, var(k, kVarFdc), 1.0);
    ta.emplace_back(row, var(k, kVarFm), -1.0);
    ta.emplace_back(row, var(k, kVarLossM), -1.0);
    ta.emplace_back(row, var(k, kVarLethargy),
                    -params.P_aux * kLethargyUnit / kForceUnit);
    cp.eq_tags[static_cast<std::size_t>(row)] = "inverter";
  }

  // Linear limits.
  const double pl = kLethargyUnit / kForceUnit;
  for (std::size_t k = 0; k < nodes; ++k) {
    const int r = static_cast<int>(k) * kOrthantRowsPerNode;
    const auto row = [&](int i, std::initializer_list<std::pair<int, double>> terms,
                         double rhs, const char* tag) {
      for (const auto& [v, coef] : terms) tg.emplace_back(r + i, var(k, v), coef);
      cp.h[r + i] = rhs;
      cp.cone_tags[static_cast<std::size_t>(r + i)] = tag;
    };
    // Node 0 bounds never cut off the measured state.
    const bool first = k == 0;
    const auto upper = [&](double bound, double value) {
      return first ? std::max(bound, value) : bound;
    };
    row(0, {{kVarFm, 1.0}, {kVarLethargy, -params.P_max * pl}}, 0.0, "electric machine");
    row(1, {{kVarFm, -1.0}, {kVarLethargy, -params.P_regen * pl}}, 0.0,
        "electric machine");
    row(2, {{kVarFm, 1.0}}, params.F_m_max / kForceUnit, "electric machine");
    row(3, {{kVarFm, -1.0}}, params.F_m_max / kForceUnit, "electric machine");
    row(4, {{kVarFbrake, 1.0}}, 0.0, "brakes");
    row(5, {{kVarFbrake, -1.0}}, params.F_brake_max / kForceUnit, "brakes");
    row(6, {{kVarEkin, 1.0}},
        upper(out.E_kin_max[k], x0.E_kin) / kEnergyUnit, "maximum kinetic energy");
    row(7, {{kVarEb, 1.0}}, upper(params.E_b_max, x0.E_b) / kEnergyUnit,
        "battery energy");
    row(8, {{kVarEb, -1.0}},
        -(first ? std::min(params.E_b_min, x0.E_b) : params.E_b_min) / kEnergyUnit,
        "battery energy");
    row(9, {{kVarThetaM, 1.0}}, upper(params.theta_m_max, x0.theta_m),
        "motor temperature");
    row(10, {{kVarThetaB, 1.0}}, upper(params.theta_b_max, x0.theta_b),
        "battery temperature");
  }
  const int term = static_cast<int>(nodes) * kOrthantRowsPerNode;
  tg.emplace_back(term, var(N, kVarEb), -1.0);
  cp.h[term] = -boundary.E_b_target / kEnergyUnit;
  cp.cone_tags[static_cast<std::size_t>(term)] = "terminal battery energy";
  tg.emplace_back(term + 1, var(N, kVarThetaB), 1.0);
  cp.h[term + 1] = boundary.theta_b_target;
  cp.cone_tags[static_cast<std::size_t>(term) + 1] = "terminal battery temperature";

  // Cones, each written as |(2a, y - z)| <= y + z for a^2 <= y z.
  const double speed_coef = 2.0 * kEnergyUnit / (params.m_eq * kSpeedUnit * kSpeedUnit);
  const double lv_const = 1.0 / (kSpeedUnit * kLethargyUnit);
  const double am = std::sqrt(params.alpha_m * kForceUnit);
  const double ab = std::sqrt(params.alpha_b * kForceUnit);
  for (std::size_t k = 0; k < nodes; ++k) {
    int r = orth + static_cast<int>(k) * kConesPerNode * 3;
    const auto tag3 = [&](int base, const char* tag) {
      for (int i = 0; i < 3; ++i) cp.cone_tags[static_cast<std::size_t>(base + i)] = tag;
    };
    // v^2 <= (2/m_eq) E_kin  with y = E, z = speed_coef.
    tg.emplace_back(r, var(k, kVarEkin), -1.0);
    cp.h[r] = speed_coef;
    tg.emplace_back(r + 1, var(k, kVarSpeed), -2.0);
    tg.emplace_back(r + 2, var(k, kVarEkin), -1.0);
    cp.h[r + 2] = -speed_coef;
    tag3(r, "speed");
    r += 3;
    // lethargy * v >= 1  with y = lethargy, z = v, a = const.
    tg.emplace_back(r, var(k, kVarLethargy), -1.0);
    tg.emplace_back(r, var(k, kVarSpeed), -1.0);
    cp.h[r + 1] = 2.0 * std::sqrt(lv_const);
    tg.emplace_back(r + 2, var(k, kVarLethargy), -1.0);
    tg.emplace_back(r + 2, var(k, kVarSpeed), 1.0);
    tag3(r, "lethargy");
    r += 3;
    // F_loss_m - beta_m >= alpha_m F_m^2  with y = F_loss_m - beta_m, z = 1.
    const double beta = params.beta_m / kForceUnit;
    tg.emplace_back(r, var(k, kVarLossM), -1.0);
    cp.h[r] = 1.0 - beta;
    tg.emplace_back(r + 1, var(k, kVarFm), -2.0 * am);
    tg.emplace_back(r + 2, var(k, kVarLossM), -1.0);
    cp.h[r + 2] = -beta - 1.0;
    tag3(r, "electric machine");
    r += 3;
    // F_loss_b >= alpha_b F_dc^2.
    tg.emplace_back(r, var(k, kVarLossB), -1.0);
    cp.h[r] = 1.0;
    tg.emplace_back(r + 1, var(k, kVarFdc), -2.0 * ab);
    tg.emplace_back(r + 2, var(k, kVarLossB), -1.0);
    cp.h[r + 2] = -1.0;
    tag3(r, "battery");
  }

  cp.A.resize(p_rows, n);
  cp.A.setFromTriplets(ta.begin(), ta.end());
  cp.G.resize(m_rows, n);
  cp.G.setFromTriplets(tg.begin(), tg.end());
  cp.validate();
  return out;
}

PlanSolution solve(const PlanProblem& problem, const VehicleParams& params,
                   const ConicSettings& settings) {
  const ConicResult r = solve_conic(problem.conic, settings);
  if (r.status == ConicStatus::kPrimalInfeasible) {
    throw InfeasibleProblemError(
        r.infeasible_family.empty() ? "unknown" : r.infeasible_family,
        "no strategy satisfies the stint constraints");
  }
  if (r.status != ConicStatus::kOptimal &&
      r.status != ConicStatus::kOptimalInaccurate) {
    throw SolverError(std::string("conic solver stopped: ") + to_string(r.status));
  }

  PlanSolution sol;
  sol.grid = problem.grid;
  sol.E_kin_max = problem.E_kin_max;
  sol.status = to_string(r.status);
  sol.iterations = r.iterations;
  sol.t_pred = r.primal_objective;
  const std::size_t nodes = problem.grid.size();
  const auto column = [&](int which, double unit) {
    std::vector<double> out(nodes);
    for (std::size_t k = 0; k < nodes; ++k) out[k] = r.x[var(k, which)] * unit;
    return out;
  };
  sol.E_kin = column(kVarEkin, kEnergyUnit);
  sol.v = column(kVarSpeed, kSpeedUnit);
  sol.lethargy = column(kVarLethargy, kLethargyUnit);
  sol.E_b = column(kVarEb, kEnergyUnit);
  sol.theta_m = column(kVarThetaM, 1.0);
  sol.theta_b = column(kVarThetaB, 1.0);
  sol.F_m = column(kVarFm, kForceUnit);
  sol.F_brake = column(kVarFbrake, kForceUnit);
  sol.F_loss_m = column(kVarLossM, kForceUnit);
  sol.F_dc = column(kVarFdc, kForceUnit);
  sol.F_loss_b = column(kVarLossB, kForceUnit);

  // Rows are in MJ, so the negated duals per J are dt/dE_kin. An interval
  // dual belongs to the interval midpoint; interior nodes interpolate
  // between neighboring midpoints.
  const std::size_t N = nodes - 1;
  std::vector<double> mid(N);
  for (std::size_t k = 0; k < N; ++k) {
    mid[k] = -r.y[problem.dynamics_row(k)] / kEnergyUnit;
  }
  sol.lambda_kin.resize(nodes);
  sol.lambda_kin[0] = -r.y[0] / kEnergyUnit;
  for (std::size_t k = 1; k < N; ++k) {
    const double hl = problem.grid.step(k - 1);
    const double hr = problem.grid.step(k);
    sol.lambda_kin[k] = (hr * mid[k - 1] + hl * mid[k]) / (hl + hr);
  }
  sol.lambda_kin[N] = mid[N - 1];

  std::size_t tight = 0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double lv = std::abs(sol.lethargy[k] * sol.v[k] - 1.0);
    const double ve = relative(0.5 * params.m_eq * sol.v[k] * sol.v[k], sol.E_kin[k]);
    const double worst = std::max(lv, ve);
    sol.max_tightness_residual = std::max(sol.max_tightness_residual, worst);
    tight += worst <= kTightTolerance;
  }
  sol.tight_fraction = static_cast<double>(tight) / static_cast<double>(nodes);
  sol.tightness_warning = sol.max_tightness_residual > kTightWarning;
  return sol;
}

PlanSolution solve_plan(const TrackProfile& track, const VehicleParams& params,
                        const GripSchedule& grip, const StintBoundary& boundary,
                        const PlanSolution* previous) {
  const Grid grid = build_grid(track, boundary.s0, boundary.S_stint, GridMode::kOptimizer);
  const auto ref = previous ? lethargy_from(*previous, grid, params)
                            : initial_lethargy(grid, params);
  return solve(build_problem(track, params, grip, boundary, grid, ref), params);
}

std::vector<std::size_t> detect_apexes(const std::vector<double>& E_kin,
                                       const std::vector<double>& s, double window) {
  if (E_kin.size() != s.size()) throw InputError("apex detection: size mismatch");
  std::vector<std::size_t> apexes;
  const std::size_t n = E_kin.size();
  const auto same = [&](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
  };
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && same(E_kin[j + 1], E_kin[i])) ++j;
    const double v = E_kin[i];
    const bool lower_left = i > 0 && E_kin[i - 1] > v;
    const bool lower_right = j + 1 < n && E_kin[j + 1] > v;
    if (lower_left && lower_right) {
      bool lowest = true;
      for (std::size_t k = 0; k < n && lowest; ++k) {
        const bool near = s[k] >= s[i] - window && s[k] <= s[j] + window;
        if (near && E_kin[k] < v && !same(E_kin[k], v)) lowest = false;
      }
      if (lowest) apexes.push_back(j);
    }
    i = j + 1;
  }
  return apexes;
}

std::vector<double> robustify(const std::vector<double>& lambda,
                              const std::vector<std::size_t>& apexes) {
  std::vector<double> out = lambda;
  for (std::size_t a = 0; a < apexes.size(); ++a) {
    const std::size_t start = apexes[a];
    const std::size_t stop = a + 1 < apexes.size() ? apexes[a + 1] : lambda.size();
    if (start >= stop) continue;
    const auto it = std::min_element(lambda.begin() + static_cast<std::ptrdiff_t>(start),
                                     lambda.begin() + static_cast<std::ptrdiff_t>(stop));
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start), std::next(out.begin() + (it - lambda.begin())), *it);
  }
  return out;
}

std::vector<double> robustify_costate(const PlanSolution& plan) {
  return robustify(plan.lambda_kin, detect_apexes(plan.E_kin, plan.grid.nodes));
}

std::vector<double> resample(const std::vector<double>& xs,
                             const std::vector<double>& ys,
                             const std::vector<double>& at) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw InputError("resample: mismatched or empty input");
  }
  std::vector<double> out(at.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x = at[i];
    if (x <= xs.front()) {
      out[i] = ys.front();
      continue;
    }
    if (x >= xs.back()) {
      out[i] = ys.back();
      continue;
    }
    if (j > 0 && xs[j] > x) j = 0;
    while (xs[j + 1] < x) ++j;
    const double w = (x - xs[j]) / (xs[j + 1] - xs[j]);
    out[i] = ys[j] + w * (ys[j + 1] - ys[j]);
  }
  return out;
}

#define STINTOPT_PLAN_FIELDS(X) \
  X(E_kin) X(v) X(lethargy) X(F_m) X(F_brake) X(F_loss_m) X(F_dc) X(F_loss_b) \
  X(E_b) X(theta_m) X(theta_b) X(E_kin_max) X(lambda_kin)

nlohmann::json to_json(const PlanSolution& plan) {
  nlohmann::json j;
  j["grid"] = plan.grid.nodes;
#define X(f) j[#f] = plan.f;
  STINTOPT_PLAN_FIELDS(X)
#undef X
  j["t_pred"] = plan.t_pred;
  j["status"] = plan.status;
  j["iterations"] = plan.iterations;
  j["tight_fraction"] = plan.tight_fraction;
  j["max_tightness_residual"] = plan.max_tightness_residual;
  j["tightness_warning"] = plan.tightness_warning;
  return j;
}

PlanSolution plan_from_json(const nlohmann::json& j) {
  PlanSolution p;
  try {
    p.grid.nodes = j.at("grid").get<std::vector<double>>();
#define X(f) p.f = j.at(#f).get<std::vector<double>>();
    STINTOPT_PLAN_FIELDS(X)
#undef X
    p.t_pred = j.at("t_pred").get<double>();
    p.status = j.at("status").get<std::string>();
    p.iterations = j.value("iterations", 0);
    p.tight_fraction = j.value("tight_fraction", 0.0);
    p.max_tightness_residual = j.value("max_tightness_residual", 0.0);
    p.tightness_warning = j.value("tightness_warning", false);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("plan JSON: ") + e.what());
  }
  if (p.lambda_kin.size() != p.grid.size() || p.E_kin.size() != p.grid.size()) {
    throw InputError("plan JSON: array lengths do not match the grid");
  }
  return p;
}

#undef STINTOPT_PLAN_FIELDS

}  // namespace stintopt
