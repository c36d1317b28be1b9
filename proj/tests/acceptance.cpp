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


// Acceptance run on the nominal synthetic 11-lap stint. Prints one PASS or
// FAIL line per criterion (plus indented diagnostics) and exits nonzero when
// any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "stintopt/controller.hpp"
#include "stintopt/harness.hpp"
#include "stintopt/model.hpp"

namespace {

using namespace stintopt;
using testing::boundary_for;
using testing::kEnergyPerLap;
using testing::kLap;
using testing::kNominalLaps;
using testing::nominal_maps;
using testing::nominal_track;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += !ok;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct Nominal {
  VehicleParams p;
  StintSetup setup{nominal_track(), p, boundary_for(p, kNominalLaps, kEnergyPerLap),
                   nominal_maps(), kLap};
  PlanSolution plan;
  double solve_seconds = 0.0;
  CoastPlan coast;
};

void relaxation_and_runtime(Nominal& n) {
  const auto t0 = Clock::now();
  n.plan = solve_plan(n.setup.track, n.p, {}, n.setup.boundary);
  n.solve_seconds = seconds_since(t0);
  // Recompute the residuals from the solution rather than trusting the
  // solver's own summary.
  std::size_t tight = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < n.plan.grid.size(); ++k) {
    const double r1 = std::abs(n.plan.lethargy[k] * n.plan.v[k] - 1.0);
    const double ek = n.plan.E_kin[k];
    const double r2 = std::abs(0.5 * n.p.m_eq * n.plan.v[k] * n.plan.v[k] - ek) / ek;
    worst = std::max({worst, r1, r2});
    tight += r1 <= 1e-4 && r2 <= 1e-4;
  }
  const double share = static_cast<double>(tight) / static_cast<double>(n.plan.grid.size());
  report("relaxation tightness", n.plan.status == "optimal" && share >= 0.99,
         fmt("%.2f%% of %.0f nodes tight to 1e-4 (worst %.2e)", 100.0 * share,
             static_cast<double>(n.plan.grid.size()), worst) +
             ", status " + n.plan.status);
  report("solve runtime", n.solve_seconds <= 30.0,
         fmt("%.2f s for a %.1f km horizon (bound 30 s)", n.solve_seconds,
             n.setup.boundary.S_stint / 1000.0));
}

void lower_bound_and_bisection(Nominal& n) {
  n.coast = solve_problem2(n.plan, n.setup.maps, n.setup.boundary, n.setup.track, n.p, {});
  bool bound_ok = true;
  double worst_gap = 0.0;
  int worst_evals = 0;
  double worst_seconds = 0.0;
  std::ostringstream per_map;
  for (const auto& m : n.coast.maps) {
    const double gap = m.cost / n.plan.t_pred - 1.0;
    bound_ok = bound_ok && m.feasible && m.cost >= n.plan.t_pred;
    worst_gap = std::max(worst_gap, gap);
    worst_evals = std::max(worst_evals, m.evaluations);
    worst_seconds = std::max(worst_seconds, m.seconds);
    per_map << "    map " << m.map.id << fmt(": cost %.3f s, gap %.3f%%, %.0f evaluations",
                                              m.cost, 100.0 * gap, m.evaluations)
            << fmt(", %.3f s\n", m.seconds);
  }
  report("lower-bound gap", bound_ok && worst_gap <= 0.01,
         fmt("every map cost >= relaxed optimum %.3f s; worst gap %.3f%% (bound 1%%)",
             n.plan.t_pred, 100.0 * worst_gap));
  report("bisection budget", worst_evals <= 25 && worst_seconds <= 2.0,
         fmt("at most %.0f evaluations (bound 25), %.3f s per map (bound 2 s)", worst_evals,
             worst_seconds));
  std::cout << per_map.str();
}

// ---------------------------------------------------------------------------

struct SuiteRun {
  ScenarioKind scenario;
  Variant variant;
  StintLog log;
  double t_oracle = 0.0;
  double loss_pct = 0.0;
};

std::vector<SuiteRun> closed_loop_suite(const Nominal& n, std::vector<StintLog>& audit_logs,
                                        std::vector<CoastPlan>& oracle_coasts,
                                        std::vector<GripSchedule>& oracle_grips) {
  const auto& s = n.setup;
  const auto& b = s.boundary;
  const ControllerConfig base;
  const auto plan = initial_plan(b, s.track, s.params, GripSchedule{}, s.maps, base);
  std::vector<SuiteRun> runs;
  for (ScenarioKind k : {ScenarioKind::kDrafting, ScenarioKind::kTireDegradation,
                         ScenarioKind::kFullCourseYellow}) {
    const auto sc = DisturbanceScenario::named(k, b.s0, b.S_stint, kLap);
    const OracleResult oracle = oracle_solve(sc, s, base);
    oracle_coasts.push_back(oracle.coast);
    oracle_grips.push_back(sc.plant());
    for (Variant v : {Variant::kFullyOnline, Variant::kFixedCostate,
                      Variant::kFixedCostateAndThreshold}) {
      ControllerConfig c = base;
      c.variant = v;
      const auto t0 = Clock::now();
      SuiteRun r{k, v, run_closed_loop(c, sc, s, {}, plan), oracle.t_oracle, 0.0};
      r.loss_pct = 100.0 * (r.log.metrics.t_stint - r.t_oracle) / r.t_oracle;
      std::cout << "    " << to_string(k) << " / " << to_string(v)
                << fmt(": t %.3f s, oracle %.3f s, loss %+.4f%%", r.log.metrics.t_stint,
                       r.t_oracle, r.loss_pct)
                << fmt(", terminal E_b %+.3f%% of E_b_max vs target (%.1f s)\n",
                       100.0 * r.log.metrics.terminal_E_b_error, seconds_since(t0));
      audit_logs.push_back(r.log);
      runs.push_back(std::move(r));
    }
  }
  return runs;
}

void judge_suite(const Nominal& n, const std::vector<SuiteRun>& runs) {
  const auto& p = n.p;
  const auto& b = n.setup.boundary;
  bool energy = true, thermal = true, loss = true, order = true, dominance = true;
  std::ostringstream energy_d, thermal_d, loss_d, order_d, dom_d;
  std::map<ScenarioKind, double> fo_loss;
  for (const auto& r : runs) {
    const std::string tag = to_string(r.scenario) + "/" + to_string(r.variant);
    const auto& rows = r.log.rows;
    double min_Eb = 1e300, max_tm = 0.0, max_tb = 0.0;
    for (const auto& row : rows) {
      min_Eb = std::min(min_Eb, row.E_b);
      max_tm = std::max(max_tm, row.theta_m);
      max_tb = std::max(max_tb, row.theta_b);
    }
    const auto& last = rows.back();
    const bool done = r.log.metrics.completed && last.s >= b.S_stint - 1e-9;
    const double short_frac = (last.E_b - b.E_b_target) / p.E_b_max;
    const bool e_ok = done && min_Eb >= p.E_b_min && short_frac >= -0.005;
    if (!e_ok) {
      energy = false;
      energy_d << "    " << tag << fmt(": terminal E_b %+.3f%% of E_b_max vs target, "
                                       "min E_b %.2f MJ\n",
                                       100.0 * short_frac, min_Eb / 1e6);
    }
    const bool t_ok = done && max_tm <= p.theta_m_max && max_tb <= p.theta_b_max &&
                      last.theta_b <= b.theta_b_target;
    if (r.variant == Variant::kFixedCostateAndThreshold) {
      thermal_d << "    " << tag << " (exempt, logged)"
                << fmt(": max theta_m %.2f K, max theta_b %.2f K, terminal theta_b %.2f K\n",
                       max_tm, max_tb, last.theta_b);
    } else if (!t_ok) {
      thermal = false;
      thermal_d << "    " << tag << fmt(": max theta_m %.2f K, max theta_b %.2f K, "
                                        "terminal theta_b %.2f K\n",
                                        max_tm, max_tb, last.theta_b);
    }
    const double bound = r.variant == Variant::kFullyOnline ? 0.5 : 1.0;
    if (!(r.loss_pct <= bound)) {
      loss = false;
      loss_d << "    " << tag << fmt(": loss %.4f%% > %.1f%%\n", r.loss_pct, bound);
    }
    if (r.variant == Variant::kFullyOnline) fo_loss[r.scenario] = r.loss_pct;
    if (r.log.metrics.t_stint < r.t_oracle) {
      dominance = false;
      dom_d << "    " << tag << fmt(": closed loop %.3f s < oracle %.3f s (%+.4f%%)\n",
                                    r.log.metrics.t_stint, r.t_oracle, r.loss_pct);
    }
  }
  for (const auto& r : runs) {
    if (r.variant == Variant::kFullyOnline) continue;
    const double fo = fo_loss.at(r.scenario);
    if (!(fo <= r.loss_pct)) {
      order = false;
      order_d << "    " << to_string(r.scenario)
              << fmt(": FullyOnline %+.4f%% > ", fo) << to_string(r.variant)
              << fmt(" %+.4f%%\n", r.loss_pct);
    }
  }
  report("suite terminal energy", energy,
         "all 9 runs end with E_b >= target - 0.5% of E_b_max and never below E_b_min");
  std::cout << energy_d.str();
  report("suite thermal limits", thermal,
         "FullyOnline and FixedCostate runs hold every temperature limit");
  std::cout << thermal_d.str();
  report("suite time loss bounds", loss, "FullyOnline <= 0.5%, fixed variants <= 1.0%");
  std::cout << loss_d.str();
  report("suite FullyOnline ordering", order,
         "FullyOnline loss <= each fixed variant's loss per scenario");
  std::cout << order_d.str();
  report("oracle dominance", dominance, "oracle time <= every closed-loop time");
  std::cout << dom_d.str();
}

// ---------------------------------------------------------------------------

std::vector<double> interior_onsets(const StintLog& log, int lap) {
  return log.laps.at(static_cast<std::size_t>(lap - 1)).coast_onsets;
}

void behaviors(const Nominal& n, std::vector<StintLog>& audit_logs) {
  const auto& s = n.setup;
  const auto& b = s.boundary;

  // (a) Undisturbed stint with the fixed plan thresholds.
  ControllerConfig fixed;
  fixed.variant = Variant::kFixedCostateAndThreshold;
  const auto plan = initial_plan(b, s.track, s.params, GripSchedule{}, s.maps, fixed);
  const StintLog none = run_closed_loop(fixed, DisturbanceScenario{}, s, {}, plan);
  audit_logs.push_back(none);
  const auto ref = interior_onsets(none, 2);
  bool same_count = !ref.empty();
  double spread = 0.0;
  for (int lap = 3; lap < kNominalLaps; ++lap) {
    const auto on = interior_onsets(none, lap);
    if (on.size() != ref.size()) {
      same_count = false;
      continue;
    }
    for (std::size_t i = 0; i < on.size(); ++i) spread = std::max(spread, std::abs(on[i] - ref[i]));
  }
  report("repeatable coast onsets", same_count && spread <= 50.0,
         fmt("%.0f onsets per interior lap, largest deviation from lap 2 %.1f m (bound 50 m)",
             static_cast<double>(ref.size()), spread));

  // (b) Caution recovery with the stale co-state.
  ControllerConfig fc;
  fc.variant = Variant::kFixedCostate;
  const auto fc_plan = initial_plan(b, s.track, s.params, GripSchedule{}, s.maps, fc);
  const StintLog fc_none = run_closed_loop(fc, DisturbanceScenario{}, s, {}, fc_plan);
  audit_logs.push_back(fc_none);
  double v_nominal = 1e300;
  for (const auto& r : fc_none.rows) {
    if (r.coast_signal) v_nominal = std::min(v_nominal, speed_of(r.E_kin, s.params));
  }
  const auto fcy = DisturbanceScenario::named(ScenarioKind::kFullCourseYellow, b.s0,
                                              b.S_stint, kLap);
  const auto low_coasts = [&](const StintLog& log) {
    int count = 0;
    for (const auto& r : log.rows) {
      count += r.coast_signal && r.s >= 2 * kLap && speed_of(r.E_kin, s.params) < v_nominal;
    }
    return count;
  };
  const StintLog unfloored = run_closed_loop(fc, fcy, s, {}, fc_plan);
  fc.v_coast_min = v_nominal;
  const StintLog floored = run_closed_loop(fc, fcy, s, {}, fc_plan);
  audit_logs.push_back(unfloored);
  audit_logs.push_back(floored);
  const int before = low_coasts(unfloored);
  const int after = low_coasts(floored);
  report("low-speed coast after caution", before > 0 && after == 0,
         fmt("%.0f coast nodes below %.2f m/s without a floor, %.0f with it",
             before, v_nominal, after));

  // (c) Throttle-map insensitivity.
  double lo = 1e300, hi = 0.0;
  for (const auto& m : n.coast.maps) {
    lo = std::min(lo, m.cost);
    hi = std::max(hi, m.cost);
  }
  report("throttle-map insensitivity", hi / lo - 1.0 <= 0.005,
         fmt("per-map costs within %.3f%% (bound 0.5%%)", 100.0 * (hi / lo - 1.0)));
}

// ---------------------------------------------------------------------------

double decay_error(double h) {
  const int steps = static_cast<int>(std::lround(10.0 / h));
  VehicleState x{100.0, 0, 0, 0, 0, 0};
  Derivative prev;
  for (int k = 0; k < steps; ++k) {
    Derivative f;
    f.E_kin = -0.1 * x.E_kin;
    x = step_ab2(k == 0 ? nullptr : &prev, f, x, h);
    prev = f;
  }
  return std::abs(x.E_kin - 100.0 * std::exp(-1.0));
}

void kernels(const Nominal& n, const std::vector<StintLog>& audit_logs,
             const std::vector<CoastPlan>& oracle_coasts,
             const std::vector<GripSchedule>& oracle_grips) {
  const double ratio = decay_error(0.25) / decay_error(0.125);
  report("AB2 order", std::abs(ratio - 4.0) <= 0.3,
         fmt("error ratio under step halving %.4f (target 4 +/- 0.3)", ratio));

  const VehicleParams& p = n.p;
  const GripState g{0.95, 0.9, std::nullopt};
  VehicleState x{1.8e6, 1e8, 330.0, 320.0, 0.0, 0.0};
  Derivative prev = derivatives(x, {2000.0, 0.0, 0.5}, g, p);
  x = step_ab2(nullptr, prev, x, 1.0);
  double worst = 0.0;
  for (double delta : {-500.0, -1000.0, -5000.0, -10000.0, -20000.0, 500.0, 2000.0}) {
    const double target = x.E_kin + delta;
    const auto u = invert_for_bound(x, target, &prev, 1.0, p, g, 0.01);
    const auto next = step_ab2(&prev, derivatives(x, u, g, p, 0.01), x, 1.0);
    worst = std::max(worst, std::abs(next.E_kin - target) / target);
  }
  report("invert_for_bound round trip", worst <= 1e-9,
         fmt("worst relative error %.2e over 7 targets (bound 1e-9)", worst));

  double audit = 0.0;
  for (const auto& log : audit_logs) audit = std::max(audit, log.metrics.audit_residual);
  report("energy audit", audit <= 1e-6,
         fmt("worst residual %.2e over %.0f stint logs (bound 1e-6)", audit,
             static_cast<double>(audit_logs.size())));

  bool witnesses = verify_witnesses(n.coast, n.setup.boundary, n.setup.track, p, {});
  std::size_t pairs = 0;
  for (const auto& m : n.coast.maps) pairs += m.witness_infeasible.has_value();
  for (std::size_t i = 0; i < oracle_coasts.size(); ++i) {
    witnesses = witnesses && verify_witnesses(oracle_coasts[i], n.setup.boundary,
                                              n.setup.track, p, oracle_grips[i]);
    for (const auto& m : oracle_coasts[i].maps) pairs += m.witness_infeasible.has_value();
  }
  report("bisection witnesses", witnesses,
         fmt("%.0f adapt runs re-verified, %.0f bracketing pairs stored",
             1.0 + static_cast<double>(oracle_coasts.size()), static_cast<double>(pairs)));
}

// ---------------------------------------------------------------------------

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STINTOPT_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / "stintopt_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << R"({
  "track": {"seed": 1, "corners": 10, "lap_length": 4200},
  "stint": {"n_laps": 2, "v0": 30, "t_charge": 500},
  "controller": {"variant": "FullyOnline"},
  "scenario": "FullCourseYellow",
  "sweep": {"laps": [2, 3], "charge_times": [150, 200]},
  "seed": 1
})";
  const std::string cfg = (dir / "config.json").string();
  bool ok = true;
  std::size_t files = 0;
  for (const char* cmd : {"optimize", "adapt", "simulate", "sweep"}) {
    for (const char* out : {"a", "b"}) {
      ok = ok && run_cli(std::string(cmd) + " --config " + cfg + " --out " +
                         (dir / out).string()) == 0;
    }
  }
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    ok = ok && slurp(e.path()) == slurp(dir / "b" / e.path().filename());
  }
  report("determinism", ok && files >= 10,
         fmt("optimize, adapt, simulate and sweep run twice: %.0f output files byte-identical",
             static_cast<double>(files)));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  Nominal n;
  relaxation_and_runtime(n);
  lower_bound_and_bisection(n);

  std::vector<StintLog> audit_logs;
  std::vector<CoastPlan> oracle_coasts;
  std::vector<GripSchedule> oracle_grips;
  std::cout << "    closed-loop suite, 3 scenarios x 3 variants, " << kNominalLaps << " laps\n";
  const auto runs = closed_loop_suite(n, audit_logs, oracle_coasts, oracle_grips);
  judge_suite(n, runs);
  behaviors(n, audit_logs);
  kernels(n, audit_logs, oracle_coasts, oracle_grips);
  determinism();

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << fmt(" (%.0f s)\n", seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
