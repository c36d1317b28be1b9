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


#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "stintopt/errors.hpp"

namespace stintopt::cli {

namespace {

using nlohmann::json;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  open_out(path) << j.dump(2) << '\n';
}

json meta(const RunConfig& c, const char* command) {
  return {{"command", command}, {"config_hash", config_hash(c)}, {"seed", c.seed}};
}

GripSchedule plant_of(const RunConfig& c, const StintSetup& s) {
  return DisturbanceScenario::named(parse_scenario(c.scenario), s.boundary.s0,
                                    s.boundary.S_stint, s.lap_length)
      .plant();
}

void write_plan_csv(const PlanSolution& p, const std::filesystem::path& nodes,
                    const std::filesystem::path& plot) {
  auto out = open_out(nodes);
  out << "s,E_kin,v,lethargy,F_m,F_brake,F_loss_m,F_dc,F_loss_b,E_b,theta_m,theta_b,"
         "lambda_kin,E_kin_max\n";
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    out << num(p.grid.nodes[k]) << ',' << num(p.E_kin[k]) << ',' << num(p.v[k]) << ','
        << num(p.lethargy[k]) << ',' << num(p.F_m[k]) << ',' << num(p.F_brake[k]) << ','
        << num(p.F_loss_m[k]) << ',' << num(p.F_dc[k]) << ',' << num(p.F_loss_b[k]) << ','
        << num(p.E_b[k]) << ',' << num(p.theta_m[k]) << ',' << num(p.theta_b[k]) << ','
        << num(p.lambda_kin[k]) << ',' << num(p.E_kin_max[k]) << '\n';
  }
  // Chart-ready columns: machine power, energies, temperatures, co-state.
  auto pl = open_out(plot);
  pl << "s,power_kW,E_kin_MJ,E_b_MJ,theta_m_C,theta_b_C,lambda_kin\n";
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    pl << num(p.grid.nodes[k]) << ',' << num(p.F_m[k] * p.v[k] / 1e3) << ','
       << num(p.E_kin[k] / 1e6) << ',' << num(p.E_b[k] / 1e6) << ','
       << num(p.theta_m[k] - 273.15) << ',' << num(p.theta_b[k] - 273.15) << ','
       << num(p.lambda_kin[k]) << '\n';
  }
}

void write_trace_csv(const StintLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "s,t,variant,lambda_kin_at_s,lambda_star_adj,error,coast_signal,grip_limited\n";
  for (const auto& r : log.rows) {
    out << num(r.s) << ',' << num(r.t) << ',' << log.variant << ',' << num(r.lambda_kin)
        << ',' << num(r.lambda_adj) << ',' << num(r.error) << ',' << r.coast_signal << ','
        << r.grip_limited << '\n';
  }
}

}  // namespace

RunConfig resolve_config(const std::string& path, const Overrides& o) {
  RunConfig c = load_run_config(path);
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.variant && *o.variant != "all") c.controller.variant = parse_variant(*o.variant);
  if (o.scenario && *o.scenario != "all") {
    c.scenario = to_string(parse_scenario(*o.scenario));
  }
  if (o.timescale) c.timescale = *o.timescale;
  c.validate();
  return c;
}

int cmd_optimize(const RunConfig& c) {
  const StintSetup s = make_setup(c);
  const PlanSolution plan = solve_plan(s.track, s.params, plant_of(c, s), s.boundary);
  json m = meta(c, "optimize");
  m["status"] = plan.status;
  m["t_pred"] = plan.t_pred;
  m["iterations"] = plan.iterations;
  m["tight_fraction"] = plan.tight_fraction;
  m["max_tightness_residual"] = plan.max_tightness_residual;
  m["tightness_warning"] = plan.tightness_warning;
  write_json(c.out / "plan.json", {{"meta", m}, {"plan", to_json(plan)}});
  write_plan_csv(plan, c.out / "plan_nodes.csv", c.out / "plot.csv");
  std::cout << "optimize: " << plan.status << ", t_pred " << num(plan.t_pred) << " s, "
            << plan.grid.size() << " nodes -> " << c.out.string() << '\n';
  if (plan.tightness_warning) {
    std::cerr << "warning: relaxation residual " << num(plan.max_tightness_residual)
              << " exceeds 1e-3\n";
  }
  return kExitOk;
}

int cmd_adapt(const RunConfig& c) {
  const StintSetup s = make_setup(c);
  const GripSchedule grip = plant_of(c, s);
  const PlanSolution plan = solve_plan(s.track, s.params, grip, s.boundary);
  AdaptOptions opt;
  opt.simulation.v_coast_min = c.controller.v_coast_min;
  const CoastPlan cp = solve_problem2(plan, s.maps, s.boundary, s.track, s.params, grip, opt);
  json m = meta(c, "adapt");
  m["t_convex"] = plan.t_pred;
  m["best_map"] = cp.best().map.id;
  m["witnesses_verified"] =
      verify_witnesses(cp, s.boundary, s.track, s.params, grip, opt.simulation);
  write_json(c.out / "coast_plan.json", {{"meta", m}, {"coast_plan", to_json(cp)}});
  auto out = open_out(c.out / "maps.csv");
  out << "map,P_full,feasible,lambda_star,cost,gap_pct,evaluations,iterations\n";
  for (const auto& mp : cp.maps) {
    out << mp.map.id << ',' << num(mp.map.P_full) << ',' << mp.feasible << ','
        << num(mp.lambda_star) << ',' << num(mp.cost) << ','
        << num(100.0 * (mp.cost - plan.t_pred) / plan.t_pred) << ',' << mp.evaluations
        << ',' << mp.iterations << '\n';
  }
  std::cout << "adapt: best map " << cp.best().map.id << ", cost " << num(cp.best().cost)
            << " s (convex bound " << num(plan.t_pred) << " s) -> " << c.out.string()
            << '\n';
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, bool all_variants, bool all_scenarios) {
  const StintSetup s = make_setup(c);
  if (all_variants || all_scenarios) {
    std::vector<ScenarioKind> scenarios = {parse_scenario(c.scenario)};
    if (all_scenarios) {
      scenarios = {ScenarioKind::kDrafting, ScenarioKind::kTireDegradation,
                   ScenarioKind::kFullCourseYellow};
    }
    std::vector<Variant> variants = {c.controller.variant};
    if (all_variants) {
      variants = {Variant::kFullyOnline, Variant::kFixedCostate,
                  Variant::kFixedCostateAndThreshold};
    }
    const auto rows = compare_variants(scenarios, variants, s, c.controller);
    write_comparison_csv(rows, c.out / "comparison.csv");
    write_json(c.out / "comparison.json", {{"meta", meta(c, "simulate")}});
    bool ok = true;
    for (const auto& r : rows) {
      std::cout << r.scenario << ' ' << r.variant << ": loss " << num(r.loss_pct) << "% "
                << (r.completed ? "" : "FAILED " + r.failure) << '\n';
      ok = ok && r.completed;
    }
    return ok ? kExitOk : kExitFailure;
  }
  const auto scenario = DisturbanceScenario::named(parse_scenario(c.scenario), s.boundary.s0,
                                                   s.boundary.S_stint, s.lap_length);
  const auto initial =
      initial_plan(s.boundary, s.track, s.params, GripSchedule{}, s.maps, c.controller);
  StintLog log = run_closed_loop(c.controller, scenario, s, {}, initial);
  try {
    const OracleResult oracle = oracle_solve(scenario, s, c.controller);
    log.metrics.time_loss_pct = 100.0 * (log.metrics.t_stint - oracle.t_oracle) / oracle.t_oracle;
  } catch (const InfeasibleProblemError& e) {
    std::cerr << "oracle: " << e.what() << '\n';
  }
  write_telemetry_csv(log, c.out / "telemetry.csv");
  write_trace_csv(log, c.out / "controller_trace.csv");
  json m = metrics_json(log);
  m["meta"] = meta(c, "simulate");
  m["t_plan_nominal"] = initial->t_end - s.boundary.x0.t;
  write_json(c.out / "metrics.json", m);
  std::cout << "simulate: " << log.variant << " / " << log.scenario << ", t_stint "
            << num(log.metrics.t_stint) << " s";
  if (log.metrics.time_loss_pct) std::cout << ", loss " << num(*log.metrics.time_loss_pct) << "%";
  std::cout << " -> " << c.out.string() << '\n';
  if (!log.metrics.completed) {
    std::cerr << "run failed: " << log.metrics.failure << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& c) {
  if (c.sweep_laps.empty() || c.sweep_charge_times.empty()) {
    throw InputError("sweep needs sweep.laps and sweep.charge_times in the config");
  }
  const StintSetup s = make_setup(c);
  const auto rows = sweep_strategy(c.sweep_laps, c.sweep_charge_times, c.charge, s);
  write_sweep_csv(rows, c.out / "sweep.csv");
  write_json(c.out / "sweep.json", {{"meta", meta(c, "sweep")}});
  for (const auto& r : rows) {
    if (r.optimal) {
      std::cout << r.n_laps << " laps: best t_charge " << num(r.t_charge) << " s, average "
                << num(r.average) << " s/lap" << (r.capacity_limited ? " (capacity)" : "")
                << '\n';
    }
  }
  return kExitOk;
}

}  // namespace stintopt::cli
