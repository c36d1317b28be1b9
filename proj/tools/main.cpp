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


#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "stintopt/errors.hpp"

int main(int argc, char** argv) {
  using namespace stintopt;
  using namespace stintopt::cli;

  CLI::App app{"Stint energy planning and lift-and-coast control"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides o;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "seed (synthetic track)");
  };
  auto* optimize = app.add_subcommand("optimize", "solve the convex minimum-time plan");
  auto* adapt = app.add_subcommand("adapt", "plan plus coast thresholds per throttle map");
  auto* simulate = app.add_subcommand("simulate", "closed-loop stint");
  auto* sweep = app.add_subcommand("sweep", "stint length and charge time sweep");
  auto* serve = app.add_subcommand("serve", "live session over TCP (JSON lines)");
  for (auto* sub : {optimize, adapt, simulate, sweep, serve}) common(sub);
  for (auto* sub : {simulate, serve}) {
    sub->add_option("--variant", o.variant, "FullyOnline | FixedCostate | "
                                            "FixedCostateAndThreshold (simulate: or all)");
    sub->add_option("--scenario", o.scenario,
                    "None | Drafting | TireDegradation | FullCourseYellow (simulate: or all)");
  }
  serve->add_option("--port", o.port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--timescale", o.timescale, "simulated seconds per wall second");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFailure;
  }

  try {
    const RunConfig c = resolve_config(config_path, o);
    if (optimize->parsed()) return cmd_optimize(c);
    if (adapt->parsed()) return cmd_adapt(c);
    if (simulate->parsed()) {
      return cmd_simulate(c, o.variant == "all", o.scenario == "all");
    }
    if (sweep->parsed()) return cmd_sweep(c);
    if (serve->parsed()) {
      if (o.variant == "all" || o.scenario == "all") {
        throw InputError("serve runs one variant and one scenario");
      }
      return cmd_serve(c, o.port);
    }
  } catch (const InfeasibleProblemError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
