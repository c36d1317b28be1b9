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


#ifndef STINTOPT_TOOLS_COMMANDS_HPP_
#define STINTOPT_TOOLS_COMMANDS_HPP_

#include <optional>
#include <string>

#include "stintopt/config.hpp"

namespace stintopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInfeasible = 2;

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;   // a variant name or "all"
  std::optional<std::string> scenario;  // a scenario name or "all"
  std::optional<double> timescale;
  int port = 8765;
};

/// Loads the config and applies the overrides ("all" is kept aside for
/// simulate).
RunConfig resolve_config(const std::string& path, const Overrides& o);

int cmd_optimize(const RunConfig& c);
int cmd_adapt(const RunConfig& c);
int cmd_simulate(const RunConfig& c, bool all_variants, bool all_scenarios);
int cmd_sweep(const RunConfig& c);
int cmd_serve(const RunConfig& c, int port);

}  // namespace stintopt::cli

#endif  // STINTOPT_TOOLS_COMMANDS_HPP_
