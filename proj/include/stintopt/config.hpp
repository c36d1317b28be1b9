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


#ifndef STINTOPT_CONFIG_HPP_
#define STINTOPT_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stintopt/harness.hpp"

namespace stintopt {

/// Where the lap comes from: a CSV file or the synthetic generator.
struct TrackSource {
  std::optional<std::filesystem::path> csv;
  std::optional<std::uint64_t> seed;  // synthetic; falls back to RunConfig::seed
  int corners = 10;
  double lap_length = 4200.0;
  std::vector<PitZone> pit_zones;  // applied on top of either source
};

/// Everything a command needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  TrackSource track;
  std::optional<std::filesystem::path> vehicle_json;  // defaults when absent
  VehicleParams vehicle;  // resolved parameters

  int n_laps = 11;
  double s0 = 0.0;
  double v0 = 30.0;               // m/s
  std::optional<double> E_b0;     // J, E_b_max when absent
  double theta_m0 = 330.0;        // K
  double theta_b0 = 323.15;       // K
  // Exactly one of t_charge or the explicit targets.
  std::optional<double> t_charge;             // s
  std::optional<double> E_b_target;           // J
  std::optional<double> theta_b_target;       // K
  ChargeModel charge;

  std::vector<ThrottleMap> maps{{0, 350e3}, {1, 340e3}, {2, 330e3}};
  ControllerConfig controller;
  std::string scenario = "None";
  std::vector<int> sweep_laps;
  std::vector<double> sweep_charge_times;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  double timescale = 5.0;

  /// Throws InputError on a violated invariant (missing files, n_laps < 1,
  /// both or neither of t_charge and explicit targets).
  void validate() const;
};

/// Parses a config object. `base` resolves relative paths. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Resolved form: paths absolute, vehicle parameters inlined.
nlohmann::json to_json(const RunConfig& c);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);
/// Hash of the resolved config plus the contents of the track file, as 16
/// hex digits. Identical inputs give identical hashes on every run.
std::string config_hash(const RunConfig& c);

TrackProfile load_track(const RunConfig& c);
StintBoundary make_boundary(const RunConfig& c, const VehicleParams& p, double lap_length);
StintSetup make_setup(const RunConfig& c);

}  // namespace stintopt

#endif  // STINTOPT_CONFIG_HPP_
