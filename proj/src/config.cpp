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


#include "stintopt/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stintopt/errors.hpp"

namespace stintopt {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw InputError("unknown key '" + k + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void RunConfig::validate() const {
  if (track.csv && !std::filesystem::exists(*track.csv)) {
    throw InputError("track file not found: " + track.csv->string());
  }
  if (vehicle_json && !std::filesystem::exists(*vehicle_json)) {
    throw InputError("vehicle file not found: " + vehicle_json->string());
  }
  if (n_laps < 1) throw InputError("n_laps must be >= 1");
  const bool explicit_targets = E_b_target.has_value() || theta_b_target.has_value();
  if (t_charge.has_value() == explicit_targets) {
    throw InputError("give exactly one of t_charge or explicit terminal targets");
  }
  if (explicit_targets && !(E_b_target && theta_b_target)) {
    throw InputError("explicit targets need both E_b_target and theta_b_target");
  }
  if (!(v0 > 0.0)) throw InputError("initial speed must be positive");
  if (!(timescale > 0.0)) throw InputError("timescale must be positive");
  if (maps.empty()) throw InputError("at least one throttle map is required");
  for (const auto& m : maps) m.validate(vehicle);
  vehicle.validate();
  controller.validate();
  parse_scenario(scenario);
  for (int n : sweep_laps) {
    if (n < 1) throw InputError("sweep lap counts must be >= 1");
  }
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  reject_unknown(j, {"track", "vehicle", "stint", "charge", "maps", "controller",
                     "scenario", "sweep", "out", "seed", "timescale"},
                 "config");
  RunConfig c;
  try {
    if (j.contains("track")) {
      const json& t = j.at("track");
      reject_unknown(t, {"csv", "seed", "corners", "lap_length", "pit_zones"}, "track");
      if (t.contains("csv")) c.track.csv = resolve(base, t.at("csv").get<std::string>());
      read(t, "seed", c.track.seed);
      read(t, "corners", c.track.corners);
      read(t, "lap_length", c.track.lap_length);
      if (t.contains("pit_zones")) {
        for (const json& z : t.at("pit_zones")) {
          reject_unknown(z, {"s_start", "s_end", "v_limit"}, "pit zone");
          c.track.pit_zones.push_back({z.at("s_start").get<double>(),
                                       z.at("s_end").get<double>(),
                                       z.at("v_limit").get<double>()});
        }
      }
    }
    if (j.contains("vehicle")) {
      const json& v = j.at("vehicle");
      if (v.is_string()) {
        c.vehicle_json = resolve(base, v.get<std::string>());
        c.vehicle = load_vehicle_params(*c.vehicle_json);
      } else {
        c.vehicle = vehicle_params_from_json(v);
      }
    }
    if (j.contains("stint")) {
      const json& s = j.at("stint");
      reject_unknown(s, {"n_laps", "s0", "v0", "E_b0", "theta_m0", "theta_b0", "t_charge",
                         "E_b_target", "theta_b_target"},
                     "stint");
      read(s, "n_laps", c.n_laps);
      read(s, "s0", c.s0);
      read(s, "v0", c.v0);
      read(s, "E_b0", c.E_b0);
      read(s, "theta_m0", c.theta_m0);
      read(s, "theta_b0", c.theta_b0);
      read(s, "t_charge", c.t_charge);
      read(s, "E_b_target", c.E_b_target);
      read(s, "theta_b_target", c.theta_b_target);
    }
    if (j.contains("charge")) {
      const json& ch = j.at("charge");
      reject_unknown(ch, {"P_charge", "q_charge", "pit_loss"}, "charge");
      read(ch, "P_charge", c.charge.P_charge);
      read(ch, "q_charge", c.charge.q_charge);
      read(ch, "pit_loss", c.charge.pit_loss);
    }
    if (j.contains("maps")) {
      c.maps.clear();
      for (const json& m : j.at("maps")) {
        reject_unknown(m, {"id", "P_full"}, "throttle map");
        c.maps.push_back({m.at("id").get<int>(), m.at("P_full").get<double>()});
      }
    }
    if (j.contains("controller")) c.controller = controller_config_from_json(j.at("controller"));
    read(j, "scenario", c.scenario);
    if (j.contains("sweep")) {
      const json& sw = j.at("sweep");
      reject_unknown(sw, {"laps", "charge_times"}, "sweep");
      read(sw, "laps", c.sweep_laps);
      read(sw, "charge_times", c.sweep_charge_times);
    }
    if (j.contains("out")) c.out = resolve(base, j.at("out").get<std::string>());
    read(j, "seed", c.seed);
    read(j, "timescale", c.timescale);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json track;
  if (c.track.csv) {
    track["csv"] = c.track.csv->string();
  } else {
    track["seed"] = c.track.seed.value_or(c.seed);
    track["corners"] = c.track.corners;
    track["lap_length"] = c.track.lap_length;
  }
  if (!c.track.pit_zones.empty()) {
    json zones = json::array();
    for (const auto& z : c.track.pit_zones) {
      zones.push_back({{"s_start", z.s_start}, {"s_end", z.s_end}, {"v_limit", z.v_limit}});
    }
    track["pit_zones"] = zones;
  }
  json stint = {{"n_laps", c.n_laps}, {"s0", c.s0},         {"v0", c.v0},
                {"theta_m0", c.theta_m0}, {"theta_b0", c.theta_b0}};
  if (c.E_b0) stint["E_b0"] = *c.E_b0;
  if (c.t_charge) stint["t_charge"] = *c.t_charge;
  if (c.E_b_target) stint["E_b_target"] = *c.E_b_target;
  if (c.theta_b_target) stint["theta_b_target"] = *c.theta_b_target;
  json maps = json::array();
  for (const auto& m : c.maps) maps.push_back({{"id", m.id}, {"P_full", m.P_full}});
  return {{"track", track},
          {"vehicle", to_json(c.vehicle)},
          {"stint", stint},
          {"charge",
           {{"P_charge", c.charge.P_charge},
            {"q_charge", c.charge.q_charge},
            {"pit_loss", c.charge.pit_loss}}},
          {"maps", maps},
          {"controller", to_json(c.controller)},
          {"scenario", c.scenario},
          {"sweep", {{"laps", c.sweep_laps}, {"charge_times", c.sweep_charge_times}}},
          {"out", c.out.string()},
          {"seed", c.seed},
          {"timescale", c.timescale}};
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("out");  // where results go does not change them
  if (c.track.csv) j["track"].erase("csv");  // the file contents count, not its location
  std::uint64_t h = fnv1a(j.dump());
  if (c.track.csv) h = fnv1a(slurp(*c.track.csv), h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrackProfile load_track(const RunConfig& c) {
  TrackProfile t = c.track.csv ? load_track_csv(*c.track.csv)
                               : generate_synthetic_track(c.track.seed.value_or(c.seed),
                                                          c.track.corners, c.track.lap_length);
  if (c.track.pit_zones.empty()) return t;
  std::vector<PitZone> zones(t.pit_zones().begin(), t.pit_zones().end());
  zones.insert(zones.end(), c.track.pit_zones.begin(), c.track.pit_zones.end());
  return TrackProfile({t.samples().begin(), t.samples().end()}, std::move(zones));
}

StintBoundary make_boundary(const RunConfig& c, const VehicleParams& p, double lap_length) {
  StintBoundary b;
  b.s0 = c.s0;
  b.S_stint = c.s0 + c.n_laps * lap_length;
  b.x0 = {0.5 * p.m_eq * c.v0 * c.v0, c.E_b0.value_or(p.E_b_max), c.theta_m0, c.theta_b0,
          c.s0, 0.0};
  if (c.t_charge) {
    b.E_b_target = c.charge.E_b_target(*c.t_charge, p);
    b.theta_b_target = c.charge.theta_b_target(*c.t_charge, p);
  } else {
    b.E_b_target = *c.E_b_target;
    b.theta_b_target = *c.theta_b_target;
  }
  b.validate();
  return b;
}

StintSetup make_setup(const RunConfig& c) {
  TrackProfile track = load_track(c);
  const double lap = track.s_lap();
  StintBoundary b = make_boundary(c, c.vehicle, lap);
  return StintSetup{std::move(track), c.vehicle, b, c.maps, lap};
}

}  // namespace stintopt
