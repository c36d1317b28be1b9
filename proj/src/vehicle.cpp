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

#include "stintopt/vehicle.hpp"

#include <array>
#include <fstream>
#include <string>
#include <utility>

#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

using Field = std::pair<const char*, double VehicleParams::*>;

constexpr std::array<Field, 24> kFields{{
    {"m_eq", &VehicleParams::m_eq},
    {"m", &VehicleParams::m},
    {"rho_cd_A", &VehicleParams::rho_cd_A},
    {"rho_cl_A", &VehicleParams::rho_cl_A},
    {"c_r", &VehicleParams::c_r},
    {"mu0", &VehicleParams::mu0},
    {"P_max", &VehicleParams::P_max},
    {"P_regen", &VehicleParams::P_regen},
    {"F_m_max", &VehicleParams::F_m_max},
    {"F_brake_max", &VehicleParams::F_brake_max},
    {"alpha_m", &VehicleParams::alpha_m},
    {"beta_m", &VehicleParams::beta_m},
    {"alpha_b", &VehicleParams::alpha_b},
    {"P_aux", &VehicleParams::P_aux},
    {"C_m", &VehicleParams::C_m},
    {"C_b", &VehicleParams::C_b},
    {"h_m", &VehicleParams::h_m},
    {"h_b", &VehicleParams::h_b},
    {"theta_cool", &VehicleParams::theta_cool},
    {"theta_m_max", &VehicleParams::theta_m_max},
    {"theta_b_max", &VehicleParams::theta_b_max},
    {"E_b_min", &VehicleParams::E_b_min},
    {"E_b_max", &VehicleParams::E_b_max},
    {"v_max", &VehicleParams::v_max},
}};

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) {
    throw InputError(std::string("vehicle parameter ") + name +
                     " must be positive");
  }
}

}  // namespace

void VehicleParams::validate() const {
  for (const auto& [name, value] :
       {std::pair{"m_eq", m_eq}, {"m", m}, {"P_max", P_max},
        {"P_regen", P_regen}, {"F_m_max", F_m_max},
        {"F_brake_max", F_brake_max}, {"C_m", C_m}, {"C_b", C_b},
        {"h_m", h_m}, {"h_b", h_b}, {"theta_cool", theta_cool},
        {"theta_m_max", theta_m_max}, {"theta_b_max", theta_b_max},
        {"E_b_max", E_b_max}, {"mu0", mu0}, {"v_max", v_max}}) {
    require_positive(value, name);
  }
  if (rho_cd_A < 0.0 || rho_cl_A < 0.0 || c_r < 0.0 || P_aux < 0.0 ||
      beta_m < 0.0 || E_b_min < 0.0) {
    throw InputError("vehicle drag, rolling, aux and loss offsets must be >= 0");
  }
  if (alpha_m < 0.0 || alpha_b < 0.0) {
    throw InputError("loss curvatures alpha_m, alpha_b must be >= 0");
  }
  if (!(E_b_min < E_b_max)) {
    throw InputError("E_b_min must be below E_b_max");
  }
  if (theta_m_max <= theta_cool || theta_b_max <= theta_cool) {
    throw InputError("temperature limits must exceed the coolant temperature");
  }
}

VehicleParams default_vehicle_params() { return VehicleParams{}; }

VehicleParams vehicle_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw InputError("vehicle parameters must be a JSON object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto& f : kFields) {
      if (item.key() == f.first) known = true;
    }
    if (!known) {
      throw InputError("unknown vehicle parameter '" + item.key() + "'");
    }
  }
  VehicleParams p;
  for (const auto& [name, member] : kFields) {
    auto it = j.find(name);
    if (it == j.end()) {
      if (std::string(name) == "v_max") continue;
      throw InputError(std::string("missing vehicle parameter '") + name + "'");
    }
    if (!it->is_number()) {
      throw InputError(std::string("vehicle parameter '") + name +
                       "' must be a number");
    }
    p.*member = it->get<double>();
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const VehicleParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, member] : kFields) j[name] = p.*member;
  return j;
}

VehicleParams load_vehicle_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vehicle file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("vehicle file " + path.string() + ": " + e.what());
  }
  return vehicle_params_from_json(j);
}

}  // namespace stintopt
