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

#ifndef STINTOPT_VEHICLE_HPP_
#define STINTOPT_VEHICLE_HPP_

#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

namespace stintopt {

inline constexpr double kGravity = 9.81;

/// Longitudinal vehicle, powertrain, and thermal parameters in SI units.
///
/// Forces are expressed at the wheels; loss terms are quadratic in force:
/// motor+inverter loss `alpha_m*F_m^2 + beta_m`, battery loss
/// `alpha_b*F_dc^2`. `v_max` is the straight-line speed cap used wherever
/// the lateral grip limit does not bind.
struct VehicleParams {
  double m_eq = 1250.0;          // kg, incl. rotating inertia
  double m = 1200.0;             // kg
  double rho_cd_A = 0.96;        // kg/m
  double rho_cl_A = 2.4;         // kg/m
  double c_r = 0.012;
  double mu0 = 1.6;
  double P_max = 350e3;          // W
  double P_regen = 150e3;        // W
  double F_m_max = 8000.0;       // N
  double F_brake_max = 25000.0;  // N
  double alpha_m = 1.0e-5;       // 1/N
  double beta_m = 30.0;          // N
  double alpha_b = 6.0e-6;       // 1/N
  double P_aux = 2000.0;         // W
  double C_m = 3.0e4;            // J/K
  double C_b = 5.0e5;            // J/K
  double h_m = 400.0;            // W/K
  double h_b = 800.0;            // W/K
  double theta_cool = 313.15;    // K
  double theta_m_max = 423.15;   // K
  double theta_b_max = 333.15;   // K
  double E_b_min = 20e6;         // J
  double E_b_max = 200e6;        // J
  double v_max = 85.0;           // m/s

  /// Throws InputError when an invariant is violated.
  void validate() const;

  /// Drag coefficient per unit kinetic energy, F_drag = c_a * E_kin.
  double drag_per_energy(double aero_scale = 1.0) const {
    return aero_scale * rho_cd_A / m_eq;
  }
};

/// Fictional but physically plausible parameter set used by every default
/// configuration and the acceptance runs.
VehicleParams default_vehicle_params();

/// Parses a JSON object carrying exactly the VehicleParams field names.
/// Unknown keys are rejected; every key except `v_max` is required.
VehicleParams vehicle_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VehicleParams& p);
VehicleParams load_vehicle_params(const std::filesystem::path& path);

}  // namespace stintopt

#endif  // STINTOPT_VEHICLE_HPP_
