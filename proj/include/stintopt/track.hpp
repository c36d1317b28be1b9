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

#ifndef STINTOPT_TRACK_HPP_
#define STINTOPT_TRACK_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "stintopt/vehicle.hpp"

namespace stintopt {

struct TrackSample {
  double s = 0.0;      // m
  double kappa = 0.0;  // 1/m, signed
  double grade = 0.0;  // rad

  bool operator==(const TrackSample&) const = default;
};

/// Speed-limited stretch of the lap (pit lane).
struct PitZone {
  double s_start = 0.0;
  double s_end = 0.0;
  double v_limit = 0.0;  // m/s

  bool operator==(const PitZone&) const = default;
};

/// One lap of the circuit in the space domain. The profile is periodic:
/// queries beyond `s_lap()` wrap around, which tiles the lap over multi-lap
/// horizons.
class TrackProfile {
 public:
  /// Samples must start at s=0, be strictly increasing, and end at the lap
  /// length. Throws InputError otherwise.
  explicit TrackProfile(std::vector<TrackSample> samples,
                        std::vector<PitZone> pit_zones = {});

  double s_lap() const { return samples_.back().s; }
  std::span<const TrackSample> samples() const { return samples_; }
  std::span<const PitZone> pit_zones() const { return pit_zones_; }

  /// Largest distance between consecutive samples.
  double max_spacing() const;

  /// Linear interpolation at an arbitrary (possibly multi-lap) distance.
  double kappa_at(double s) const;
  double grade_at(double s) const;
  /// Pit-lane speed limit at `s`, if inside a pit zone.
  std::optional<double> pit_limit_at(double s) const;

  /// Position within the lap, in [0, s_lap).
  double wrap(double s) const;

  bool operator==(const TrackProfile&) const = default;

 private:
  std::size_t locate(double x) const;

  std::vector<TrackSample> samples_;
  std::vector<PitZone> pit_zones_;
};

/// Grip and aerodynamic multipliers seen by the vehicle at one point.
struct GripState {
  double mu_scale = 1.0;
  double aero_scale = 1.0;
  std::optional<double> v_cap;  // m/s

  /// Throws InputError when outside mu_scale, aero_scale in (0, 1.5] or
  /// v_cap <= 0.
  void validate() const;
  bool operator==(const GripState&) const = default;
};

/// Distance-dependent grip: a base state with an optional linear grip ramp,
/// aero windows, and speed-cap windows layered on top.
class GripSchedule {
 public:
  struct Ramp {
    double s_start = 0.0;
    double s_end = 0.0;
    double mu_from = 1.0;
    double mu_to = 1.0;
  };
  struct Window {
    double s_start = 0.0;
    double s_end = 0.0;
    double value = 1.0;  // aero scale or speed cap [m/s]
  };

  GripSchedule() = default;
  explicit GripSchedule(GripState base) : base_(base) { base_.validate(); }

  GripSchedule& with_mu_ramp(Ramp ramp);
  GripSchedule& with_aero_window(Window w);
  GripSchedule& with_cap_window(Window w);

  GripState at(double s) const;

  const GripState& base() const { return base_; }
  const std::optional<Ramp>& mu_ramp() const { return mu_ramp_; }
  std::span<const Window> aero_windows() const { return aero_windows_; }
  std::span<const Window> cap_windows() const { return cap_windows_; }

 private:
  GripState base_;
  std::optional<Ramp> mu_ramp_;
  std::vector<Window> aero_windows_;
  std::vector<Window> cap_windows_;
};

/// Cumulative distances of the discretization nodes over [s0, s_stint].
struct Grid {
  std::vector<double> nodes;

  std::size_t size() const { return nodes.size(); }
  std::size_t intervals() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  double step(std::size_t k) const { return nodes[k + 1] - nodes[k]; }
  std::vector<double> steps() const;
  double front() const { return nodes.front(); }
  double back() const { return nodes.back(); }
};

enum class GridMode { kOptimizer, kSimulation };

inline constexpr double kCornerCurvature = 1.0 / 200.0;   // 1/m
inline constexpr double kCornerStep = 5.0;                // m
inline constexpr double kStraightStep = 25.0;             // m
inline constexpr double kStepTransition = 50.0;           // m
inline constexpr double kSimulationStep = 1.0;            // m

/// Optimizer mode: 5 m steps where |kappa| >= 1/200, 25 m on straights, and
/// a linear blend over 50 m in between; a step never exceeds the desired
/// step anywhere inside it; a tail shorter than 5 m past the last full step
/// is split evenly over the final two steps. Simulation mode: uniform 1 m
/// steps. Both end exactly at s0 and s_stint.
Grid build_grid(const TrackProfile& track, double s0, double s_stint,
                GridMode mode);

/// Grip-limited kinetic-energy bound per grid node:
///   v^2 = mu*m*g / (m*|kappa| - mu*rho_cl_A/2), capped by v_max, the
///   schedule's v_cap and pit limits; E = m_eq*v^2/2.
/// Throws DownforceUnboundedError when the denominator is non-positive at a
/// curved node and no finite cap exists.
std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleParams& params,
                                       const GripSchedule& grip,
                                       std::span<const double> nodes);
std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleParams& params,
                                       const GripState& grip,
                                       const Grid& grid);

/// Grip-limited speed bound at one point.
double max_speed(double kappa, const VehicleParams& params,
                 const GripState& grip, std::optional<double> extra_cap);

/// Deterministic desk-scale circuit: alternating straights and
/// constant-radius arcs joined by linear curvature ramps, one full turn of
/// heading per lap, 1 m sampling. Throws InputError when the corners do not
/// fit in the lap.
TrackProfile generate_synthetic_track(std::uint64_t seed, int n_corners,
                                      double s_lap);

/// CSV with header `s,kappa,grade`. Duplicate s values are rejected.
TrackProfile load_track_csv(const std::filesystem::path& path);
void save_track_csv(const TrackProfile& track,
                    const std::filesystem::path& path);

}  // namespace stintopt

#endif  // STINTOPT_TRACK_HPP_
