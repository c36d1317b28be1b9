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


#ifndef STINTOPT_TESTS_FIXTURES_HPP_
#define STINTOPT_TESTS_FIXTURES_HPP_

#include <utility>
#include <vector>

#include "stintopt/liftcoast.hpp"
#include "stintopt/plan.hpp"

namespace stintopt::testing {

inline constexpr double kLap = 4200.0;
inline constexpr int kNominalLaps = 11;
inline constexpr double kEnergyPerLap = 16e6;  // J

inline std::vector<ThrottleMap> nominal_maps() {
  return {{0, 350e3}, {1, 340e3}, {2, 330e3}};
}

inline const TrackProfile& nominal_track() {
  static const TrackProfile track = generate_synthetic_track(1, 10, kLap);
  return track;
}

/// Flat, curvature-free lap sampled every metre.
inline TrackProfile straight_track(double lap) {
  std::vector<TrackSample> samples;
  for (int i = 0; i <= static_cast<int>(lap); ++i) {
    samples.push_back({static_cast<double>(i), 0.0, 0.0});
  }
  return TrackProfile(std::move(samples));
}

inline StintBoundary boundary_for(const VehicleParams& p, int laps,
                                  double energy_per_lap) {
  StintBoundary b;
  b.s0 = 0.0;
  b.S_stint = laps * kLap;
  b.x0 = {0.5 * p.m_eq * 30.0 * 30.0, p.E_b_max, 330.0, 323.15, 0.0, 0.0};
  b.E_b_target = p.E_b_max - laps * energy_per_lap;
  b.theta_b_target = p.theta_b_max - 1.0;
  return b;
}

}  // namespace stintopt::testing

#endif  // STINTOPT_TESTS_FIXTURES_HPP_
