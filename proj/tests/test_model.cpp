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


#include "stintopt/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

VehicleParams frictionless() {
  VehicleParams p;
  p.rho_cd_A = 0.0;
  p.c_r = 0.0;
  return p;
}

TEST(Derivatives, ForceBalance) {
  VehicleParams p;
  p.m_eq = 1000.0;
  p.rho_cd_A = 0.4;  // c_a = 4e-4 1/m
  p.m = 1000.0;
  p.c_r = 300.0 / (1000.0 * kGravity);
  const VehicleState x{2e5, 1e8, 330.0, 320.0, 0.0, 0.0};
  const auto d = derivatives(x, {4000.0, 0.0, 1.0}, GripState{}, p);
  EXPECT_NEAR(d.E_kin, 3620.0, 1e-9);
}

TEST(Derivatives, BatteryDrainWithLoss) {
  VehicleParams p;
  p.alpha_m = 0.0;
  p.beta_m = 0.0;
  p.P_aux = 0.0;
  p.alpha_b = 1e-5;
  const VehicleState x{2e5, 1e8, 330.0, 320.0, 0.0, 0.0};
  const auto d = derivatives(x, {1000.0, 0.0, 1.0}, GripState{}, p);
  EXPECT_NEAR(d.flows.battery_loss, 10.0, 1e-12);
  EXPECT_NEAR(d.E_b, -1010.0, 1e-9);
}

TEST(Derivatives, CoastingOnFlatDecelerates) {
  const VehicleParams p;
  for (double E : {1e3, 1e5, 1e6, 4e6}) {
    const VehicleState x{E, 1e8, 330.0, 320.0, 0.0, 0.0};
    EXPECT_LT(derivatives(x, {}, GripState{}, p).E_kin, 0.0);
  }
}

TEST(Derivatives, LossesNonNegativeAndFlowsBalance) {
  const VehicleParams p;
  const VehicleState x{1e6, 1e8, 350.0, 320.0, 0.0, 0.0};
  for (double F : {-8000.0, -2500.0, 0.0, 1200.0, 8000.0}) {
    const auto d = derivatives(x, {F, 0.0, 0.0}, GripState{}, p);
    EXPECT_GE(d.flows.motor_loss, 0.0);
    EXPECT_GE(d.flows.battery_loss, 0.0);
    const double out = d.flows.wheel + d.flows.motor_loss +
                       d.flows.battery_loss + d.flows.aux;
    EXPECT_NEAR(-d.E_b, out, 1e-9 * std::abs(out) + 1e-12);
  }
}

TEST(Derivatives, StallRejected) {
  const VehicleParams p;
  EXPECT_THROW(derivatives({0.0, 1e8, 330.0, 320.0, 12.0, 0.0}, {}, GripState{}, p),
               StallError);
}

// y' = -0.1 y through the generic stepper.
Derivative decay(double y) {
  Derivative d;
  d.E_kin = -0.1 * y;
  return d;
}

TEST(StepAb2, HandRecurrence) {
  VehicleState x{100.0, 0, 0, 0, 0, 0};
  const Derivative f0 = decay(x.E_kin);
  x = step_ab2(nullptr, f0, x, 1.0);
  EXPECT_DOUBLE_EQ(x.E_kin, 90.0);
  const Derivative f1 = decay(x.E_kin);
  x = step_ab2(&f0, f1, x, 1.0);
  EXPECT_DOUBLE_EQ(x.E_kin, 81.5);
  EXPECT_DOUBLE_EQ(x.s, 2.0);
}

TEST(StepAb2, ZeroDerivativeOnlyAdvancesPosition) {
  const VehicleState x{5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
  const Derivative zero;
  const auto y = step_ab2(&zero, zero, x, 2.5);
  VehicleState expect = x;
  expect.s += 2.5;
  EXPECT_EQ(y, expect);
}

TEST(StepAb2, VariableStepWeights) {
  const auto w = ab2_weights(1.0, 1.0);
  EXPECT_DOUBLE_EQ(w.curr, 1.5);
  EXPECT_DOUBLE_EQ(w.prev, 0.5);
  const auto v = ab2_weights(2.0, 1.0);
  EXPECT_DOUBLE_EQ(v.curr, 2.0);
  EXPECT_DOUBLE_EQ(v.prev, 1.0);
}

double decay_error(double h) {
  const int n = static_cast<int>(std::lround(10.0 / h));
  VehicleState x{100.0, 0, 0, 0, 0, 0};
  Derivative prev;
  for (int k = 0; k < n; ++k) {
    const Derivative f = decay(x.E_kin);
    x = step_ab2(k == 0 ? nullptr : &prev, f, x, h);
    prev = f;
  }
  return std::abs(x.E_kin - 100.0 * std::exp(-1.0));
}

TEST(StepAb2, SecondOrderOnExponential) {
  const double ratio = decay_error(0.25) / decay_error(0.125);
  EXPECT_NEAR(ratio, 4.1444, 1e-3);
  EXPECT_NEAR(ratio, 4.0, 0.3);
}

TEST(StepAb2, StallReportsPosition) {
  VehicleState x{10.0, 0, 0, 0, 40.0, 0};
  Derivative f;
  f.E_kin = -20.0;
  try {
    step_ab2(nullptr, f, x, 1.0);
    FAIL();
  } catch (const StallError& e) {
    EXPECT_DOUBLE_EQ(e.position(), 41.0);
  }
}

TEST(InvertForBound, RegenBeforeFriction) {
  VehicleParams p = frictionless();
  p.P_regen = 150e3;
  const double E = 0.5 * p.m_eq * 50.0 * 50.0;  // v = 50 m/s -> 3000 N regen
  const VehicleState x{E, 1e8, 330.0, 320.0, 0.0, 0.0};
  const auto u = invert_for_bound(x, E - 5000.0, nullptr, 1.0, p, GripState{});
  EXPECT_NEAR(u.F_m, -3000.0, 1e-6);
  EXPECT_NEAR(u.F_brake, -2000.0, 1e-6);
  EXPECT_DOUBLE_EQ(u.u_th, 0.0);
}

TEST(InvertForBound, FullThrottleTargetReturnsFullThrottle) {
  const VehicleParams p;
  const VehicleState x{4e5, 1e8, 330.0, 320.0, 100.0, 3.0};
  const GripState g;
  const double upper = motor_limits(x.E_kin, p).upper;
  const auto d = derivatives(x, {upper, 0.0, 1.0}, g, p);
  const auto next = step_ab2(nullptr, d, x, 1.0);
  const auto u = invert_for_bound(x, next.E_kin, nullptr, 1.0, p, g);
  EXPECT_NEAR(u.F_m, upper, 1e-6);
  EXPECT_NEAR(u.F_brake, 0.0, 1e-6);
  EXPECT_NEAR(u.u_th, 1.0, 1e-9);
}

TEST(InvertForBound, RoundTripThroughAb2) {
  const VehicleParams p;
  const GripState g{0.95, 0.9, std::nullopt};
  VehicleState x{1.8e6, 1e8, 330.0, 320.0, 0.0, 0.0};
  Derivative prev = derivatives(x, {2000.0, 0.0, 0.5}, g, p);
  x = step_ab2(nullptr, prev, x, 1.0);
  for (double delta : {-1000.0, -5000.0, -20000.0, 500.0}) {
    const double target = x.E_kin + delta;
    const auto u = invert_for_bound(x, target, &prev, 1.0, p, g, 0.01);
    const auto d = derivatives(x, u, g, p, 0.01);
    const auto next = step_ab2(&prev, d, x, 1.0);
    EXPECT_NEAR(next.E_kin, target, 1e-9 * target);
    EXPECT_LE(u.F_brake, 0.0);
  }
}

TEST(InvertForBound, Errors) {
  const VehicleParams p;
  const VehicleState x{1e6, 1e8, 330.0, 320.0, 77.0, 0.0};
  try {
    invert_for_bound(x, 1e6 - 1e5, nullptr, 1.0, p, GripState{});
    FAIL();
  } catch (const InfeasibleBrakingError& e) {
    EXPECT_DOUBLE_EQ(e.position(), 77.0);
    EXPECT_GT(e.shortfall(), 0.0);
  }
  EXPECT_THROW(invert_for_bound(x, 1e6 + 1e5, nullptr, 1.0, p, GripState{}),
               InputError);
  EXPECT_THROW(invert_for_bound(x, 0.0, nullptr, 1.0, p, GripState{}),
               InputError);
}

TEST(BrakingEnvelope, ConstantBoundUnchanged) {
  const std::vector<double> bound(20, 3e5);
  const std::vector<double> steps(19, 1.0);
  const auto env = braking_envelope(bound, steps,
                                    [](std::size_t, double) { return 5000.0; });
  EXPECT_EQ(env, bound);
}

TEST(BrakingEnvelope, RampBeforeDrop) {
  std::vector<double> bound(101, 4e5);
  for (std::size_t k = 50; k < bound.size(); ++k) bound[k] = 3e5;
  const std::vector<double> steps(100, 1.0);
  const auto env = braking_envelope(bound, steps,
                                    [](std::size_t, double) { return 5000.0; });
  EXPECT_DOUBLE_EQ(env[29], 4e5);
  EXPECT_DOUBLE_EQ(env[30], 4e5);
  EXPECT_DOUBLE_EQ(env[31], 3e5 + 19 * 5000.0);
  EXPECT_DOUBLE_EQ(env[40], 3e5 + 10 * 5000.0);
  EXPECT_DOUBLE_EQ(env[50], 3e5);
  for (std::size_t k = 0; k < env.size(); ++k) EXPECT_LE(env[k], bound[k]);
}

TEST(BrakingEnvelope, VehicleEnvelopeBelowBound) {
  const VehicleParams p;
  const auto track = generate_synthetic_track(1, 10, 4200.0);
  const auto grid = build_grid(track, 0.0, 4200.0, GridMode::kSimulation);
  const GripSchedule grip;
  const auto bound = max_kinetic_energy(track, p, grip, grid.nodes);
  const auto env = braking_envelope(bound, grid.nodes, track, grip, p);
  bool tighter = false;
  for (std::size_t k = 0; k < env.size(); ++k) {
    EXPECT_LE(env[k], bound[k]);
    tighter = tighter || env[k] < bound[k];
  }
  EXPECT_TRUE(tighter);
}

}  // namespace
}  // namespace stintopt
