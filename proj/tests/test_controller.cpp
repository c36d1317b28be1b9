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


#include "stintopt/controller.hpp"

#include <cmath>
#include <gtest/gtest.h>
#include <random>

#include "fixtures.hpp"
#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

using testing::boundary_for;
using testing::kEnergyPerLap;
using testing::nominal_maps;
using testing::nominal_track;

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::kFullyOnline, Variant::kFixedCostate,
                    Variant::kFixedCostateAndThreshold}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("Online"), InputError);
}

TEST(ControllerConfig, Validation) {
  ControllerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.K_p = -1.0;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.mpc_period = c.mpc_latency;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.delta_s_window = 0.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(ControllerConfig, JsonRoundTrip) {
  ControllerConfig c;
  c.variant = Variant::kFixedCostate;
  c.K_p = 0.7;
  c.v_coast_min = 40.0;
  c.active_map = 2;
  const ControllerConfig back = controller_config_from_json(to_json(c));
  EXPECT_EQ(back.variant, c.variant);
  EXPECT_EQ(back.K_p, c.K_p);
  EXPECT_EQ(back.v_coast_min, c.v_coast_min);
  EXPECT_EQ(back.active_map, 2);
}

TEST(FeedbackThreshold, OnPlanKeepsThreshold) {
  ControllerConfig c;
  EXPECT_EQ(feedback_threshold(-0.3, 1.0, 0.0, 0.0, c), -0.3);
}

TEST(FeedbackThreshold, OverConsumptionLowersThreshold) {
  ControllerConfig c;
  c.K_p = 1.0;
  c.K_i = 0.0;
  EXPECT_NEAR(feedback_threshold(-0.3, 1.0, -0.01, 0.0, c), -0.31, 1e-15);
}

TEST(FeedbackThreshold, PureIntegratorDriftsLinearly) {
  ControllerConfig c;
  c.K_p = 0.0;
  c.K_i = 0.02;
  const double e = 0.01;
  double prev = feedback_threshold(0.0, 1.0, e, 0.0, c);
  double step = 0.0;
  for (int km = 1; km <= 5; ++km) {
    const double next = feedback_threshold(0.0, 1.0, e, e * km, c);
    if (km > 1) {
      EXPECT_NEAR(next - prev, step, 1e-15);
    }
    step = next - prev;
    prev = next;
  }
  EXPECT_NEAR(step, 0.02 * 0.01, 1e-15);
}

TEST(EnergyRate, WorkedExample) {
  // 2.0 MJ over 4000 m is 500 J/m against a 30 MJ budget over 40 km.
  const double dx =
      energy_rate_error(2.0e6, 4000.0, 1.0e6, 100.0e6, 71.0e6, 0.0, 40000.0);
  EXPECT_NEAR(dx, -250.0, 1e-9);
}

TEST(EnergyRate, TerminalKineticEnergyTightensTarget) {
  const double loose = energy_rate_error(2.0e6, 4000.0, 1.0e6, 100.0e6, 71.0e6, 0.0, 40000.0);
  const double tight =
      energy_rate_error(2.0e6, 4000.0, 1.0e6, 100.0e6, 71.0e6, 0.0, 40000.0, 4.0e6);
  EXPECT_NEAR(tight - loose, 100.0, 1e-9);
}

TEST(EnergyRate, SignOfLaw) {
  ControllerConfig c;
  EXPECT_EQ(energy_rate_threshold(-0.2, 1.0, 0.0, 0.0, c), -0.2);
  EXPECT_LT(energy_rate_threshold(-0.2, 1.0, 0.1, 0.0, c), -0.2);
  EXPECT_GT(energy_rate_threshold(-0.2, 1.0, -0.1, 0.0, c), -0.2);
  EXPECT_THROW(energy_rate_error(1.0, 0.0, 0, 0, 0, 0, 1), InputError);
}

TEST(DecideSignal, Examples) {
  EXPECT_TRUE(decide_signal(-0.1, -0.2, false, 50.0, std::nullopt));
  EXPECT_FALSE(decide_signal(-0.1, -0.2, true, 50.0, std::nullopt));
  EXPECT_TRUE(decide_signal(-0.2, -0.2, false, 50.0, std::nullopt));
  EXPECT_FALSE(decide_signal(-0.3, -0.2, false, 50.0, std::nullopt));
  EXPECT_FALSE(decide_signal(-0.1, -0.2, false, 30.0, 35.0));
  EXPECT_TRUE(decide_signal(-0.1, -0.2, false, 35.0, 35.0));
}

TEST(DecideSignal, NeverWhileGripLimited) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(decide_signal(u(rng), u(rng), true, 50.0 + 30.0 * u(rng), std::nullopt));
  }
}

// Hand-built plan: co-state ramp, battery reference falling 1 kJ/m.
std::shared_ptr<const PlanSnapshot> toy_plan(int sequence, double lambda_star) {
  auto p = std::make_shared<PlanSnapshot>();
  p->sequence = sequence;
  p->s_begin = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    p->lambda.push_back(-1e-6 + 5e-10 * k);
    p->E_b_ref.push_back(100e6 - 1e3 * k);
  }
  p->lambda_star = lambda_star;
  p->map = {0, 300e3};
  return p;
}

StintBoundary toy_boundary(const VehicleParams& p) {
  StintBoundary b;
  b.S_stint = 2000.0;
  b.x0 = {0.5 * p.m_eq * 1600.0, 100e6, 330.0, 320.0, 0.0, 0.0};
  b.E_b_target = 98e6;
  b.theta_b_target = p.theta_b_max;
  return b;
}

TEST(Controller, IntegralResetsWhenPlanIsAdopted) {
  VehicleParams p;
  ControllerConfig c;
  c.K_i = 1.0;
  Controller ctl(c, toy_plan(0, -5e-7), toy_boundary(p), p);
  VehicleState x = toy_boundary(p).x0;
  for (int k = 0; k <= 100; ++k) {
    x.s = k;
    x.E_b = 100e6 - 1e3 * k - 0.01 * p.E_b_max;  // 1% below plan
    ctl.observe(x, false);
  }
  EXPECT_NEAR(ctl.feedback().integral, -0.01 * 0.1, 1e-12);
  EXPECT_NEAR(ctl.feedback().error, -0.01, 1e-12);

  ctl.post(toy_plan(1, -4e-7));
  ctl.observe(x, false);  // same position: no distance accumulated
  EXPECT_EQ(ctl.plans_adopted(), 1);
  EXPECT_EQ(ctl.plan().sequence, 1);
  EXPECT_EQ(ctl.feedback().integral, 0.0);
}

TEST(Controller, OnPlanThresholdIsPlanThreshold) {
  VehicleParams p;
  Controller ctl(ControllerConfig{}, toy_plan(0, -5e-7), toy_boundary(p), p);
  VehicleState x = toy_boundary(p).x0;
  x.s = 500.0;
  x.E_b = 100e6 - 500e3;
  ctl.observe(x, false);
  EXPECT_EQ(ctl.feedback().lambda_adj, -5e-7);
  EXPECT_EQ(ctl.feedback().lambda_at_s, -1e-6 + 5e-10 * 500);
  EXPECT_EQ(ctl.decide(x, false), ctl.feedback().lambda_at_s >= -5e-7);
}

TEST(Controller, RejectsMissingPlan) {
  VehicleParams p;
  EXPECT_THROW(Controller(ControllerConfig{}, nullptr, toy_boundary(p), p), InputError);
}

TEST(Controller, EnergyRateWindowProportionalUntilFilled) {
  VehicleParams p;
  ControllerConfig c;
  c.variant = Variant::kFixedCostateAndThreshold;
  c.delta_s_window = 500.0;
  c.K_i = 1.0;
  Controller ctl(c, toy_plan(0, -5e-7), toy_boundary(p), p);
  VehicleState x = toy_boundary(p).x0;
  for (int k = 0; k <= 400; ++k) {
    x.s = k;
    x.E_b = 100e6 - 2e3 * k;  // twice the budget rate
    ctl.observe(x, false);
  }
  EXPECT_EQ(ctl.feedback().integral, 0.0);
  EXPECT_GT(ctl.feedback().error, 0.0);
  EXPECT_LT(ctl.feedback().lambda_adj, -5e-7);
  for (int k = 401; k <= 800; ++k) {
    x.s = k;
    x.E_b = 100e6 - 2e3 * k;
    ctl.observe(x, false);
  }
  EXPECT_GT(ctl.feedback().integral, 0.0);
}

TEST(Controller, AntiWindupFreezesIntegralUnderCap) {
  VehicleParams p;
  ControllerConfig c;
  c.variant = Variant::kFixedCostateAndThreshold;
  c.delta_s_window = 100.0;
  Controller ctl(c, toy_plan(0, -5e-7), toy_boundary(p), p);
  VehicleState x = toy_boundary(p).x0;
  for (int k = 0; k <= 300; ++k) {
    x.s = k;
    x.E_b = 100e6 - 2e3 * k;
    ctl.observe(x, k > 150);
  }
  const double frozen = ctl.feedback().integral;
  EXPECT_GT(frozen, 0.0);
  x.s = 301;
  x.E_b -= 2e3;
  ctl.observe(x, true);
  EXPECT_EQ(ctl.feedback().integral, frozen);
}

class MpcUpdate : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    params_ = new VehicleParams();
    boundary_ = new StintBoundary(boundary_for(*params_, 3, kEnergyPerLap));
    initial_ = new std::shared_ptr<const PlanSnapshot>(initial_plan(
        *boundary_, nominal_track(), *params_, GripSchedule{}, nominal_maps(), {}));
  }
  static void TearDownTestSuite() {
    delete initial_;
    delete boundary_;
    delete params_;
  }
  PlanRequest request(Variant v, double s, double E_b_offset) const {
    const PlanSnapshot& plan = **initial_;
    PlanRequest r;
    r.variant = v;
    r.boundary = *boundary_;
    r.track = &nominal_track();
    r.params = *params_;
    r.maps = nominal_maps();
    r.previous = *initial_;
    r.sequence = 1;
    // Measured state: the plan's own reference at s, shifted in battery energy.
    SimulationOptions o;
    o.record = true;
    const StintSimulator sim(nominal_track(), *params_, GripSchedule{}, *boundary_,
                             sim_positions(plan), plan.lambda, o);
    const StintResult res = sim.run(plan.lambda_star, plan.map);
    const std::size_t k = plan.index_at(s);
    r.measured = {res.trajectory.E_kin[k], res.trajectory.E_b[k] + E_b_offset,
                  res.trajectory.theta_m[k], res.trajectory.theta_b[k],
                  res.trajectory.s[k], res.trajectory.t[k]};
    return r;
  }
  static std::vector<double> sim_positions(const PlanSnapshot& p) {
    std::vector<double> s(p.lambda.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = p.s_begin + static_cast<double>(k);
    return s;
  }
  static VehicleParams* params_;
  static StintBoundary* boundary_;
  static std::shared_ptr<const PlanSnapshot>* initial_;
};
VehicleParams* MpcUpdate::params_ = nullptr;
StintBoundary* MpcUpdate::boundary_ = nullptr;
std::shared_ptr<const PlanSnapshot>* MpcUpdate::initial_ = nullptr;

TEST_F(MpcUpdate, IdenticalRequestsGiveIdenticalPlans) {
  const PlanRequest r = request(Variant::kFixedCostate, 3000.0, 0.0);
  const auto a = mpc_update(r);
  const auto b = mpc_update(r);
  EXPECT_EQ(a->lambda_star, b->lambda_star);
  EXPECT_EQ(a->lambda, b->lambda);
  EXPECT_EQ(a->E_b_ref, b->E_b_ref);
  EXPECT_EQ(a->s_begin, r.measured.s);
}

TEST_F(MpcUpdate, EnergyDeficitLowersThreshold) {
  // 5% below the planned battery energy at the re-plan position.
  const double deficit = -0.05 * (*initial_)->E_b_ref_at(3000.0);
  for (Variant v : {Variant::kFixedCostate, Variant::kFullyOnline}) {
    const auto nominal = mpc_update(request(v, 3000.0, 0.0));
    const auto short_ = mpc_update(request(v, 3000.0, deficit));
    EXPECT_LT(short_->lambda_star, nominal->lambda_star) << to_string(v);
  }
}

TEST_F(MpcUpdate, ShrinksHorizonToMeasuredPosition) {
  const auto p = mpc_update(request(Variant::kFullyOnline, 6000.0, 0.0));
  ASSERT_TRUE(p->convex);
  EXPECT_EQ(p->convex->grid.front(), 6000.0);
  EXPECT_EQ(p->convex->grid.back(), boundary_->S_stint);
  EXPECT_EQ(p->lambda.size(), static_cast<std::size_t>(boundary_->S_stint - 6000.0) + 1);
}

TEST_F(MpcUpdate, PastFinishKeepsPreviousPlan) {
  PlanRequest r = request(Variant::kFixedCostate, 3000.0, 0.0);
  r.measured.s = boundary_->S_stint;
  EXPECT_EQ(mpc_update(r), *initial_);
}

TEST_F(MpcUpdate, FixedThresholdVariantDoesNotReplan) {
  EXPECT_THROW(mpc_update(request(Variant::kFixedCostateAndThreshold, 3000.0, 0.0)),
               InputError);
}

}  // namespace
}  // namespace stintopt
