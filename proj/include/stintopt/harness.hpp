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


#ifndef STINTOPT_HARNESS_HPP_
#define STINTOPT_HARNESS_HPP_

#include <atomic>
#include <cstdint>
#include <deque>
#include <mutex>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stintopt/controller.hpp"
#include "stintopt/liftcoast.hpp"

namespace stintopt {

/// One disturbance over a stretch of the stint.
struct Disturbance {
  enum class Kind { kDrafting, kTireDegradation, kSpeedCap };
  Kind kind = Kind::kDrafting;
  double s_start = 0.0;
  double s_end = 0.0;
  double value = 1.0;  // aero scale, final grip scale, or cap [m/s]
};

enum class ScenarioKind { kNone, kDrafting, kTireDegradation, kFullCourseYellow, kComposite };

std::string to_string(ScenarioKind k);
/// Accepts None, Drafting, TireDegradation, FullCourseYellow (and the short
/// forms none, drafting, degradation, fcy). Throws InputError.
ScenarioKind parse_scenario(std::string_view name);

inline constexpr double kFcyCap = 80.0 / 3.6;  // m/s

/// A set of disturbances known to the plant. Named scenarios expand to
/// the standard desk-scale cases; live triggers append to the list.
struct DisturbanceScenario {
  ScenarioKind kind = ScenarioKind::kNone;
  std::vector<Disturbance> disturbances;

  /// Drafting: aero 0.9 over the whole stint. TireDegradation: grip falls
  /// linearly from 1.0 at s0 to 0.9 at S_stint. FullCourseYellow: lap
  /// `fcy_lap` (1-based, laps counted from s=0) capped at 80 km/h.
  static DisturbanceScenario named(ScenarioKind kind, double s0, double S_stint,
                                   double lap_length, int fcy_lap = 2);
  static DisturbanceScenario composite(std::vector<DisturbanceScenario> parts);

  std::string name() const { return to_string(kind); }

  /// Ground truth seen by the plant.
  GripSchedule plant() const;
  /// What a re-planning controller knows at `s`: active drafting persists,
  /// the currently measured grip is assumed constant, and an active speed
  /// cap is known until its announced end. Nothing ahead of `s` is known.
  GripSchedule knowledge(double s) const;
  bool cap_active(double s) const;
};

struct DriverModel {
  enum class Mode { kAutomated, kExternal };
  Mode mode = Mode::kAutomated;
  double reaction_delay = 0.0;  // m

  void validate() const;
};

/// Track, vehicle, stint and maps shared by every run of an experiment.
struct StintSetup {
  TrackProfile track;
  VehicleParams params;
  StintBoundary boundary;
  std::vector<ThrottleMap> maps;
  double lap_length = 0.0;
};

struct TelemetryRow {
  double s = 0.0, t = 0.0, E_kin = 0.0, E_b = 0.0, theta_m = 0.0, theta_b = 0.0;
  double F_m = 0.0, F_brake = 0.0, u_th = 0.0;
  double lambda_kin = 0.0, lambda_adj = 0.0, error = 0.0;
  bool coast_signal = false;   // controller output
  bool coasting = false;       // what the plant did
  bool grip_limited = false;
  bool cap_active = false;
  bool driver_coast = false;   // coast chosen by an external driver
};

struct LapSummary {
  int lap = 0;
  double t_lap = 0.0;
  double E_b_used = 0.0;
  double max_theta_m = 0.0;
  double max_theta_b = 0.0;
  std::vector<double> coast_onsets;  // s within the lap
};

struct StintMetrics {
  bool completed = true;
  std::string failure;
  double t_stint = 0.0;
  double terminal_E_b = 0.0;
  /// (terminal E_b - target) / E_b_max; negative means short.
  double terminal_E_b_error = 0.0;
  double terminal_theta_b = 0.0;
  double max_theta_m = 0.0;
  double max_theta_b = 0.0;
  std::vector<std::string> violations;
  std::optional<double> time_loss_pct;
  double audit_residual = 0.0;  // relative battery-energy bookkeeping error
  int plan_updates = 0;
  int failed_updates = 0;
};

/// Discrete occurrence during a run: plan_updated, plan_failed, fcy_start,
/// fcy_end, disturbance, violation, stint_end.
struct Event {
  std::string kind;
  double s = 0.0;
  double t = 0.0;
  std::string detail;
};

nlohmann::json to_json(const Event& e);

struct StintLog {
  std::string variant;
  std::string scenario;
  std::vector<TelemetryRow> rows;
  std::vector<LapSummary> laps;
  std::vector<Event> events;
  EnergyFlows flows;
  StintMetrics metrics;
};

void write_telemetry_csv(const StintLog& log, const std::filesystem::path& path);
nlohmann::json metrics_json(const StintLog& log);

/// Telemetry-derived metrics and lap summaries. Exposed so they can be
/// recomputed from a stored log.
void summarize(StintLog& log, const StintSetup& setup);

/// Step-by-step closed loop: plant, driver, controller and planner. Batch
/// runs and the live server both drive this class.
class ClosedLoop {
 public:
  enum class Planner { kLogical, kBackground };

  ClosedLoop(const StintSetup& setup, ControllerConfig config,
             DisturbanceScenario scenario, DriverModel driver,
             std::shared_ptr<const PlanSnapshot> initial,
             Planner planner = Planner::kLogical);
  ~ClosedLoop();
  ClosedLoop(const ClosedLoop&) = delete;
  ClosedLoop& operator=(const ClosedLoop&) = delete;

  bool finished() const { return finished_; }
  /// Advances one 1 m step; returns the row recorded for the node left.
  const TelemetryRow& step();
  /// Runs to the end of the stint.
  void run();

  // Live commands, applied between steps. A triggered caution covers the
  // next full lap; drafting and degradation start at the current position.
  void trigger(ScenarioKind kind);
  void set_variant(Variant v);
  void set_map(int id);
  /// External driver input: true = throttle, false = lift. Switches the
  /// driver to external mode; std::nullopt returns to automated mode.
  void set_driver_throttle(std::optional<bool> throttle);

  const VehicleState& state() const { return x_; }
  const Controller& controller() const { return *controller_; }
  const DisturbanceScenario& scenario() const { return scenario_; }
  const StintLog& log() const { return log_; }
  /// Events since the last call.
  std::vector<Event> drain_events();
  /// Finalizes metrics and hands over the log.
  StintLog finish();

 private:
  void rebuild_envelope();
  void schedule_plans();
  PlanRequest make_request() const;
  void fail(const std::string& what);
  void event(std::string kind, std::string detail = "");
  void launch_plan();
  void collect_worker(bool wait);

  const StintSetup& setup_;
  DisturbanceScenario scenario_;
  DriverModel driver_;
  Planner planner_;
  GripSchedule plant_;
  Grid grid_;
  std::vector<double> envelope_, grade_;
  std::vector<GripState> grip_;
  std::unique_ptr<Controller> controller_;

  VehicleState x_;
  Derivative prev_;
  bool have_prev_ = false;
  double h_prev_ = 0.0;
  std::size_t k_ = 0;
  bool finished_ = false;
  std::optional<bool> external_throttle_;
  std::deque<bool> delayed_;  // coast signals waiting out the reaction delay

  double next_request_t_ = 0.0;
  struct Pending {
    double deliver_t;
    std::shared_ptr<const PlanSnapshot> plan;
  };
  std::vector<Pending> queue_;
  struct WorkerSlot {
    std::mutex mutex;
    bool done = false;
    double request_t = 0.0;
    std::shared_ptr<const PlanSnapshot> plan;
    std::string error;
  };
  std::thread worker_;
  std::shared_ptr<WorkerSlot> slot_;
  int sequence_ = 0;
  ThrottleMap map_;
  bool cap_was_active_ = false;

  StintLog log_;
  std::size_t events_read_ = 0;
};

/// Batch closed-loop run. `initial` is the pre-race plan (nominal model);
/// computed when null.
StintLog run_closed_loop(const ControllerConfig& config,
                         const DisturbanceScenario& scenario, const StintSetup& setup,
                         const DriverModel& driver = {},
                         std::shared_ptr<const PlanSnapshot> initial = nullptr);

struct OracleResult {
  double t_oracle = 0.0;  // active map cost
  PlanSolution plan;
  CoastPlan coast;
  std::vector<double> E_kin_max;  // grip bound (before braking) on the optimizer grid
};

/// Non-causal benchmark: the convex plan and the threshold bisection, both on
/// the disturbed model.
OracleResult oracle_solve(const DisturbanceScenario& scenario, const StintSetup& setup,
                          const ControllerConfig& config = {});

struct ComparisonRow {
  std::string scenario;
  std::string variant;
  double t_stint = 0.0;
  double t_oracle = 0.0;
  double loss_pct = 0.0;
  double terminal_Eb_err = 0.0;
  double max_theta_m = 0.0;
  double max_theta_b = 0.0;
  bool energy_ok = false;   // terminal E_b >= target - 0.5% of E_b_max
  bool thermal_ok = false;  // all temperature limits held
  bool completed = false;
  std::string failure;
};

std::vector<ComparisonRow> compare_variants(const std::vector<ScenarioKind>& scenarios,
                                            const std::vector<Variant>& variants,
                                            const StintSetup& setup,
                                            const ControllerConfig& base);
void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::filesystem::path& path);

/// Pit-stop charging: the pack must be refilled to E_b_max in t_charge, and
/// charging heats it, so a longer charge needs a cooler stint end.
struct ChargeModel {
  double P_charge = 300e3;    // W
  double q_charge = 0.02;     // share of charged energy turned into battery heat
  double pit_loss = 0.0;      // s, fixed pit-lane time on top of charging

  double E_b_target(double t_charge, const VehicleParams& p) const;
  double theta_b_target(double t_charge, const VehicleParams& p) const;
};

struct SweepRow {
  int n_laps = 0;
  double t_charge = 0.0;
  double E_b_target = 0.0;
  double theta_b_target = 0.0;
  bool feasible = false;
  double t_stint = 0.0;
  double average = 0.0;  // (t_stint + t_charge + pit_loss) / n_laps
  bool optimal = false;  // best t_charge for this lap count
  bool capacity_limited = false;  // target at E_b_min
};

/// Grid over lap counts and charge times using the setup's track, vehicle
/// and maps; the stint boundary's x0 is reused for every lap count.
std::vector<SweepRow> sweep_strategy(const std::vector<int>& laps,
                                     const std::vector<double>& charge_times,
                                     const ChargeModel& charge, const StintSetup& setup);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace stintopt

#endif  // STINTOPT_HARNESS_HPP_
