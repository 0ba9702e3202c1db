#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cotransport/canonical_json.hpp"
#include "cotransport/estimator.hpp"
#include "cotransport/flightsim.hpp"
#include "cotransport/formation.hpp"
#include "cotransport/rearrange.hpp"
#include "cotransport/scenario.hpp"

namespace cotransport {

// Rail moves that bring the robots into the layout of one measurement: the
// pair on its two slots, idle robots on the following ones.
struct EstimationMove {
  int iteration = 0;
  std::vector<double> layout;         // per robot, arc length
  std::optional<RearrangePlan> plan;  // empty when the planner refused
  std::string error;
};

struct MissionReport {
  std::string scenario;
  std::uint64_t seed = 0;
  PhysicalParams theta_true;

  std::optional<EstimateResult> estimate;
  std::vector<MeasurementRecord> trace;
  std::vector<EstimationMove> estimation_moves;
  std::optional<Formation> formation;
  OptimizationReport formation_report;
  PhysicalParams formation_theta;  // hypothesis the formation and controller use
  int formation_rank = 0;          // 0 = MAP, k = k-th fallback inside the neighbourhood
  std::vector<double> initial_arc;  // where the robots stand before the formation move
  std::optional<RearrangePlan> rearrangement;
  std::optional<FlightLog> flight;

  std::string failed_stage;  // empty when every stage ran
  std::string error;
  bool success = false;
};

/// estimate -> optimize formation -> rearrange -> fly, one rng stream seeded
/// from the scenario. Robots start in the layout of the first measurement and
/// every later layout is planned on the rail; refused moves are logged only. When no feasible formation exists at the MAP point the
/// other hypotheses of its neighbourhood are tried by posterior mass. Stage
/// failures stop the pipeline and are recorded in the report; configuration
/// errors throw.
MissionReport run_mission(const Scenario& scenario);

// Final distance to the target within tolerance and no drop.
bool flight_succeeded(const FlightLog& log, double tolerance);

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  PhysicalParams theta_true;
  PhysicalParams theta_map;
  bool converged = false;
  int measurements = 0;
  std::array<double, 3> normalized_error{};  // |map - truth| / resolution
  std::array<double, 3> signed_error{};      // (map - truth) / resolution
  double max_normalization_error = 0.0;      // max |sum p - 1| over the updates
};

struct SweepStats {
  int trials = 0;
  std::array<double, 3> mean{};  // of normalized_error
  std::array<double, 3> stddev{};
  std::array<double, 3> max{};
  std::array<double, 3> signed_mean{};
  std::array<double, 3> signed_stddev{};
  int converged = 0;
  double convergence_rate = 0.0;
  int within_one_step = 0;  // every axis within one resolution step
  long total_measurements = 0;
  double mean_measurements = 0.0;
  int min_measurements = 0;
  int max_measurements = 0;
  double max_normalization_error = 0.0;
};

struct SweepResult {
  std::vector<TrialRecord> trials;
  SweepStats stats;
};

// Trial k uses seed + k; its true parameters are drawn uniformly from the grid.
SweepResult run_sweep(const Scenario& scenario, int n_trials);
// Same trials, single thread.
SweepResult run_sweep_serial(const Scenario& scenario, int n_trials);
SweepStats compute_sweep_stats(const std::vector<TrialRecord>& trials);
// Mean and stddev of the normalized error both at most 1 on every axis.
bool sweep_passes(const SweepStats& stats);

Json estimate_json(const EstimateResult& r);
Json measurement_json(const MeasurementRecord& r, int iteration);
Json formation_json(const Formation& f, const OptimizationReport& report);
Json rearrangement_json(const RearrangePlan& plan, const std::vector<double>& initial_arc);
Json estimation_move_json(const EstimationMove& m);
Json flight_summary_json(const FlightLog& log, const TrajectorySpec& trajectory, double tolerance);
Json mission_json(const MissionReport& report, const Scenario& scenario);
Json trial_json(const TrialRecord& t);
TrialRecord trial_from_json(const Json& j);
Json sweep_json(const SweepResult& result, const Scenario& scenario);

void write_estimation_jsonl(std::ostream& out, const std::vector<MeasurementRecord>& trace);
void write_trials_jsonl(std::ostream& out, const std::vector<TrialRecord>& trials);

struct FormationComparison {
  FlightLog optimized;
  FlightLog even;
  Formation optimized_formation;
  Formation even_formation;
  OptimizationReport report;
};

/// Flies the optimized and the even formation for the scenario's true
/// parameters (estimate taken as exact).
FormationComparison compare_formations(const Scenario& scenario);
// t, z_ref, z_opt, z_even, roll/pitch for both; cells after a drop stay empty.
void write_comparison_csv(std::ostream& out, const FormationComparison& c);
Json comparison_json(const FormationComparison& c, const Scenario& scenario);

}  // namespace cotransport
