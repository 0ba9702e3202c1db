#pragma once

#include <memory>
#include <random>
#include <span>
#include <vector>

#include "cotransport/payload_model.hpp"

namespace cotransport {

struct EstimatorConfig {
  double filter_variance = 1.0;  // sigma^2 of the likelihood
  double noise_variance = 1.0;   // sigma^2 of the simulated thrust noise
  double threshold = 0.8;        // neighbourhood mass required to stop
  int max_iterations = 60;
  bool compensate_idle_robots = true;
  int quadrature_nodes = 2000;
};

/// lambda_r for every (hypothesis, pair). NaN marks a hypothesis that cannot
/// rest on the contacts.
class LambdaTable {
 public:
  LambdaTable() = default;
  LambdaTable(std::size_t hypotheses, std::size_t pairs)
      : pairs_(pairs), values_(hypotheses * pairs, 0.0) {}

  std::size_t hypotheses() const { return pairs_ == 0 ? 0 : values_.size() / pairs_; }
  std::size_t pairs() const { return pairs_; }
  double at(std::size_t h, std::size_t p) const { return values_[h * pairs_ + p]; }
  double& at(std::size_t h, std::size_t p) { return values_[h * pairs_ + p]; }
  std::vector<double> column(std::size_t p) const;

 private:
  std::size_t pairs_ = 0;
  std::vector<double> values_;
};

LambdaTable build_lambda_table(const PayloadModel& payload, const ParameterGrid& grid,
                               std::span<const SlotPair> pairs, bool compensate_idle_robots);
// Same values, single thread.
LambdaTable build_lambda_table_serial(const PayloadModel& payload, const ParameterGrid& grid,
                                      std::span<const SlotPair> pairs, bool compensate_idle_robots);

struct MeasurementRecord {
  int pair_index = 0;
  SlotPair pair;
  double z = 0.0;
  double information = 0.0;  // I of the selected pair (nats)
  std::vector<double> information_all;
  bool outlier = false;
  long map_index = -1;
  PhysicalParams theta_map;
  double neighborhood_mass = 0.0;
  double posterior_sum = 1.0;  // after this update
};

struct EstimationState {
  ParameterGrid grid;
  std::vector<SlotPair> pairs;
  std::shared_ptr<const LambdaTable> lambda_table;
  std::vector<MeasurementRecord> history;
};

EstimationState make_estimation_state(const PayloadModel& payload, ParameterGrid grid,
                                      bool compensate_idle_robots);

struct EstimateResult {
  PhysicalParams theta_map;
  long map_index = -1;
  double neighborhood_mass = 0.0;
  int measurement_count = 0;
  bool converged = false;
};

// Gaussian density; zero for a NaN mean (infeasible hypothesis).
double likelihood(double z, double lambda, double variance);

/// Posterior after observing z at pair_index. If no hypothesis with prior
/// mass can explain z the prior is kept and the record is flagged an outlier.
EstimationState bayes_update(EstimationState state, int pair_index, double z, double variance);

/// I(theta; z) in nats for the Gaussian mixture predictive, by trapezoid
/// quadrature over [min lambda - 5 sigma, max lambda + 5 sigma].
double mutual_information(std::span<const double> probability, std::span<const double> lambda,
                          double variance, int nodes = 2000);
double mutual_information(const EstimationState& state, int pair_index, double variance,
                          int nodes = 2000);
// Predictive entropy H(z) of the same mixture.
double predictive_entropy(std::span<const double> probability, std::span<const double> lambda,
                          double variance, int nodes = 2000);

std::vector<double> mutual_information_all(const EstimationState& state, double variance, int nodes = 2000);
std::vector<double> mutual_information_all_serial(const EstimationState& state, double variance,
                                                  int nodes = 2000);

// argmax, ties to the lowest index.
int select_pair(std::span<const double> information);

EstimateResult check_convergence(const ParameterGrid& grid, double threshold);

struct EstimationRun {
  EstimateResult result;
  EstimationState state;
};

EstimationRun run_estimation(const PayloadModel& payload, const PhysicalParams& theta_true,
                             ParameterGrid grid, const EstimatorConfig& config, std::mt19937_64& rng);
// Starts from a prepared state, so one lambda table can serve many runs.
EstimationRun run_estimation(const PayloadModel& payload, const PhysicalParams& theta_true,
                             EstimationState initial, const EstimatorConfig& config, std::mt19937_64& rng);

}  // namespace cotransport
