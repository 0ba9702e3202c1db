#include "cotransport/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>

#include "cotransport/equilibrium.hpp"
#include "cotransport/errors.hpp"

namespace cotransport {

namespace {

// Hypotheses below this posterior mass are dropped from the MI mixture.
constexpr double kSupportFloor = 1e-16;

double lambda_for(const PayloadModel& payload, const PhysicalParams& theta, SlotPair pair,
                  bool compensate_idle_robots) {
  Wrench extra;
  if (!compensate_idle_robots) {
    const std::vector<int> idle = default_idle_slots(payload, pair);
    extra = robot_self_weight_offset(payload, pair, idle, false);
  }
  return cantilever_thrust(payload, {pair, theta, extra}).lambda_r;
}

struct Mixture {
  std::vector<double> log_weight;
  std::vector<double> mean;
};

Mixture support_of(std::span<const double> probability, std::span<const double> lambda) {
  Mixture m;
  for (std::size_t h = 0; h < probability.size(); ++h) {
    if (probability[h] > kSupportFloor && std::isfinite(lambda[h])) {
      m.log_weight.push_back(std::log(probability[h]));
      m.mean.push_back(lambda[h]);
    }
  }
  // Renormalize over the kept hypotheses.
  double total = 0.0;
  for (double lw : m.log_weight) total += std::exp(lw);
  const double log_total = std::log(total);
  for (double& lw : m.log_weight) lw -= log_total;
  return m;
}

// Trapezoid quadrature of the mixture; `integrand` receives (log p(z),
// per-component log N, per-component log weight) and returns the value at z.
template <typename F>
double integrate_mixture(const Mixture& m, double variance, int nodes, F&& integrand) {
  const double sigma = std::sqrt(variance);
  const auto [lo_it, hi_it] = std::minmax_element(m.mean.begin(), m.mean.end());
  const double lo = *lo_it - 5.0 * sigma;
  const double hi = *hi_it + 5.0 * sigma;
  const double h = (hi - lo) / (nodes - 1);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * variance);
  const std::size_t k = m.mean.size();
  std::vector<double> log_n(k);
  double sum = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double z = lo + h * i;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = z - m.mean[c];
      log_n[c] = log_norm - d * d / (2.0 * variance);
      peak = std::max(peak, log_n[c] + m.log_weight[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(log_n[c] + m.log_weight[c] - peak);
    const double log_p = peak + std::log(s);
    const double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
    sum += w * integrand(log_p, log_n, m.log_weight);
  }
  return sum * h;
}

}  // namespace

std::vector<double> LambdaTable::column(std::size_t p) const {
  std::vector<double> col(hypotheses());
  for (std::size_t h = 0; h < col.size(); ++h) col[h] = at(h, p);
  return col;
}

LambdaTable build_lambda_table(const PayloadModel& payload, const ParameterGrid& grid,
                               std::span<const SlotPair> pairs, bool compensate_idle_robots) {
  LambdaTable table(grid.size(), pairs.size());
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long h = 0; h < n; ++h) {
    for (std::size_t p = 0; p < pairs.size(); ++p)
      table.at(h, p) = lambda_for(payload, grid.points()[h], pairs[p], compensate_idle_robots);
  }
  return table;
}

LambdaTable build_lambda_table_serial(const PayloadModel& payload, const ParameterGrid& grid,
                                      std::span<const SlotPair> pairs, bool compensate_idle_robots) {
  LambdaTable table(grid.size(), pairs.size());
  for (std::size_t h = 0; h < grid.size(); ++h) {
    for (std::size_t p = 0; p < pairs.size(); ++p)
      table.at(h, p) = lambda_for(payload, grid.points()[h], pairs[p], compensate_idle_robots);
  }
  return table;
}

EstimationState make_estimation_state(const PayloadModel& payload, ParameterGrid grid,
                                      bool compensate_idle_robots) {
  EstimationState state;
  state.pairs = adjacent_pairs(payload.candidates.size(), payload.rail.closed());
  state.lambda_table = std::make_shared<const LambdaTable>(
      build_lambda_table(payload, grid, state.pairs, compensate_idle_robots));
  state.grid = std::move(grid);
  return state;
}

double likelihood(double z, double lambda, double variance) {
  if (!std::isfinite(lambda)) return 0.0;
  const double d = z - lambda;
  return std::exp(-d * d / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance);
}

EstimationState bayes_update(EstimationState state, int pair_index, double z, double variance) {
  if (!(variance > 0.0)) throw ConfigError("filter variance must be > 0");
  const LambdaTable& table = *state.lambda_table;
  const std::vector<double>& prior = state.grid.probability();

  // Log domain so a far-off z does not underflow every term.
  std::vector<double> log_post(prior.size(), -std::numeric_limits<double>::infinity());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < prior.size(); ++h) {
    const double lambda = table.at(h, static_cast<std::size_t>(pair_index));
    if (prior[h] > 0.0 && std::isfinite(lambda) && std::isfinite(z)) {
      const double d = z - lambda;
      log_post[h] = std::log(prior[h]) - d * d / (2.0 * variance);
      peak = std::max(peak, log_post[h]);
    }
  }

  MeasurementRecord rec;
  rec.pair_index = pair_index;
  rec.pair = state.pairs.at(static_cast<std::size_t>(pair_index));
  rec.z = z;
  if (std::isfinite(peak)) {
    std::vector<double> post(prior.size(), 0.0);
    for (std::size_t h = 0; h < prior.size(); ++h)
      if (std::isfinite(log_post[h])) post[h] = std::exp(log_post[h] - peak);
    state.grid.set_probability(std::move(post));
  } else {
    rec.outlier = true;
  }
  const std::vector<double>& post = state.grid.probability();
  rec.posterior_sum = std::accumulate(post.begin(), post.end(), 0.0);
  state.history.push_back(std::move(rec));
  return state;
}

double mutual_information(std::span<const double> probability, std::span<const double> lambda,
                          double variance, int nodes) {
  if (!(variance > 0.0)) throw ConfigError("filter variance must be > 0");
  if (nodes < 2) throw ConfigError("need at least two quadrature nodes");
  const Mixture m = support_of(probability, lambda);
  if (m.mean.empty()) return 0.0;
  if (std::all_of(m.mean.begin(), m.mean.end(), [&](double v) { return v == m.mean.front(); }))
    return 0.0;
  // Divergence form: sum_theta p(theta) KL(N_theta || p(z)).
  const double info = integrate_mixture(
      m, variance, nodes,
      [](double log_p, const std::vector<double>& log_n, const std::vector<double>& log_w) {
        double acc = 0.0;
        for (std::size_t c = 0; c < log_n.size(); ++c) {
          const double a = log_n[c] + log_w[c];
          acc += std::exp(a) * (log_n[c] - log_p);
        }
        return acc;
      });
  return std::max(0.0, info);
}

double mutual_information(const EstimationState& state, int pair_index, double variance, int nodes) {
  const std::vector<double> col = state.lambda_table->column(static_cast<std::size_t>(pair_index));
  return mutual_information(state.grid.probability(), col, variance, nodes);
}

double predictive_entropy(std::span<const double> probability, std::span<const double> lambda,
                          double variance, int nodes) {
  const double conditional = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
  return conditional + mutual_information(probability, lambda, variance, nodes);
}

std::vector<double> mutual_information_all(const EstimationState& state, double variance, int nodes) {
  const long n = static_cast<long>(state.pairs.size());
  std::vector<double> info(state.pairs.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < n; ++p) info[p] = mutual_information(state, static_cast<int>(p), variance, nodes);
  return info;
}

std::vector<double> mutual_information_all_serial(const EstimationState& state, double variance,
                                                  int nodes) {
  std::vector<double> info(state.pairs.size(), 0.0);
  for (std::size_t p = 0; p < state.pairs.size(); ++p)
    info[p] = mutual_information(state, static_cast<int>(p), variance, nodes);
  return info;
}

int select_pair(std::span<const double> information) {
  if (information.empty()) throw ConfigError("no candidate pairs to select from");
  int best = 0;
  for (std::size_t p = 1; p < information.size(); ++p)
    if (information[p] > information[static_cast<std::size_t>(best)]) best = static_cast<int>(p);
  return best;
}

EstimateResult check_convergence(const ParameterGrid& grid, double threshold) {
  const std::vector<double>& prob = grid.probability();
  EstimateResult r;
  if (prob.empty()) return r;
  const auto map_it = std::max_element(prob.begin(), prob.end());  // first max wins ties
  r.map_index = static_cast<long>(map_it - prob.begin());
  r.theta_map = grid.points()[static_cast<std::size_t>(r.map_index)];
  const auto& center = grid.indices()[static_cast<std::size_t>(r.map_index)];
  double mass = 0.0;
  for (std::size_t h = 0; h < prob.size(); ++h) {
    const auto& idx = grid.indices()[h];
    if (std::abs(idx[0] - center[0]) <= 1 && std::abs(idx[1] - center[1]) <= 1 &&
        std::abs(idx[2] - center[2]) <= 1)
      mass += prob[h];
  }
  r.neighborhood_mass = std::clamp(mass, 0.0, 1.0);
  r.converged = r.neighborhood_mass > threshold;
  return r;
}

EstimationRun run_estimation(const PayloadModel& payload, const PhysicalParams& theta_true,
                             ParameterGrid grid, const EstimatorConfig& config, std::mt19937_64& rng) {
  return run_estimation(payload, theta_true,
                        make_estimation_state(payload, std::move(grid), config.compensate_idle_robots), config, rng);
}

EstimationRun run_estimation(const PayloadModel& payload, const PhysicalParams& theta_true,
                             EstimationState initial, const EstimatorConfig& config, std::mt19937_64& rng) {
  EstimationRun run{{}, std::move(initial)};
  EstimationState& state = run.state;

  EstimateResult result = check_convergence(state.grid, config.threshold);
  for (int iter = 0; iter < config.max_iterations && !result.converged; ++iter) {
    std::vector<double> info = mutual_information_all(state, config.filter_variance, config.quadrature_nodes);
    const int p = select_pair(info);
    const SlotPair pair = state.pairs[static_cast<std::size_t>(p)];
    Wrench extra;
    if (!config.compensate_idle_robots) {
      const std::vector<int> idle = default_idle_slots(payload, pair);
      extra = robot_self_weight_offset(payload, pair, idle, false);
    }
    const double z = simulate_measurement(payload, theta_true, pair, config.noise_variance, rng, extra);
    state = bayes_update(std::move(state), p, z, config.filter_variance);
    result = check_convergence(state.grid, config.threshold);

    MeasurementRecord& rec = state.history.back();
    rec.information = info[static_cast<std::size_t>(p)];
    rec.information_all = std::move(info);
    rec.map_index = result.map_index;
    rec.theta_map = result.theta_map;
    rec.neighborhood_mass = result.neighborhood_mass;
  }
  result.measurement_count = static_cast<int>(state.history.size());
  run.result = result;
  return run;
}

}  // namespace cotransport
