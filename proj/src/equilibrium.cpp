#include "cotransport/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "cotransport/errors.hpp"
#include "cotransport/lp.hpp"

namespace cotransport {

namespace {

constexpr double kActiveTol = 1e-9;

// Nonnegative exact solution of W_S f = rhs on the given contact subset, if any.
bool solve_on_subset(const Eigen::MatrixXd& W, const std::vector<int>& subset,
                     const Eigen::Vector3d& rhs, Eigen::VectorXd& f) {
  Eigen::MatrixXd Ws(3, subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) Ws.col(i) = W.col(subset[i]);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ws);
  if (qr.rank() < static_cast<Eigen::Index>(subset.size())) return false;
  f = qr.solve(rhs);
  if ((Ws * f - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) return false;
  return (f.array() >= -kActiveTol).all();
}

// Depth-first preorder over sorted index subsets visits them lexicographically.
bool first_feasible_subset(const Eigen::MatrixXd& W, const Eigen::Vector3d& rhs,
                           std::vector<int>& prefix, Eigen::VectorXd& f) {
  const int k = static_cast<int>(W.cols());
  const int start = prefix.empty() ? 0 : prefix.back() + 1;
  for (int c = start; c < k; ++c) {
    prefix.push_back(c);
    if (solve_on_subset(W, prefix, rhs, f)) return true;
    if (prefix.size() < 3 && first_feasible_subset(W, rhs, prefix, f)) return true;
    prefix.pop_back();
  }
  return false;
}

}  // namespace

EquilibriumSolution solve_cantilever(std::span<const Vec2> contacts, const Wrench& load,
                                     const Wrench& lift) {
  const int k = static_cast<int>(contacts.size());
  Eigen::MatrixXd W(3, k);
  for (int c = 0; c < k; ++c) W.col(c) = thrust_wrench(contacts[c]).vec();

  Eigen::MatrixXd A(3, k + 1);
  A.leftCols(k) = W;
  A.col(k) = lift.vec();
  const Eigen::Vector3d b = -load.vec();
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(k + 1);
  cost(k) = 1.0;

  const LpResult lp = solve_standard_form_lp(A, b, cost);
  EquilibriumSolution sol;
  if (lp.status == LpStatus::kUnbounded)
    throw GeometryError("cantilever thrust unbounded: lift wrench is opposed by the contact cone");
  if (lp.status == LpStatus::kInfeasible) {
    sol.lambda_r = std::numeric_limits<double>::quiet_NaN();
    return sol;
  }
  sol.feasible = true;
  sol.lambda_r = lp.x(k);

  // Contact forces are not unique when more than three contacts exist; pick
  // the lexicographically smallest active set reproducing the optimum.
  const Eigen::Vector3d rhs = b - lift.vec() * sol.lambda_r;
  sol.contact_forces.assign(k, 0.0);
  std::vector<int> subset;
  Eigen::VectorXd f;
  if (rhs.norm() <= kActiveTol) {
    // Payload weightless at the optimum: no contact carries load.
  } else if (first_feasible_subset(W, rhs, subset, f)) {
    for (std::size_t i = 0; i < subset.size(); ++i) sol.contact_forces[subset[i]] = std::max(0.0, f(i));
  } else {
    for (int c = 0; c < k; ++c) sol.contact_forces[c] = lp.x(c);
  }
  Eigen::Vector3d net = load.vec() + lift.vec() * sol.lambda_r;
  for (int c = 0; c < k; ++c) {
    net += W.col(c) * sol.contact_forces[c];
    if (sol.contact_forces[c] > kActiveTol) sol.active_set.push_back(c);
  }
  sol.residual = net;
  return sol;
}

EquilibriumSolution cantilever_thrust(const PayloadModel& payload, const CantileverProblem& problem) {
  const auto [i1, i2] = problem.pair;
  const int n = static_cast<int>(payload.candidates.size());
  if (i1 == i2 || i1 < 0 || i2 < 0 || i1 >= n || i2 >= n)
    throw ConfigError("invalid measuring pair");
  if (!(problem.hypothesis.mass > 0.0)) throw ConfigError("hypothesis mass must be > 0");
  if (payload.contacts.empty()) throw ConfigError("payload has no contacts");

  const Vec2 p1 = payload.candidate_point(i1);
  const Vec2 p2 = payload.candidate_point(i2);
  const Wrench load = gravity_wrench(problem.hypothesis, payload.gravity) +
                      robot_weight_wrench(p1, payload.robot_mass, payload.gravity) +
                      robot_weight_wrench(p2, payload.robot_mass, payload.gravity) +
                      problem.extra_load;
  // lambda_r is the pair total, split equally between the two robots.
  const Wrench lift = 0.5 * (thrust_wrench(p1) + thrust_wrench(p2));
  return solve_cantilever(payload.contacts, load, lift);
}

double simulate_measurement(const PayloadModel& payload, const PhysicalParams& theta_true,
                            SlotPair pair, double noise_variance, std::mt19937_64& rng,
                            const Wrench& extra_load) {
  if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be >= 0");
  const EquilibriumSolution sol = cantilever_thrust(payload, {pair, theta_true, extra_load});
  if (noise_variance == 0.0) return sol.lambda_r;
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
  return sol.lambda_r + noise(rng);
}

std::vector<int> default_idle_slots(const PayloadModel& payload, SlotPair pair) {
  const int n = static_cast<int>(payload.candidates.size());
  std::vector<int> idle;
  for (int step = 1; step < n && static_cast<int>(idle.size()) < payload.n_robots - 2; ++step) {
    const int slot = (pair.second + step) % n;
    if (slot != pair.first && slot != pair.second) idle.push_back(slot);
  }
  return idle;
}

Wrench robot_self_weight_offset(const PayloadModel& payload, SlotPair pair,
                                std::span<const int> idle_slots, bool compensated) {
  Wrench total;
  for (int slot : idle_slots) {
    if (slot == pair.first || slot == pair.second)
      throw ConfigError("idle robot slot overlaps the measuring pair");
    if (!compensated)
      total += robot_weight_wrench(payload.candidate_point(slot), payload.robot_mass, payload.gravity);
  }
  return total;
}

}  // namespace cotransport
