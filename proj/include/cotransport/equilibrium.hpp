#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cotransport/payload_model.hpp"

namespace cotransport {

struct CantileverProblem {
  SlotPair pair;
  PhysicalParams hypothesis;
  // Additional load on the payload, e.g. idle robots that do not cancel their weight.
  Wrench extra_load{};
};

struct EquilibriumSolution {
  // False when the hypothesis cannot rest on the contacts at all.
  bool feasible = false;
  // Combined thrust of the measuring pair at the verge of tipping (N).
  double lambda_r = 0.0;
  std::vector<double> contact_forces;
  std::vector<int> active_set;
  Eigen::Vector3d residual = Eigen::Vector3d::Zero();
};

/// Largest lift multiplier lambda >= 0 for which nonnegative contact forces
/// balance   sum_c f_c * thrust_wrench(c) + load + lift * lambda = 0.
/// Contact forces are reported for the lexicographically smallest active set.
/// Throws GeometryError if lambda is unbounded.
EquilibriumSolution solve_cantilever(std::span<const Vec2> contacts, const Wrench& load,
                                     const Wrench& lift);

EquilibriumSolution cantilever_thrust(const PayloadModel& payload, const CantileverProblem& problem);

/// Pair thrust reading: lambda_r(theta_true) plus N(0, noise_variance) noise.
/// Returns NaN if theta_true cannot rest on the contacts.
double simulate_measurement(const PayloadModel& payload, const PhysicalParams& theta_true,
                            SlotPair pair, double noise_variance, std::mt19937_64& rng,
                            const Wrench& extra_load = {});

// Slots occupied by idle robots during a measurement: the n_robots - 2 slots
// that follow the pair around the rail.
std::vector<int> default_idle_slots(const PayloadModel& payload, SlotPair pair);

/// Net load from robots not taking part in a measurement. With compensation
/// on, each idle robot hovers at its own weight and the result is zero.
Wrench robot_self_weight_offset(const PayloadModel& payload, SlotPair pair,
                                std::span<const int> idle_slots, bool compensated);

}  // namespace cotransport
