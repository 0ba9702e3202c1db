#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cotransport/equilibrium.hpp"
#include "cotransport/errors.hpp"
#include "oracles.hpp"

namespace cotransport {
namespace {

constexpr double kG = 9.81;

// Plank along x with contacts at both ends; both robots thrust at x = +0.5.
EquilibriumSolution plank(double com_x, double mass) {
  const std::vector<Vec2> contacts{{-0.5, 0.0}, {0.5, 0.0}};
  const Wrench load = gravity_wrench({com_x, 0.0, mass}, kG);
  const Wrench lift = 0.5 * (thrust_wrench({0.5, 0.0}) + thrust_wrench({0.5, 0.0}));
  return solve_cantilever(contacts, load, lift);
}

TEST(Cantilever, PlankLeverArm) {
  const EquilibriumSolution sol = plank(0.0, 2.0);
  ASSERT_TRUE(sol.feasible);
  EXPECT_NEAR(sol.lambda_r, 9.81, 1e-9);
  // Only the far contact carries load at the verge of tipping.
  EXPECT_EQ(sol.active_set, std::vector<int>{0});
  EXPECT_NEAR(sol.contact_forces[0], 9.81, 1e-9);
}

TEST(Cantilever, ComOverPivotGivesZeroThrust) {
  const EquilibriumSolution sol = plank(-0.5, 2.0);
  ASSERT_TRUE(sol.feasible);
  EXPECT_NEAR(sol.lambda_r, 0.0, 1e-9);
}

TEST(Cantilever, ComOutsideContactsIsInfeasibleNotFatal) {
  const std::vector<Vec2> contacts{{-0.5, 0.0}, {0.5, 0.0}};
  const EquilibriumSolution sol =
      solve_cantilever(contacts, gravity_wrench({0.0, 0.3, 1.0}, kG), thrust_wrench({0.5, 0.0}));
  EXPECT_FALSE(sol.feasible);
  EXPECT_TRUE(std::isnan(sol.lambda_r));
}

TEST(Cantilever, DownwardLiftIsUnbounded) {
  const std::vector<Vec2> contacts{{-0.5, -0.5}, {0.5, -0.5}, {0.0, 0.5}};
  EXPECT_THROW(solve_cantilever(contacts, gravity_wrench({0.0, 0.0, 1.0}, kG), -thrust_wrench({0.0, 0.0})),
               GeometryError);
}

TEST(Cantilever, RectangleShortEdgePairMatchesOracleAndLeverRule) {
  PayloadModel payload = make_rectangle_payload();
  // Two slots on the +x end edge at y = +-0.05, two elsewhere.
  payload.candidates = {0.05, 1.0, 2.0, 3.87};
  const PhysicalParams theta{0.33, 0.01, 3.5};
  const SlotPair pair{3, 0};
  const EquilibriumSolution sol = cantilever_thrust(payload, {pair, theta});
  ASSERT_TRUE(sol.feasible);

  const Vec2 p1 = payload.candidate_point(3);
  const Vec2 p2 = payload.candidate_point(0);
  const Wrench load = gravity_wrench(theta, kG) + robot_weight_wrench(p1, 0.1, kG) +
                      robot_weight_wrench(p2, 0.1, kG);
  const auto ref = oracle::cantilever_by_enumeration(payload.contacts, load,
                                                     0.5 * (thrust_wrench(p1) + thrust_wrench(p2)));
  ASSERT_TRUE(ref.feasible);
  EXPECT_NEAR(sol.lambda_r, ref.lambda, 1e-6);
  // Moments about the x = -0.88 tipping edge.
  const double lever = (3.5 * kG * (0.33 + 0.88) + 2 * 0.1 * kG * 1.76) / 1.76;
  EXPECT_NEAR(sol.lambda_r, lever, 1e-9);
}

TEST(Cantilever, TieBreakPicksLexicographicallySmallestActiveSet) {
  // Contacts 0 and 1 coincide, so loads can be split between them.
  const std::vector<Vec2> contacts{{-1.0, -1.0}, {-1.0, -1.0}, {-1.0, 1.0}, {1.0, 0.0}};
  const EquilibriumSolution sol =
      solve_cantilever(contacts, gravity_wrench({0.0, 0.0, 1.0}, kG), thrust_wrench({1.0, 0.0}));
  ASSERT_TRUE(sol.feasible);
  EXPECT_EQ(sol.active_set, (std::vector<int>{0, 2}));
}

TEST(Cantilever, RandomInstancesMatchEnumerationOracle) {
  std::mt19937_64 rng(20240611);
  int feasible = 0;
  for (int i = 0; i < 150; ++i) {
    const auto inst = oracle::random_cantilever_instance(rng);
    const EquilibriumSolution sol = solve_cantilever(inst.contacts, inst.load, inst.lift);
    const auto ref = oracle::cantilever_by_enumeration(inst.contacts, inst.load, inst.lift);
    ASSERT_EQ(sol.feasible, ref.feasible) << "instance " << i;
    if (!sol.feasible) continue;
    ++feasible;
    EXPECT_NEAR(sol.lambda_r, ref.lambda, 1e-6) << "instance " << i;
    EXPECT_GE(sol.lambda_r, 0.0);
    for (double f : sol.contact_forces) EXPECT_GE(f, -1e-9);
    EXPECT_LE(sol.residual.cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_GT(feasible, 30);
}

TEST(Cantilever, ThrustNeverDecreasesWithMass) {
  const PayloadModel payload = make_rectangle_payload();
  for (int p = 0; p < 12; ++p) {
    const SlotPair pair{p, (p + 1) % 12};
    double previous = -1.0;
    for (double m = 2.0; m <= 4.5; m += 0.25) {
      const double lambda = cantilever_thrust(payload, {pair, {0.2, -0.03, m}}).lambda_r;
      EXPECT_GE(lambda, previous - 1e-12);
      previous = lambda;
    }
  }
}

TEST(Cantilever, TranslationEquivariance) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  for (int i = 0; i < 40; ++i) {
    auto inst = oracle::random_cantilever_instance(rng);
    const EquilibriumSolution base = solve_cantilever(inst.contacts, inst.load, inst.lift);
    if (!base.feasible) continue;
    const Vec2 d{shift(rng), shift(rng)};
    // A vertical force moved by d gains torque (d.y * fz, -d.x * fz).
    auto moved = [&](const Wrench& w) { return Wrench{w.fz, w.tx + d.y() * w.fz, w.ty - d.x() * w.fz}; };
    for (Vec2& c : inst.contacts) c += d;
    const EquilibriumSolution t = solve_cantilever(inst.contacts, moved(inst.load), moved(inst.lift));
    ASSERT_TRUE(t.feasible);
    EXPECT_NEAR(t.lambda_r, base.lambda_r, 1e-9 * std::max(1.0, base.lambda_r));
  }
}

TEST(Measurement, NoiselessIsExact) {
  const PayloadModel payload = make_rectangle_payload();
  std::mt19937_64 rng(1);
  const PhysicalParams theta{0.1, 0.02, 3.0};
  const double exact = cantilever_thrust(payload, {{0, 1}, theta}).lambda_r;
  EXPECT_EQ(simulate_measurement(payload, theta, {0, 1}, 0.0, rng), exact);
}

TEST(Measurement, SeededNoiseIsReproducible) {
  const PayloadModel payload = make_rectangle_payload();
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(simulate_measurement(payload, {0.1, 0.02, 3.0}, {4, 5}, 1.0, a),
              simulate_measurement(payload, {0.1, 0.02, 3.0}, {4, 5}, 1.0, b));
  }
}

TEST(Measurement, EmpiricalNoiseVariance) {
  const PayloadModel payload = make_rectangle_payload();
  const PhysicalParams theta{-0.2, 0.0, 2.5};
  const double mean = cantilever_thrust(payload, {{6, 7}, theta}).lambda_r;
  std::mt19937_64 rng(5);
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double d = simulate_measurement(payload, theta, {6, 7}, 1.0, rng) - mean;
    acc += d * d;
  }
  EXPECT_NEAR(acc / n, 1.0, 0.05);
}

TEST(IdleRobots, CompensatedAddsNothing) {
  const PayloadModel payload = make_rectangle_payload();
  const SlotPair pair{0, 1};
  const std::vector<int> idle = default_idle_slots(payload, pair);
  ASSERT_EQ(idle.size(), 6u);
  const Wrench w = robot_self_weight_offset(payload, pair, idle, true);
  EXPECT_EQ(w.vec(), Eigen::Vector3d::Zero());
}

TEST(IdleRobots, UncompensatedAddsTheirWeight) {
  const PayloadModel payload = make_rectangle_payload();
  const SlotPair pair{0, 1};
  const std::vector<int> idle = default_idle_slots(payload, pair);
  const Wrench w = robot_self_weight_offset(payload, pair, idle, false);
  EXPECT_NEAR(w.fz, -5.886, 1e-12);
  Wrench expected;
  for (int s : idle) expected += robot_weight_wrench(payload.candidate_point(s), 0.1, kG);
  EXPECT_NEAR((w.vec() - expected.vec()).norm(), 0.0, 1e-12);
}

TEST(IdleRobots, ToggleShiftsThrustByOracleDelta) {
  const PayloadModel payload = make_rectangle_payload();
  const PhysicalParams theta{0.3, 0.01, 3.5};
  for (int p = 0; p < 12; ++p) {
    const SlotPair pair{p, (p + 1) % 12};
    const std::vector<int> idle = default_idle_slots(payload, pair);
    const Wrench extra = robot_self_weight_offset(payload, pair, idle, false);
    const double on = cantilever_thrust(payload, {pair, theta}).lambda_r;
    const double off = cantilever_thrust(payload, {pair, theta, extra}).lambda_r;

    const Vec2 p1 = payload.candidate_point(pair.first);
    const Vec2 p2 = payload.candidate_point(pair.second);
    const Wrench base = gravity_wrench(theta, kG) + robot_weight_wrench(p1, 0.1, kG) +
                        robot_weight_wrench(p2, 0.1, kG);
    const Wrench lift = 0.5 * (thrust_wrench(p1) + thrust_wrench(p2));
    const double ref_on = oracle::cantilever_by_enumeration(payload.contacts, base, lift).lambda;
    const double ref_off = oracle::cantilever_by_enumeration(payload.contacts, base + extra, lift).lambda;
    EXPECT_NEAR(off - on, ref_off - ref_on, 1e-6);
    EXPECT_GT(off, on);
  }
}

TEST(IdleRobots, OverlapWithPairRejected) {
  const PayloadModel payload = make_rectangle_payload();
  const std::vector<int> idle{1, 2};
  EXPECT_THROW(robot_self_weight_offset(payload, {0, 1}, idle, true), ConfigError);
}

TEST(Cantilever, InvalidPairRejected) {
  const PayloadModel payload = make_rectangle_payload();
  EXPECT_THROW(cantilever_thrust(payload, {{3, 3}, {0, 0, 1}}), ConfigError);
  EXPECT_THROW(cantilever_thrust(payload, {{0, 12}, {0, 0, 1}}), ConfigError);
  EXPECT_THROW(cantilever_thrust(payload, {{0, 1}, {0, 0, 0}}), ConfigError);
}

}  // namespace
}  // namespace cotransport
