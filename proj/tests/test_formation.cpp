#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cotransport/errors.hpp"
#include "cotransport/formation.hpp"
#include "oracles.hpp"

namespace cotransport {
namespace {

TEST(BuildB, SquareDeterminant) {
  const std::vector<Vec2> pos{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  const std::vector<int> signs{1, -1, 1, -1};
  const Eigen::MatrixXd B = build_B(pos, signs, {1.0, 0.1});
  const Eigen::Matrix3d G = B * B.transpose();
  EXPECT_TRUE(G.isApprox(Eigen::Vector3d(4, 4, 0.04).asDiagonal().toDenseMatrix(), 1e-15));
  EXPECT_NEAR(gramian_objective(B), 0.64, 1e-12);
  EXPECT_NEAR(oracle::det3(G), 0.64, 1e-12);
}

TEST(BuildB, RankDeficientCases) {
  const std::vector<Vec2> pos{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  const std::vector<int> signs{1, -1, 1, -1};
  EXPECT_EQ(gramian_objective(build_B(pos, signs, {1.0, 0.0})), 0.0);
  const std::vector<Vec2> line{{-1, 0}, {0, 0}, {0.5, 0}, {1, 0}};
  EXPECT_NEAR(gramian_objective(build_B(line, signs, {1.0, 0.1})), 0.0, 1e-15);
}

TEST(BuildB, ComShiftMovesForceRows) {
  const std::vector<Vec2> pos{{0.3, 0.1}, {-0.2, 0.05}, {0.7, -0.1}};
  const std::vector<int> signs{1, -1, 1};
  const RotorCoefficients rotor{2.5, 0.02};
  const Vec2 d{0.11, -0.04};
  const Eigen::MatrixXd a = build_B(pos, signs, rotor, Vec2::Zero());
  const Eigen::MatrixXd b = build_B(pos, signs, rotor, d);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(a(0, j) - b(0, j), rotor.c_t * d.x(), 1e-15);
    EXPECT_NEAR(a(1, j) - b(1, j), rotor.c_t * d.y(), 1e-15);
    EXPECT_EQ(a(2, j), b(2, j));
  }
}

TEST(Gramian, PermutationAndHorizonInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd B(3, 8);
    for (int j = 0; j < 8; ++j) B.col(j) << u(rng), u(rng), (j % 2 ? -0.01 : 0.01);
    const double det = gramian_objective(B);
    EXPECT_NEAR(det, oracle::det3(B * B.transpose()), 1e-14);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(8);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 8, rng);
    EXPECT_NEAR(gramian_objective(B * perm), det, 1e-14);
    // A = 0 finite-horizon Gramian is T * B B^T.
    for (double T : {0.5, 2.0, 10.0}) {
      const Eigen::Matrix3d W = T * (B * B.transpose());
      EXPECT_NEAR(W.determinant(), T * T * T * det, 1e-12 * T * T * T);
    }
  }
}

TEST(EvenFormation, BalanceResidualClosedForm) {
  const PayloadModel payload = make_rectangle_payload();
  const PhysicalParams theta{0.4, 0.01, 3.0};
  const Formation f = even_formation(payload, 8, theta.com(), {});
  // Eight evenly spaced points on a centrally symmetric rail sum to zero.
  const auto res = balance_residuals(f.B);
  EXPECT_NEAR(res[0], 8 * 0.4, 1e-12);
  EXPECT_NEAR(res[1], 8 * 0.01, 1e-12);
  EXPECT_NEAR(min_separation(payload.rail, f.arc), 3.92 / 8, 1e-12);
  EXPECT_EQ(f.signs, (std::vector<int>{1, -1, 1, -1, 1, -1, 1, -1}));
}

TEST(EvenFormation, CentredComIsFeasible) {
  const PayloadModel payload = make_rectangle_payload();
  const Formation f = even_formation(payload, 8, Vec2::Zero(), {});
  EXPECT_TRUE(formation_feasible(f, payload.rail, 1e-5, 0.15));
  EXPECT_GT(gramian_objective(f.B), 0.0);
}

TEST(Modes, StringRoundTrip) {
  EXPECT_EQ(formation_mode_from_string("free"), FormationMode::kFree);
  EXPECT_EQ(formation_mode_from_string(to_string(FormationMode::kSymmetric)), FormationMode::kSymmetric);
  EXPECT_THROW(formation_mode_from_string("mirror"), ConfigError);
}

struct Case {
  const char* name;
  PayloadModel payload;
  PhysicalParams theta;
  double epsilon;
};

std::vector<Case> sim_cases() {
  return {{"rect1", make_rectangle_payload(), {0.33, 0.01, 3.5}, 1e-5},
          {"rect2", make_rectangle_payload(), {0.4, 0.01, 3.0}, 1e-5},
          {"l1", make_lshape_payload(), {0.31, 0.1, 3.5}, 0.1},
          {"l2", make_lshape_payload(), {0.4, 0.1, 3.5}, 0.1}};
}

TEST(Optimizer, AcceptedFormationsMeetConstraintsAndBeatRandomSearch) {
  for (const Case& c : sim_cases()) {
    FormationConfig cfg;
    cfg.epsilon = c.epsilon;
    std::mt19937_64 rng(1);
    const auto [f, report] = optimize_formation(c.payload, c.theta, 8, cfg, rng);
    ASSERT_TRUE(report.feasible) << c.name;
    EXPECT_LE(report.balance_residuals[0], c.epsilon) << c.name;
    EXPECT_LE(report.balance_residuals[1], c.epsilon) << c.name;
    EXPECT_GE(report.min_separation, cfg.min_spacing - 1e-12) << c.name;
    EXPECT_GT(report.objective, 0.0);
    EXPECT_NEAR(report.objective, oracle::det3(f.B * f.B.transpose()), 1e-15);
    for (const Vec2& p : f.positions) EXPECT_LE(c.payload.rail.distance_to(p), 1e-9);

    const auto search = oracle::random_feasible_formations(c.payload.rail, 8, c.theta.com(), 1.0, 0.01,
                                                           c.epsilon, cfg.min_spacing, 5000, 5);
    ASSERT_EQ(search.feasible_samples, 5000) << c.name;
    EXPECT_GE(report.objective, search.best_objective) << c.name;
  }
}

TEST(Optimizer, OffCentreComPullsRobotsTowardIt) {
  const PayloadModel payload = make_rectangle_payload();
  std::mt19937_64 rng(1);
  const auto [f, report] = optimize_formation(payload, {0.33, 0.01, 3.5}, 8, FormationConfig{}, rng);
  ASSERT_TRUE(report.feasible);
  const auto n_pos = std::count_if(f.positions.begin(), f.positions.end(), [](const Vec2& p) { return p.x() > 0.0; });
  EXPECT_GT(n_pos, 4);
}

TEST(Optimizer, DeterministicAndParallelMatchesSerial) {
  const PayloadModel payload = make_lshape_payload();
  FormationConfig cfg;
  cfg.epsilon = 0.1;
  cfg.restarts = 8;
  std::mt19937_64 r1(9), r2(9), r3(9);
  const auto a = optimize_formation(payload, {0.31, 0.1, 3.5}, 8, cfg, r1);
  const auto b = optimize_formation(payload, {0.31, 0.1, 3.5}, 8, cfg, r2);
  cfg.parallel = false;
  const auto c = optimize_formation(payload, {0.31, 0.1, 3.5}, 8, cfg, r3);
  EXPECT_EQ(a.first.arc, b.first.arc);
  EXPECT_EQ(a.first.arc, c.first.arc);
  EXPECT_EQ(a.second.objective, c.second.objective);
  EXPECT_EQ(a.second.iterations, c.second.iterations);
}

TEST(Symmetric, ExperimentFormationIsMirroredAndExactlyBalanced) {
  const PayloadModel payload = make_rectangle_payload();
  for (const PhysicalParams theta : {PhysicalParams{0.21, 0.0, 3.23}, PhysicalParams{-0.17, 0.014, 3.13}}) {
    FormationConfig cfg;
    cfg.mode = FormationMode::kSymmetric;
    cfg.epsilon = 0.0;
    cfg.min_spacing = 0.1;
    std::mt19937_64 rng(1);
    const auto [f, report] = optimize_formation(payload, theta, 8, cfg, rng);
    ASSERT_TRUE(report.feasible);
    EXPECT_LE(report.balance_residuals[0], kBalanceFloor);
    EXPECT_LE(report.balance_residuals[1], kBalanceFloor);
    EXPECT_EQ(report.mode, FormationMode::kSymmetric);

    const std::vector<double> anchors = symmetric_anchors(payload, theta, 8, cfg.min_spacing);
    std::vector<Vec2> rest;
    for (std::size_t j = 0; j < f.arc.size(); ++j) {
      const bool anchored = std::any_of(anchors.begin(), anchors.end(),
                                        [&](double s) { return std::abs(payload.rail.separation(s, f.arc[j])) < 1e-12; });
      if (!anchored) rest.push_back(f.positions[j]);
    }
    ASSERT_EQ(rest.size(), 4u);
    for (const Vec2& p : rest) {
      const bool mirrored = std::any_of(rest.begin(), rest.end(), [&](const Vec2& q) {
        return (q - Vec2(p.x(), -p.y())).norm() < 1e-9 && (q - p).norm() > 1e-9;
      });
      EXPECT_TRUE(mirrored);
    }
  }
}

TEST(Symmetric, AnchorsSitOnEndEdges) {
  const PayloadModel payload = make_rectangle_payload();
  const std::vector<double> a = symmetric_anchors(payload, {0.2, 0.014, 3.0}, 8, 0.1);
  ASSERT_EQ(a.size(), 4u);
  double y_sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const Vec2 p = payload.rail.point_at(a[k]);
    EXPECT_NEAR(std::abs(p.x()), 0.88, 1e-12);
    y_sum += p.y();
  }
  EXPECT_NEAR(y_sum, 8 * 0.014, 1e-9);
  EXPECT_THROW(symmetric_anchors(payload, {0.2, 0.0, 3.0}, 8, 0.25), ConfigError);
}

TEST(Symmetric, RejectsUnsupportedSetups) {
  FormationConfig cfg;
  cfg.mode = FormationMode::kSymmetric;
  cfg.min_spacing = 0.1;
  std::mt19937_64 rng(1);
  EXPECT_THROW(optimize_formation(make_rectangle_payload(), {0.1, 0.0, 3.0}, 7, cfg, rng), ConfigError);
  EXPECT_THROW(optimize_formation(make_lshape_payload(), {0.3, 0.1, 3.0}, 8, cfg, rng), ConfigError);
}

TEST(MirrorArc, Involution) {
  const Rail& rail = make_rectangle_payload().rail;
  for (double s = 0.0; s < rail.length(); s += 0.137) {
    const double m = mirror_arc(rail, s);
    EXPECT_NEAR(rail.point_at(m).y(), -rail.point_at(s).y(), 1e-12);
    EXPECT_NEAR(rail.separation(mirror_arc(rail, m), s), 0.0, 1e-9);
  }
}

}  // namespace
}  // namespace cotransport
