#pragma once

#include <array>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cotransport/payload_model.hpp"

namespace cotransport {

// Balance residuals up to this count as zero when the tolerance is smaller.
inline constexpr double kBalanceFloor = 1e-9;

struct RotorCoefficients {
  double c_t = 1.0;   // thrust per unit input
  double c_q = 0.01;  // yaw reaction torque per unit input
};

enum class FormationMode { kFree, kSymmetric };
std::string to_string(FormationMode mode);
FormationMode formation_mode_from_string(const std::string& s);

struct Formation {
  std::vector<double> arc;          // rail arc length per robot, ascending
  std::vector<Vec2> positions;      // payload frame
  std::vector<Vec2> body_positions; // relative to the COM used to build B
  std::vector<int> signs;           // rotor spin direction, +1 / -1
  Vec2 com = Vec2::Zero();
  RotorCoefficients rotor;
  Eigen::MatrixXd B;                // 3 x n
};

struct OptimizationReport {
  double objective = 0.0;
  std::array<double, 2> balance_residuals{};
  int iterations = 0;
  int restarts_used = 0;
  FormationMode mode = FormationMode::kFree;
  bool feasible = false;
  double min_separation = 0.0;
};

/// Rows c_t * r_1, c_t * r_2 and s * c_q over the robots.
Eigen::MatrixXd build_B(std::span<const Vec2> body_positions, std::span<const int> signs,
                        const RotorCoefficients& rotor);
// Same with positions given in the payload frame and shifted by `com`.
Eigen::MatrixXd build_B(std::span<const Vec2> positions, std::span<const int> signs,
                        const RotorCoefficients& rotor, const Vec2& com);

// det(B B^T)
double gramian_objective(const Eigen::MatrixXd& B);
// |sum b1|, |sum b2|
std::array<double, 2> balance_residuals(const Eigen::MatrixXd& B);

std::vector<int> alternating_signs(std::size_t n);
// Smallest along-rail gap between any two robots.
double min_separation(const Rail& rail, std::span<const double> arc);

// Sorts the arc coordinates, assigns alternating signs in rail order, builds B about com.
Formation make_formation(const Rail& rail, std::vector<double> arc, const Vec2& com,
                         const RotorCoefficients& rotor);

Formation even_formation(const PayloadModel& payload, int n_robots, const Vec2& com,
                         const RotorCoefficients& rotor, double offset = 0.0);

struct FormationConfig {
  FormationMode mode = FormationMode::kFree;
  double epsilon = 1e-5;
  double min_spacing = 0.15;
  int restarts = 24;
  RotorCoefficients rotor;
  // Symmetric mode only: four fixed arc coordinates. Empty means derive them from the COM.
  std::vector<double> anchors;
  bool parallel = true;
};

bool formation_feasible(const Formation& f, const Rail& rail, double epsilon, double min_spacing);

/// Maximizes det(B B^T) over rail arc coordinates subject to
/// |sum b1| <= eps, |sum b2| <= eps and the spacing limit. Multi-start
/// Nelder-Mead with an escalating exterior penalty; deterministic given rng.
std::pair<Formation, OptimizationReport> optimize_formation(const PayloadModel& payload,
                                                            const PhysicalParams& theta_hat,
                                                            int n_robots, const FormationConfig& config,
                                                            std::mt19937_64& rng);

// Anchor arc coordinates used by symmetric mode when none are configured.
std::vector<double> symmetric_anchors(const PayloadModel& payload, const PhysicalParams& theta_hat,
                                      int n_robots, double min_spacing);
// Arc coordinate of the mirror image (y -> -y) of the rail point at s.
double mirror_arc(const Rail& rail, double s);

}  // namespace cotransport
