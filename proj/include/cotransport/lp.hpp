#pragma once

#include <Eigen/Core>

namespace cotransport {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Solves   maximize c'x   subject to   A x = b,  x >= 0
/// with a dense two-phase simplex and Bland's anti-cycling rule. Intended
/// for the handful-of-variables problems in this project; no sparsity.
LpResult solve_standard_form_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c, double tol = 1e-11);

}  // namespace cotransport
