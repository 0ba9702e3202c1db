#include "cotransport/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cotransport {

namespace {

// Tableau layout: rows 0..m-1 are constraints, column `cols` is the rhs.
// The objective row holds reduced costs of a maximization problem.
class Tableau {
 public:
  Tableau(int m, int n) : m_(m), n_(n), t_(Eigen::MatrixXd::Zero(m + 1, n + 1)), basis_(m, -1) {}

  double& at(int r, int c) { return t_(r, c); }
  double rhs(int r) const { return t_(r, n_); }
  int basis(int r) const { return basis_[r]; }
  void set_basis(int r, int var) { basis_[r] = var; }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int r = 0; r <= m_; ++r) {
      if (r == row) continue;
      const double f = t_(r, col);
      if (f != 0.0) t_.row(r) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  // Loads objective `c` (length n) as reduced costs relative to the basis.
  void load_objective(const Eigen::VectorXd& c) {
    t_.row(m_).setZero();
    t_.row(m_).head(n_) = -c.transpose();
    for (int r = 0; r < m_; ++r) {
      const int var = basis_[r];
      if (var >= 0 && t_(m_, var) != 0.0) t_.row(m_) -= t_(m_, var) * t_.row(r);
    }
  }

  // Runs simplex iterations over columns [0, active_cols). Returns false on unbounded.
  bool optimize(int active_cols, double tol) {
    for (int iter = 0; iter < 10000; ++iter) {
      int enter = -1;
      for (int c = 0; c < active_cols; ++c) {
        if (t_(m_, c) < -tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        const double a = t_(r, enter);
        if (a > tol) {
          const double ratio = t_(r, n_) / a;
          if (ratio < best_ratio - tol ||
              (leave >= 0 && std::abs(ratio - best_ratio) <= tol && basis_[r] < basis_[leave])) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }

  double objective() const { return t_(m_, n_); }
  int rows() const { return m_; }

 private:
  int m_;
  int n_;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_standard_form_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c, double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  LpResult result;
  result.x = Eigen::VectorXd::Zero(n);

  // Phase 1: artificial variable per row, b made nonnegative.
  Tableau tab(m, n + m);
  for (int r = 0; r < m; ++r) {
    const double sign = b(r) < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tab.at(r, j) = sign * A(r, j);
    tab.at(r, n + r) = 1.0;
    tab.at(r, n + m) = sign * b(r);
    tab.set_basis(r, n + r);
  }
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setConstant(-1.0);
  tab.load_objective(phase1);
  tab.optimize(n + m, tol);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (tab.objective() < -tol * 100.0 * scale) return result;  // infeasible

  // Drive remaining artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (tab.basis(r) < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab.at(r, j)) > tol) {
        tab.pivot(r, j);
        break;
      }
    }
    // A row that stays artificial is redundant; its artificial stays at zero.
  }

  // Phase 2 over the original columns only.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  tab.load_objective(phase2);
  if (!tab.optimize(n, tol)) {
    result.status = LpStatus::kUnbounded;
    return result;
  }
  for (int r = 0; r < m; ++r) {
    const int var = tab.basis(r);
    if (var < n) result.x(var) = std::max(0.0, tab.rhs(r));
  }
  result.status = LpStatus::kOptimal;
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace cotransport
