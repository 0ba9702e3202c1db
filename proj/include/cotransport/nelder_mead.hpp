#pragma once

#include <functional>

#include <Eigen/Core>

namespace cotransport {

struct NelderMeadOptions {
  int max_evaluations = 4000;
  double f_tolerance = 1e-13;  // spread of simplex values
  double x_tolerance = 1e-10;  // simplex diameter
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
};

/// Derivative-free simplex minimization (standard reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). The initial simplex is x0 plus step along
/// each axis.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step,
                             const NelderMeadOptions& options = {});

}  // namespace cotransport
