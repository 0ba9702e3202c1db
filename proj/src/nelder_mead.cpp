#include "cotransport/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace cotransport {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step,
                             const NelderMeadOptions& options) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  NelderMeadResult out;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    return f(x);
  };
  for (int i = 0; i < n; ++i) simplex[i + 1](i) += step;
  for (int i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<int> order(n + 1);
  while (out.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    const int best = order.front();
    const int worst = order.back();
    const int second = order[n - 1];

    double diameter = 0.0;
    for (int i = 0; i <= n; ++i) diameter = std::max(diameter, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    if (values[worst] - values[best] <= options.f_tolerance && diameter <= options.x_tolerance) break;
    if (diameter <= options.x_tolerance * 1e-3) break;
    ++out.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_r = eval(reflected);
    if (f_r < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_e = eval(expanded);
      if (f_e < f_r) {
        simplex[worst] = expanded;
        values[worst] = f_e;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_r;
      }
      continue;
    }
    if (f_r < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_r;
      continue;
    }
    const bool outside = f_r < values[worst];
    const Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                                               : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_c = eval(contracted);
    if (f_c < (outside ? f_r : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_c;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }
  const int best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  out.x = simplex[best];
  out.value = values[best];
  return out;
}

}  // namespace cotransport
