#include "cotransport/formation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "cotransport/errors.hpp"
#include "cotransport/nelder_mead.hpp"

namespace cotransport {

std::string to_string(FormationMode mode) { return mode == FormationMode::kFree ? "free" : "symmetric"; }

FormationMode formation_mode_from_string(const std::string& s) {
  if (s == "free") return FormationMode::kFree;
  if (s == "symmetric") return FormationMode::kSymmetric;
  throw ConfigError("unknown formation mode '" + s + "' (expected free|symmetric)");
}

Eigen::MatrixXd build_B(std::span<const Vec2> body_positions, std::span<const int> signs,
                        const RotorCoefficients& rotor) {
  const Eigen::Index n = static_cast<Eigen::Index>(body_positions.size());
  Eigen::MatrixXd B(3, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    B(0, j) = rotor.c_t * body_positions[j].x();
    B(1, j) = rotor.c_t * body_positions[j].y();
    B(2, j) = signs[j] * rotor.c_q;
  }
  return B;
}

Eigen::MatrixXd build_B(std::span<const Vec2> positions, std::span<const int> signs,
                        const RotorCoefficients& rotor, const Vec2& com) {
  std::vector<Vec2> body(positions.begin(), positions.end());
  for (Vec2& p : body) p -= com;
  return build_B(body, signs, rotor);
}

double gramian_objective(const Eigen::MatrixXd& B) {
  const Eigen::Matrix3d G = B * B.transpose();
  return std::max(0.0, G.determinant());
}

std::array<double, 2> balance_residuals(const Eigen::MatrixXd& B) {
  return {std::abs(B.row(0).sum()), std::abs(B.row(1).sum())};
}

std::vector<int> alternating_signs(std::size_t n) {
  std::vector<int> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = j % 2 == 0 ? 1 : -1;
  return s;
}

double min_separation(const Rail& rail, std::span<const double> arc) {
  std::vector<double> s(arc.begin(), arc.end());
  for (double& v : s) v = rail.wrap(v);
  std::sort(s.begin(), s.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < s.size(); ++j) best = std::min(best, s[j + 1] - s[j]);
  if (rail.closed() && s.size() >= 2) best = std::min(best, s.front() + rail.length() - s.back());
  return best;
}

Formation make_formation(const Rail& rail, std::vector<double> arc, const Vec2& com,
                         const RotorCoefficients& rotor) {
  Formation f;
  for (double& s : arc) s = rail.wrap(s);
  std::sort(arc.begin(), arc.end());
  f.arc = std::move(arc);
  f.com = com;
  f.rotor = rotor;
  f.signs = alternating_signs(f.arc.size());
  for (double s : f.arc) {
    f.positions.push_back(rail.point_at(s));
    f.body_positions.push_back(f.positions.back() - com);
  }
  f.B = build_B(f.body_positions, f.signs, rotor);
  return f;
}

Formation even_formation(const PayloadModel& payload, int n_robots, const Vec2& com,
                         const RotorCoefficients& rotor, double offset) {
  if (n_robots < 2) throw ConfigError("even formation needs >= 2 robots");
  std::vector<double> arc(static_cast<std::size_t>(n_robots));
  const double step = payload.rail.closed() ? payload.rail.length() / n_robots
                                            : payload.rail.length() / (n_robots - 1);
  for (int j = 0; j < n_robots; ++j) arc[static_cast<std::size_t>(j)] = offset + j * step;
  return make_formation(payload.rail, std::move(arc), com, rotor);
}

bool formation_feasible(const Formation& f, const Rail& rail, double epsilon, double min_spacing) {
  const auto res = balance_residuals(f.B);
  const double tol = std::max(epsilon, kBalanceFloor);
  return res[0] <= tol && res[1] <= tol && min_separation(rail, f.arc) >= min_spacing - 1e-12;
}

double mirror_arc(const Rail& rail, double s) {
  const Vec2 p = rail.point_at(s);
  const Vec2 q{p.x(), -p.y()};
  if (rail.distance_to(q) > 1e-9) throw ConfigError("rail is not mirror symmetric about the long axis");
  return rail.project(q);
}

std::vector<double> symmetric_anchors(const PayloadModel& payload, const PhysicalParams& theta_hat,
                                      int n_robots, double min_spacing) {
  const auto& verts = payload.rail.vertices();
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  for (const Vec2& v : verts) {
    x_lo = std::min(x_lo, v.x());
    x_hi = std::max(x_hi, v.x());
  }
  // Two anchors on each end edge, centred so that their y coordinates sum to
  // n * com_y; mirrored robots contribute -2 com_y each, so b2 balances.
  const double centre = n_robots * theta_hat.com_y / 4.0;
  const double half_gap = 0.5 * min_spacing * (1.0 + 1e-9);
  std::vector<double> anchors;
  for (double x_edge : {x_hi, x_lo}) {
    double y_lo = std::numeric_limits<double>::infinity();
    double y_hi = -y_lo;
    for (const Vec2& v : verts) {
      if (std::abs(v.x() - x_edge) < 1e-9) {
        y_lo = std::min(y_lo, v.y());
        y_hi = std::max(y_hi, v.y());
      }
    }
    if (!(y_hi - y_lo >= 2.0 * half_gap))
      throw ConfigError("end edge too short for two symmetric-mode anchors; configure anchors explicitly");
    const double c = std::clamp(centre, y_lo + half_gap, y_hi - half_gap);
    for (double y : {c - half_gap, c + half_gap}) anchors.push_back(payload.rail.project({x_edge, y}));
  }
  return anchors;
}

namespace {

struct Candidate {
  Eigen::VectorXd v;
  Formation formation;
  double objective = 0.0;
  std::array<double, 2> residuals{};
  double separation = 0.0;
  double penalized = std::numeric_limits<double>::infinity();
  bool accepted = false;
  int iterations = 0;
};

class FormationProblem {
 public:
  FormationProblem(const PayloadModel& payload, const Vec2& com, int n_robots, const FormationConfig& cfg)
      : payload_(payload), com_(com), n_(n_robots), cfg_(cfg) {
    if (cfg.mode == FormationMode::kSymmetric) {
      anchors_ = cfg.anchors.empty()
                     ? symmetric_anchors(payload, PhysicalParams{com.x(), com.y(), 0.0}, n_robots, cfg.min_spacing)
                     : cfg.anchors;
      if (anchors_.size() != 4) throw ConfigError("symmetric mode needs exactly four anchors");
      if (n_robots < 4 || (n_robots - 4) % 2 != 0)
        throw ConfigError("symmetric mode needs n_robots = 4 + an even number");
      for (const Vec2& v : payload.rail.vertices()) {
        if (payload.rail.distance_to({v.x(), -v.y()}) > 1e-9)
          throw ConfigError("symmetric mode needs a rail mirror-symmetric about the long axis");
      }
    }
    const Formation even = even_formation(payload, n_robots, com, cfg.rotor);
    det_scale_ = std::max(gramian_objective(even.B), 1e-12);
    residual_scale_ = cfg.rotor.c_t * payload.rail.length() / n_robots;
    // Aim just inside the tolerance so penalty leftovers stay feasible.
    target_ = cfg.epsilon * (1.0 - 1e-6);
  }

  int dimension() const { return cfg_.mode == FormationMode::kFree ? n_ : (n_ - 4) / 2; }

  std::vector<double> expand(const Eigen::VectorXd& v) const {
    std::vector<double> arc;
    if (cfg_.mode == FormationMode::kFree) {
      for (Eigen::Index k = 0; k < v.size(); ++k) arc.push_back(payload_.rail.wrap(v(k)));
    } else {
      arc = anchors_;
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double s = payload_.rail.wrap(v(k));
        arc.push_back(s);
        arc.push_back(mirror_arc(payload_.rail, s));
      }
    }
    return arc;
  }

  Formation formation(const Eigen::VectorXd& v) const {
    return make_formation(payload_.rail, expand(v), com_, cfg_.rotor);
  }

  Eigen::Vector2d signed_residual(const Eigen::VectorXd& v) const {
    const Formation f = formation(v);
    return {f.B.row(0).sum(), f.B.row(1).sum()};
  }

  double penalized(const Eigen::VectorXd& v, double weight) const {
    const Formation f = formation(v);
    const auto res = balance_residuals(f.B);
    const double r1 = std::max(0.0, res[0] - target_) / residual_scale_;
    const double r2 = std::max(0.0, res[1] - target_) / residual_scale_;
    double gap_violation = 0.0;
    const std::vector<double>& s = f.arc;
    auto add_gap = [&](double gap) {
      const double short_by = std::max(0.0, cfg_.min_spacing - gap) / cfg_.min_spacing;
      gap_violation += short_by * short_by;
    };
    for (std::size_t j = 0; j + 1 < s.size(); ++j) add_gap(s[j + 1] - s[j]);
    if (payload_.rail.closed()) add_gap(s.front() + payload_.rail.length() - s.back());
    return -gramian_objective(f.B) / det_scale_ + weight * (r1 * r1 + r2 * r2 + gap_violation);
  }

  // Minimum-norm Newton steps onto sum b1 = sum b2 = 0.
  Eigen::VectorXd project(Eigen::VectorXd v) const {
    const double h = 1e-7;
    for (int iter = 0; iter < 50; ++iter) {
      const Eigen::Vector2d r = signed_residual(v);
      if (r.cwiseAbs().maxCoeff() <= 1e-15) break;
      Eigen::MatrixXd J(2, v.size());
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        Eigen::VectorXd hi = v, lo = v;
        hi(k) += h;
        lo(k) -= h;
        J.col(k) = (signed_residual(hi) - signed_residual(lo)) / (2.0 * h);
      }
      const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(r);
      if (!step.allFinite() || step.norm() < 1e-16) break;
      v -= step;
    }
    return v;
  }

  Candidate evaluate(const Eigen::VectorXd& v) const {
    Candidate c;
    c.v = v;
    c.formation = formation(v);
    c.objective = gramian_objective(c.formation.B);
    c.residuals = balance_residuals(c.formation.B);
    c.separation = min_separation(payload_.rail, c.formation.arc);
    c.accepted = formation_feasible(c.formation, payload_.rail, cfg_.epsilon, cfg_.min_spacing);
    return c;
  }

  Candidate solve(Eigen::VectorXd v) const {
    static constexpr double kWeights[] = {1.0, 1e2, 1e4, 1e6, 1e8, 1e10, 1e12};
    int iterations = 0;
    double step = payload_.rail.length() / (4.0 * n_);
    Candidate best;
    for (double w : kWeights) {
      auto f = [&](const Eigen::VectorXd& x) { return penalized(x, w); };
      double previous = f(v);
      for (int round = 0; round < 4; ++round) {
        const NelderMeadResult r = nelder_mead(f, v, step);
        iterations += r.iterations;
        v = r.x;
        if (previous - r.value <= 1e-12 * std::max(1.0, std::abs(r.value))) break;
        previous = r.value;
        step *= 0.5;
      }
      step = std::max(step * 0.5, 1e-4);
      best = evaluate(v);
      if (best.accepted && w >= 1e4) break;
    }
    if (!best.accepted) {
      Candidate polished = evaluate(project(v));
      if (polished.accepted || polished.residuals[0] + polished.residuals[1] < best.residuals[0] + best.residuals[1])
        best = polished;
    }
    best.penalized = penalized(best.v, 1e12);
    best.iterations = iterations;
    return best;
  }

  Eigen::VectorXd even_start() const {
    const int m = dimension();
    Eigen::VectorXd v(m);
    const double L = payload_.rail.length();
    if (cfg_.mode == FormationMode::kFree) {
      for (int k = 0; k < m; ++k) v(k) = k * L / m;
    } else {
      // Spread over the half of the rail between the end anchors.
      for (int k = 0; k < m; ++k) v(k) = L * (k + 1) / (2.0 * (m + 1));
    }
    return v;
  }

  Eigen::VectorXd random_start(std::mt19937_64& rng) const {
    const int m = dimension();
    const double L = payload_.rail.length();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd v(m);
    if (cfg_.mode == FormationMode::kFree && payload_.rail.closed()) {
      // Uniform over spacing-feasible configurations: gaps = min + slack * Dirichlet(1).
      const double slack = std::max(0.0, L - m * cfg_.min_spacing);
      std::vector<double> e(m);
      double total = 0.0;
      for (double& x : e) total += (x = -std::log(1.0 - unit(rng)));
      double s = unit(rng) * L;
      for (int k = 0; k < m; ++k) {
        v(k) = s;
        s += cfg_.min_spacing + slack * e[k] / total;
      }
    } else {
      for (int k = 0; k < m; ++k) v(k) = unit(rng) * L;
    }
    return v;
  }

 private:
  const PayloadModel& payload_;
  Vec2 com_;
  int n_;
  FormationConfig cfg_;
  std::vector<double> anchors_;
  double det_scale_ = 1.0;
  double residual_scale_ = 1.0;
  double target_ = 0.0;
};

}  // namespace

std::pair<Formation, OptimizationReport> optimize_formation(const PayloadModel& payload,
                                                            const PhysicalParams& theta_hat,
                                                            int n_robots, const FormationConfig& config,
                                                            std::mt19937_64& rng) {
  if (n_robots < 3) throw ConfigError("formation optimization needs >= 3 robots");
  if (!(config.epsilon >= 0.0)) throw ConfigError("balance tolerance must be >= 0");
  const FormationProblem problem(payload, theta_hat.com(), n_robots, config);

  const int restarts = std::max(1, config.restarts);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(problem.even_start());
  for (int r = 1; r < restarts; ++r) starts.push_back(problem.random_start(rng));

  std::vector<Candidate> results(starts.size());
  const long count = static_cast<long>(starts.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (long r = 0; r < count; ++r) results[r] = problem.solve(starts[r]);

  // Best accepted by objective, else least penalized; ties to the lower restart index.
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    const Candidate& a = results[r];
    const Candidate& b = results[best];
    if (a.accepted != b.accepted) {
      if (a.accepted) best = r;
    } else if (a.accepted ? a.objective > b.objective : a.penalized < b.penalized) {
      best = r;
    }
  }

  const Candidate& chosen = results[best];
  OptimizationReport report;
  report.objective = chosen.objective;
  report.balance_residuals = chosen.residuals;
  report.iterations = chosen.iterations;
  report.restarts_used = restarts;
  report.mode = config.mode;
  report.feasible = chosen.accepted;
  report.min_separation = chosen.separation;
  return {chosen.formation, report};
}

}  // namespace cotransport
