#include "cotransport/payload_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cotransport/errors.hpp"

namespace cotransport {

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Vec2 polygon_centroid(const Polygon& poly) {
  const double area = polygon_area(poly);
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double cross = p.x() * q.y() - q.x() * p.y();
    c += (p + q) * cross;
  }
  return c / (6.0 * area);
}

double polygon_perimeter(const Polygon& poly) {
  double l = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) l += (poly[(i + 1) % poly.size()] - poly[i]).norm();
  return l;
}

namespace {

double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p, double* t_out = nullptr) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return (a + t * ab - p).norm();
}

}  // namespace

bool point_in_polygon(const Polygon& poly, const Vec2& p, double tol) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (segment_distance(poly[i], poly[(i + 1) % n], p) <= tol) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------
// Rail

Rail::Rail(std::vector<Vec2> vertices, bool closed) : vertices_(std::move(vertices)), closed_(closed) {
  if (vertices_.size() < 2) throw ConfigError("rail needs at least two vertices");
  const std::size_t segments = closed_ ? vertices_.size() : vertices_.size() - 1;
  cumulative_.assign(segments + 1, 0.0);
  for (std::size_t k = 0; k < segments; ++k) {
    const double len = (vertices_[(k + 1) % vertices_.size()] - vertices_[k]).norm();
    if (!(len > 0.0)) throw ConfigError("rail has a zero-length segment");
    cumulative_[k + 1] = cumulative_[k] + len;
  }
}

double Rail::wrap(double s) const {
  const double len = length();
  if (!closed_) return std::clamp(s, 0.0, len);
  double w = std::fmod(s, len);
  if (w < 0.0) w += len;
  if (w >= len) w = 0.0;
  return w;
}

std::size_t Rail::segment_of(double s) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t k = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(k, cumulative_.size() - 2);
}

Vec2 Rail::point_at(double s) const {
  const double w = wrap(s);
  const std::size_t k = segment_of(w);
  const Vec2& a = vertices_[k];
  const Vec2& b = vertices_[(k + 1) % vertices_.size()];
  const double t = (w - cumulative_[k]) / (cumulative_[k + 1] - cumulative_[k]);
  return a + t * (b - a);
}

Vec2 Rail::tangent_at(double s) const {
  const std::size_t k = segment_of(wrap(s));
  return (vertices_[(k + 1) % vertices_.size()] - vertices_[k]).normalized();
}

double Rail::project(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t k = 0; k + 1 < cumulative_.size(); ++k) {
    double t = 0.0;
    const double d = segment_distance(vertices_[k], vertices_[(k + 1) % vertices_.size()], p, &t);
    if (d < best) {
      best = d;
      best_s = cumulative_[k] + t * (cumulative_[k + 1] - cumulative_[k]);
    }
  }
  return wrap(best_s);
}

double Rail::distance_to(const Vec2& p) const { return (point_at(project(p)) - p).norm(); }

double Rail::separation(double a, double b) const {
  const double d = std::abs(wrap(a) - wrap(b));
  return closed_ ? std::min(d, length() - d) : d;
}

std::vector<double> evenly_spaced_slots(const Rail& rail, int count) {
  if (count < 1) throw ConfigError("slot count must be positive");
  std::vector<double> slots(static_cast<std::size_t>(count));
  const double step = rail.closed() ? rail.length() / count
                                    : (count > 1 ? rail.length() / (count - 1) : 0.0);
  for (int k = 0; k < count; ++k) slots[static_cast<std::size_t>(k)] = k * step;
  return slots;
}

// ---------------------------------------------------------------------------
// Wrenches

Wrench point_force_wrench(const Vec2& position, double fz) {
  return {fz, position.y() * fz, -position.x() * fz};
}

Wrench gravity_wrench(const PhysicalParams& theta, double gravity) {
  return point_force_wrench(theta.com(), -theta.mass * gravity);
}

Wrench robot_weight_wrench(const Vec2& position, double robot_mass, double gravity) {
  return point_force_wrench(position, -robot_mass * gravity);
}

Wrench thrust_wrench(const Vec2& position) { return point_force_wrench(position, 1.0); }

// ---------------------------------------------------------------------------
// Payload

void PayloadModel::validate() const {
  std::ostringstream err;
  if (footprint.size() < 3) err << "footprint needs >= 3 vertices; ";
  if (contacts.empty()) err << "no contact points; ";
  if (!(robot_max_thrust > 0.0)) err << "robot_max_thrust must be > 0; ";
  if (!(robot_mass >= 0.0)) err << "robot_mass must be >= 0; ";
  if (n_robots < 2) err << "n_robots must be >= 2; ";
  if (!(gravity > 0.0)) err << "gravity must be > 0; ";
  if (candidates.size() < 2) err << "need >= 2 candidate slots; ";
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    if (footprint.size() >= 3 && !point_in_polygon(footprint, contacts[i], 1e-9))
      err << "contact " << i << " outside footprint; ";
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(candidates[i] >= 0.0 && candidates[i] <= rail.length() + 1e-12))
      err << "candidate " << i << " not on rail; ";
    if (i > 0 && !(candidates[i] > candidates[i - 1])) err << "candidates not in rail order; ";
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw ConfigError("invalid payload: " + msg);
}

PayloadModel make_polygon_payload(Polygon footprint, int slots, std::vector<Vec2> rail_vertices) {
  PayloadModel p;
  if (rail_vertices.empty()) rail_vertices = footprint;
  p.rail = Rail(std::move(rail_vertices), true);
  p.candidates = evenly_spaced_slots(p.rail, slots);
  p.contacts = footprint;
  p.com_region = footprint;
  p.footprint = std::move(footprint);
  return p;
}

PayloadModel make_rectangle_payload(double length, double width, int slots) {
  const double a = 0.5 * length;
  const double b = 0.5 * width;
  Polygon footprint{{a, -b}, {a, b}, {-a, b}, {-a, -b}};
  std::vector<Vec2> rail{{a, 0.0}, {a, b}, {-a, b}, {-a, -b}, {a, -b}};
  return make_polygon_payload(std::move(footprint), slots, std::move(rail));
}

PayloadModel make_lshape_payload(double outer, double arm, int slots) {
  Polygon footprint{{0.0, 0.0}, {outer, 0.0}, {outer, arm}, {arm, arm}, {arm, outer}, {0.0, outer}};
  return make_polygon_payload(std::move(footprint), slots);
}

std::vector<SlotPair> adjacent_pairs(std::size_t candidate_count, bool closed_rail) {
  std::vector<SlotPair> pairs;
  if (candidate_count < 2) return pairs;
  for (std::size_t k = 0; k + 1 < candidate_count; ++k)
    pairs.push_back({static_cast<int>(k), static_cast<int>(k + 1)});
  if (closed_rail && candidate_count >= 3)
    pairs.push_back({static_cast<int>(candidate_count - 1), 0});
  return pairs;
}

// ---------------------------------------------------------------------------
// Parameter grid

std::size_t AxisSpec::count() const {
  return static_cast<std::size_t>(std::floor((max - min) / resolution + 1e-9)) + 1;
}

ParameterGrid::ParameterGrid(GridSpec spec, std::vector<PhysicalParams> points,
                             std::vector<std::array<int, 3>> indices)
    : spec_(spec), points_(std::move(points)), indices_(std::move(indices)) {
  probability_.assign(points_.size(), points_.empty() ? 0.0 : 1.0 / static_cast<double>(points_.size()));
}

void ParameterGrid::set_probability(std::vector<double> weights) {
  if (weights.size() != points_.size()) throw ConfigError("probability size mismatch");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("probability has zero total mass");
  for (double& w : weights) w /= total;
  probability_ = std::move(weights);
}

long ParameterGrid::find(const std::array<int, 3>& idx) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), idx);
  if (it == indices_.end() || *it != idx) return -1;
  return static_cast<long>(it - indices_.begin());
}

ParameterGrid build_parameter_grid(const GridSpec& spec, const Polygon& feasible_region) {
  for (const AxisSpec& a : spec.axes) {
    if (!(a.max >= a.min)) throw ConfigError("grid axis max < min");
    if (!(a.resolution > 0.0)) throw ConfigError("grid resolution must be > 0");
  }
  std::vector<PhysicalParams> points;
  std::vector<std::array<int, 3>> indices;
  const auto& [ax, ay, am] = spec.axes;
  // Lexicographic (x, y, mass) order keeps `indices` sorted for find().
  for (std::size_t i = 0; i < ax.count(); ++i) {
    for (std::size_t j = 0; j < ay.count(); ++j) {
      const Vec2 com{ax.value(i), ay.value(j)};
      if (!feasible_region.empty() && !point_in_polygon(feasible_region, com, 1e-9)) continue;
      for (std::size_t k = 0; k < am.count(); ++k) {
        points.push_back({com.x(), com.y(), am.value(k)});
        indices.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)});
      }
    }
  }
  if (points.empty()) throw ConfigError("parameter grid is empty after COM feasibility filtering");
  return ParameterGrid(spec, std::move(points), std::move(indices));
}

}  // namespace cotransport
