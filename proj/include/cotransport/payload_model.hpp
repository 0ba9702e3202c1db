#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace cotransport {

using Vec2 = Eigen::Vector2d;
using Polygon = std::vector<Vec2>;

double polygon_area(const Polygon& poly);
Vec2 polygon_centroid(const Polygon& poly);
double polygon_perimeter(const Polygon& poly);
// Points on the boundary (within tol) count as inside.
bool point_in_polygon(const Polygon& poly, const Vec2& p, double tol = 1e-12);

/// Piecewise-linear path parameterized by arc length. A closed rail wraps
/// around; an open rail clamps to its endpoints.
class Rail {
 public:
  Rail() = default;
  Rail(std::vector<Vec2> vertices, bool closed);

  bool closed() const { return closed_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  const std::vector<Vec2>& vertices() const { return vertices_; }

  // Maps s into [0, length) on a closed rail, clamps on an open one.
  double wrap(double s) const;
  Vec2 point_at(double s) const;
  // Unit direction of travel at s.
  Vec2 tangent_at(double s) const;
  // Arc length of the closest rail point.
  double project(const Vec2& p) const;
  double distance_to(const Vec2& p) const;
  // Shortest along-rail distance between two arc-length coordinates.
  double separation(double a, double b) const;

 private:
  std::size_t segment_of(double s) const;

  std::vector<Vec2> vertices_;
  std::vector<double> cumulative_;  // cumulative_[k] = arc length at vertex k
  bool closed_ = true;
};

std::vector<double> evenly_spaced_slots(const Rail& rail, int count);

/// Reduced planar wrench: vertical force and the two horizontal torques.
/// Torques follow the right-handed convention with z up, so a vertical
/// force fz at (x, y) yields tx = y * fz and ty = -x * fz.
struct Wrench {
  double fz = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Eigen::Vector3d vec() const { return {fz, tx, ty}; }
  Wrench& operator+=(const Wrench& o) {
    fz += o.fz;
    tx += o.tx;
    ty += o.ty;
    return *this;
  }
  friend Wrench operator+(Wrench a, const Wrench& b) { return a += b; }
  friend Wrench operator*(double k, const Wrench& w) { return {k * w.fz, k * w.tx, k * w.ty}; }
  friend Wrench operator-(const Wrench& w) { return {-w.fz, -w.tx, -w.ty}; }
};

/// Hypothesis for the unknown payload: planar COM and mass.
struct PhysicalParams {
  double com_x = 0.0;
  double com_y = 0.0;
  double mass = 0.0;

  Vec2 com() const { return {com_x, com_y}; }
  double operator[](std::size_t axis) const {
    return axis == 0 ? com_x : axis == 1 ? com_y : mass;
  }
};

Wrench point_force_wrench(const Vec2& position, double fz);
Wrench gravity_wrench(const PhysicalParams& theta, double gravity);
Wrench robot_weight_wrench(const Vec2& position, double robot_mass, double gravity);
// Unit upward force at position.
Wrench thrust_wrench(const Vec2& position);

struct PayloadModel {
  Polygon footprint;
  Polygon com_region;  // where the COM hypotheses may lie
  std::vector<Vec2> contacts;
  Rail rail;
  std::vector<double> candidates;  // attachment slots as rail arc lengths, ascending
  double robot_mass = 0.1;
  double robot_max_thrust = 14.2;
  int n_robots = 8;
  double gravity = 9.81;

  Vec2 candidate_point(std::size_t i) const { return rail.point_at(candidates.at(i)); }
  // Throws ConfigError on any broken invariant.
  void validate() const;
};

struct SlotPair {
  int first = 0;
  int second = 0;
  friend bool operator==(const SlotPair&, const SlotPair&) = default;
};

// Neighbouring candidate slots in rail order, plus (last, first) on a closed
// rail with at least three slots.
std::vector<SlotPair> adjacent_pairs(std::size_t candidate_count, bool closed_rail);

struct AxisSpec {
  double min = 0.0;
  double max = 0.0;
  double resolution = 1.0;

  std::size_t count() const;
  double value(std::size_t k) const { return min + static_cast<double>(k) * resolution; }
};

struct GridSpec {
  std::array<AxisSpec, 3> axes;  // com_x, com_y, mass
};

class ParameterGrid {
 public:
  ParameterGrid() = default;
  ParameterGrid(GridSpec spec, std::vector<PhysicalParams> points,
                std::vector<std::array<int, 3>> indices);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<PhysicalParams>& points() const { return points_; }
  const std::vector<std::array<int, 3>>& indices() const { return indices_; }
  const std::vector<double>& probability() const { return probability_; }

  // Replaces the distribution; weights are renormalized. Throws if they sum to 0.
  void set_probability(std::vector<double> weights);
  // Flat index of the grid point with the given per-axis indices, or -1.
  long find(const std::array<int, 3>& idx) const;

 private:
  GridSpec spec_;
  std::vector<PhysicalParams> points_;
  std::vector<std::array<int, 3>> indices_;
  std::vector<double> probability_;
};

// Closed rail along the footprint boundary, `slots` evenly spaced candidates,
// contacts at the footprint vertices and the footprint as COM region.
PayloadModel make_polygon_payload(Polygon footprint, int slots, std::vector<Vec2> rail_vertices = {});
// length x width slab centred on the origin, long axis along +x. The rail
// starts at the middle of the +x end edge and runs counter-clockwise.
PayloadModel make_rectangle_payload(double length = 1.76, double width = 0.2, int slots = 12);
// L-shaped slab: outer x outer square minus the (outer - arm)^2 notch at the +x/+y corner.
PayloadModel make_lshape_payload(double outer = 0.62, double arm = 0.25, int slots = 12);

// Uniform prior over every axis-grid point whose COM lies in feasible_region.
ParameterGrid build_parameter_grid(const GridSpec& spec, const Polygon& feasible_region);

}  // namespace cotransport
