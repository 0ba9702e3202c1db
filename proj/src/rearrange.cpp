#include "cotransport/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cotransport/errors.hpp"

namespace cotransport {
namespace {

constexpr double kTol = 1e-9;
constexpr double kSnap = 1e-12;
constexpr int kMaxSweeps = 10000;

double positive_mod(double a, double m) {
  double r = std::fmod(a, m);
  if (r < 0.0) r += m;
  return r;
}

std::vector<int> rail_order(const Rail& rail, std::span<const double> arc) {
  std::vector<int> order(arc.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rail.wrap(arc[a]) < rail.wrap(arc[b]); });
  return order;
}

void check_spacing(const Rail& rail, std::span<const double> arc, double min_spacing, const char* what) {
  const std::vector<int> order = rail_order(rail, arc);
  const std::size_t n = order.size();
  const std::size_t gaps = n < 2 ? 0 : rail.closed() ? n : n - 1;
  for (std::size_t k = 0; k < gaps; ++k) {
    const int a = order[k], b = order[(k + 1) % n];
    if (rail.separation(arc[a], arc[b]) < min_spacing - kTol) {
      std::ostringstream msg;
      msg << what << ": robots " << a << " and " << b << " are closer than min_spacing " << min_spacing;
      throw ConfigError(msg.str());
    }
  }
}

struct Lifted {
  std::vector<int> order;       // robots by current arc
  std::vector<double> start;    // lifted current arc, same order
  std::vector<double> goal;     // lifted target arc, same order
  double travel = 0.0;
};

// Targets in robot order lifted onto the real line so that both sequences
// increase together, with the winding that minimizes total travel.
Lifted lift(const Rail& rail, std::span<const double> current, std::span<const double> target) {
  Lifted out;
  out.order = rail_order(rail, current);
  const std::size_t n = out.order.size();
  for (int r : out.order) out.start.push_back(rail.wrap(current[r]));
  out.goal.resize(n);

  if (!rail.closed()) {
    for (std::size_t i = 0; i < n; ++i) {
      out.goal[i] = rail.wrap(target[out.order[i]]);
      if (i > 0 && out.goal[i] < out.goal[i - 1]) {
        std::ostringstream msg;
        msg << "robots " << out.order[i - 1] << " and " << out.order[i]
            << " would have to pass each other on an open rail";
        throw PlanningError(msg.str());
      }
    }
  } else {
    const double L = rail.length();
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = rail.wrap(target[out.order[i]]);
    std::vector<double> rel(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) rel[i] = rel[i - 1] + positive_mod(t[i] - t[i - 1], L);
    const double turn = n > 1 ? rel[n - 1] + positive_mod(t[0] - t[n - 1], L) : L;
    if (turn > L + kTol) {
      std::ostringstream msg;
      msg << "target assignment changes the cyclic order of the robots (winds " << turn / L << " times)";
      throw PlanningError(msg.str());
    }
    double best = std::numeric_limits<double>::infinity();
    for (int w : {0, -1, 1}) {
      double travel = 0.0;
      for (std::size_t i = 0; i < n; ++i) travel += std::abs(t[0] + w * L + rel[i] - out.start[i]);
      if (travel < best - kSnap) {
        best = travel;
        for (std::size_t i = 0; i < n; ++i) out.goal[i] = t[0] + w * L + rel[i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.travel += std::abs(out.goal[i] - out.start[i]);
  return out;
}

}  // namespace

std::vector<double> assign_targets(const Rail& rail, std::span<const double> current,
                                   std::span<const double> target_slots) {
  if (current.size() != target_slots.size())
    throw ConfigError("assign_targets: robot and slot counts differ");
  const std::size_t n = current.size();
  const std::vector<int> robots = rail_order(rail, current);
  std::vector<double> slots(target_slots.begin(), target_slots.end());
  std::sort(slots.begin(), slots.end(), [&](double a, double b) { return rail.wrap(a) < rail.wrap(b); });

  std::vector<double> best;
  double best_travel = std::numeric_limits<double>::infinity();
  const std::size_t rotations = rail.closed() ? n : std::min<std::size_t>(n, 1);
  for (std::size_t k = 0; k < rotations; ++k) {
    std::vector<double> assigned(n);
    for (std::size_t i = 0; i < n; ++i) assigned[robots[i]] = slots[(i + k) % n];
    const double travel = lift(rail, current, assigned).travel;
    if (travel < best_travel - kSnap) {
      best_travel = travel;
      best = std::move(assigned);
    }
  }
  return best;
}

RearrangePlan plan_rearrangement(const Rail& rail, std::span<const double> current,
                                 std::span<const double> target, double min_spacing) {
  if (current.size() != target.size())
    throw ConfigError("plan_rearrangement: robot and target counts differ");
  if (!(min_spacing >= 0.0)) throw ConfigError("plan_rearrangement: min_spacing must be >= 0");
  check_spacing(rail, current, min_spacing, "current positions");
  check_spacing(rail, target, min_spacing, "targets");

  RearrangePlan plan;
  plan.targets.assign(target.begin(), target.end());
  const std::size_t n = current.size();
  if (n == 0) return plan;

  const Lifted lifted = lift(rail, current, target);
  const double L = rail.length();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pos = lifted.start;

  auto next_of = [&](std::size_t i) {
    if (i + 1 < n) return pos[i + 1];
    return rail.closed() && n > 1 ? pos[0] + L : inf;
  };
  auto prev_of = [&](std::size_t i) {
    if (i > 0) return pos[i - 1];
    return rail.closed() && n > 1 ? pos[n - 1] - L : -inf;
  };
  auto record = [&](std::size_t i, double to) {
    const int robot = lifted.order[i];
    const bool arrived = std::abs(to - lifted.goal[i]) <= kSnap;
    RearrangeMove m;
    m.robot = robot;
    m.from = rail.wrap(pos[i]);
    m.to = arrived ? rail.wrap(target[robot]) : rail.wrap(to);
    m.travel = (arrived ? lifted.goal[i] : to) - pos[i];
    plan.moves.push_back(m);
    plan.total_travel += std::abs(m.travel);
    pos[i] = arrived ? lifted.goal[i] : to;
  };

  for (int sweep = 0;; ++sweep) {
    bool pending = false, progress = false;
    for (std::size_t k = n; k-- > 0;) {
      if (lifted.goal[k] - pos[k] <= kSnap) continue;
      pending = true;
      const double to = std::min(lifted.goal[k], next_of(k) - min_spacing);
      if (to > pos[k] + kSnap) {
        record(k, to);
        progress = true;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (pos[k] - lifted.goal[k] <= kSnap) continue;
      pending = true;
      const double to = std::max(lifted.goal[k], prev_of(k) + min_spacing);
      if (to < pos[k] - kSnap) {
        record(k, to);
        progress = true;
      }
    }
    if (!pending) break;
    if (!progress || sweep == kMaxSweeps) throw PlanningError("rearrangement blocked: no robot can advance");
  }
  return plan;
}

}  // namespace cotransport
