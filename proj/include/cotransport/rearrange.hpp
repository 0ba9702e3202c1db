#pragma once

#include <span>
#include <vector>

#include "cotransport/payload_model.hpp"

namespace cotransport {

struct RearrangeMove {
  int robot = 0;
  double from = 0.0;  // arc length on the rail
  double to = 0.0;
  double travel = 0.0;  // signed distance along the rail, + in the arc direction
};

struct RearrangePlan {
  std::vector<RearrangeMove> moves;  // executed one at a time, in order
  std::vector<double> targets;       // per robot
  double total_travel = 0.0;
};

/// Matches robots to target slots without changing their order on the rail.
/// On a closed rail every cyclic rotation of the matching is tried and the
/// one with the least total travel wins (ties to the smaller rotation).
/// Result is indexed by robot.
std::vector<double> assign_targets(const Rail& rail, std::span<const double> current,
                                   std::span<const double> target_slots);

/// Sequences single-robot moves from current[i] to target[i]. Robots never
/// pass each other and keep at least min_spacing along the rail throughout.
/// Throws PlanningError when the per-robot targets change the rail order,
/// ConfigError when the start or goal already violate the spacing.
RearrangePlan plan_rearrangement(const Rail& rail, std::span<const double> current,
                                 std::span<const double> target, double min_spacing);

}  // namespace cotransport
