#include "auditionlab/planning.hpp"

#include <cmath>

namespace auditionlab {

namespace {

Translate heading_step(double heading, double step) {
  return {Vec3(step * std::cos(heading), step * std::sin(heading), 0.0)};
}

}  // namespace

Translate random_walk_action(double step, RandomStream& rng) {
  return heading_step(rng.uniform(0.0, 2.0 * kPi), step);
}

Translate gradient_follow_action(std::span<const SearchRecord> history,
                                 const GradientFollowParams& params, RandomStream& rng) {
  // Nothing to difference yet: probe in a random direction.
  if (history.size() < 2) return random_walk_action(params.step, rng);
  const SearchRecord& last = history[history.size() - 1];
  const SearchRecord& previous = history[history.size() - 2];
  const Vec3 displacement = last.position - previous.position;
  const double planar = std::hypot(displacement.x(), displacement.y());
  const double change = last.level - previous.level;
  if (planar < 1e-9 || std::abs(change) <= params.epsilon_db) {
    return random_walk_action(params.step, rng);
  }
  double heading = std::atan2(displacement.y(), displacement.x());
  if (change < 0.0) heading += params.turn_angle;
  return heading_step(heading, params.step);
}

}  // namespace auditionlab
