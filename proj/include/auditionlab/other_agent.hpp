#pragma once

#include "auditionlab/pose.hpp"
#include "auditionlab/sound_source.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace auditionlab {

/// What an action of kind K sounds like when another agent performs it.
struct EmissionTemplate {
  double level_ref = 70.0;
  std::int64_t duration = 1;  // steps
  SourceKind kind = SourceKind::impulsive;
};

/// The act becomes audible at observation step `step`.
struct ScriptedAct {
  std::int64_t step = 0;
  std::string kind;
  Vec3 delta = Vec3::Zero();  // world frame
};

struct ScriptedPolicy {
  std::vector<ScriptedAct> acts;
};

/// Planar Gaussian steps; acts with probability `act_probability` per step,
/// picking one emission kind uniformly.
struct RandomWalkPolicy {
  double step_sigma = 0.0;
  double act_probability = 0.0;
};

struct OtherAgent {
  int id = 0;
  AgentPose pose;
  std::variant<ScriptedPolicy, RandomWalkPolicy> policy;
  std::map<std::string, EmissionTemplate> emissions;
  std::int64_t arrival_step = 0;
  std::optional<std::int64_t> departure_step;
  /// Spawned by the Poisson arrival process (subject to random departure).
  bool spawned = false;

  bool present_at(std::int64_t step) const {
    return step >= arrival_step && (!departure_step || step < *departure_step);
  }

  void validate() const;
};

}  // namespace auditionlab
