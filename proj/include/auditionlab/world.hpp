#pragma once

#include "auditionlab/other_agent.hpp"
#include "auditionlab/pose.hpp"
#include "auditionlab/random.hpp"
#include "auditionlab/sound_source.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace auditionlab {

struct TransitionNoise {
  double sigma_translate = 0.0;  // m, per axis
  double sigma_rotate = 0.0;     // rad, per axis-angle component
};

/// Axis-aligned box. Degenerate extents (lo == hi) are allowed for planar worlds.
struct Bounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, double slack = 1e-9) const;
  Vec3 clamp(const Vec3& p) const;
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
};

struct WorldParams {
  TransitionNoise noise;
  double max_translate = 1.0;  // m per step
  double max_rotate = kPi;     // rad per step
  std::optional<Bounds> bounds;
  double dt = 0.1;  // s per step; schedules are in steps

  void validate() const;
};

struct WorldState {
  std::int64_t time_step = 0;
  AgentPose agent;
  std::vector<SoundSource> sources;
  std::vector<OtherAgent> other_agents;
  int next_source_id = 1000;
  int next_agent_id = 1000;
};

/// Transition model s_t ~ p(s_t | s_{t-1}, a_{t-1}).
///
/// Translate moves by `delta` expressed in the body frame plus isotropic
/// Gaussian noise; Rotate composes the body-frame rotation and then a
/// Gaussian axis-angle perturbation and renormalizes. Observe and Declare
/// leave the pose untouched. When bounds are set, the nominal target must
/// lie inside them and the noisy result is clamped to them.
WorldState step(const WorldState& state, const Action& action, const WorldParams& params,
                RandomStream& rng);

}  // namespace auditionlab
