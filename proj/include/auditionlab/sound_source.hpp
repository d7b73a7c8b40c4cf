#pragma once

#include "auditionlab/pose.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace auditionlab {

/// Half-open activity window [on, off) in time steps.
struct ActiveInterval {
  std::int64_t on = 0;
  std::int64_t off = 0;
};

enum class SourceKind { continuous, impulsive };

struct SoundSource {
  int id = 0;
  Vec3 position = Vec3::Zero();
  double level_ref = 60.0;  // dB at r_ref
  /// Empty schedule means always active.
  std::vector<ActiveInterval> schedule;
  SourceKind kind = SourceKind::continuous;
  /// Other agent that produced this source, when it is an emission.
  std::optional<int> emitter;

  bool active_at(std::int64_t step) const;

  /// True once every interval has ended by `step`. Never true for an empty schedule.
  bool expired_at(std::int64_t step) const;

  void validate() const;
};

}  // namespace auditionlab
