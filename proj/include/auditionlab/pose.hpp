#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>
#include <variant>

namespace auditionlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;

/// Rigid pose of a two-microphone "rod" agent. The interaural axis is the
/// body-frame y axis; the left microphone sits on -y, the right on +y.
struct AgentPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();  // world <- body

  /// World-frame image of the body y axis.
  Vec3 interaural_axis() const { return orientation * Vec3::UnitY(); }

  void validate() const;
};

struct MicPair {
  Vec3 left;
  Vec3 right;
};

/// Microphone positions at position -/+ (d/2) * interaural_axis.
MicPair mic_positions(const AgentPose& pose, double d);

/// Quaternion for a rotation vector (axis * angle, radians).
Quat quat_from_axis_angle(const Vec3& axis_angle);

struct Translate {
  Vec3 delta = Vec3::Zero();  // body frame, meters
};

struct Rotate {
  Vec3 axis_angle = Vec3::Zero();  // body frame, radians
};

/// Do nothing and listen.
struct Observe {};

/// Commit to a source location estimate. Does not move the agent.
struct Declare {
  Vec3 position = Vec3::Zero();
};

using Action = std::variant<Translate, Rotate, Observe, Declare>;

std::string describe(const Action& action);

}  // namespace auditionlab
