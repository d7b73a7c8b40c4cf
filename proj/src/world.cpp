#include "auditionlab/world.hpp"

#include "auditionlab/errors.hpp"

#include <cmath>
#include <sstream>

namespace auditionlab {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void AgentPose::validate() const {
  if (!finite(position) || !orientation.coeffs().allFinite()) {
    throw ValidationError("agent pose has non-finite components");
  }
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw ValidationError("agent orientation is not a unit quaternion");
  }
}

MicPair mic_positions(const AgentPose& pose, double d) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw ValidationError("microphone spacing d must be > 0");
  }
  const Vec3 half = 0.5 * d * pose.interaural_axis();
  return {pose.position - half, pose.position + half};
}

Quat quat_from_axis_angle(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-300) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, axis_angle / angle));
}

std::string describe(const Action& action) {
  std::ostringstream out;
  out.precision(6);
  std::visit(
      [&out](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Translate>) {
          out << "translate(" << a.delta.x() << ' ' << a.delta.y() << ' ' << a.delta.z() << ')';
        } else if constexpr (std::is_same_v<T, Rotate>) {
          out << "rotate(" << a.axis_angle.x() << ' ' << a.axis_angle.y() << ' '
              << a.axis_angle.z() << ')';
        } else if constexpr (std::is_same_v<T, Observe>) {
          out << "observe";
        } else {
          out << "declare(" << a.position.x() << ' ' << a.position.y() << ' ' << a.position.z()
              << ')';
        }
      },
      action);
  return out.str();
}

bool SoundSource::active_at(std::int64_t step) const {
  if (schedule.empty()) return true;
  for (const auto& interval : schedule) {
    if (step >= interval.on && step < interval.off) return true;
  }
  return false;
}

bool SoundSource::expired_at(std::int64_t step) const {
  return !schedule.empty() && schedule.back().off <= step;
}

void SoundSource::validate() const {
  if (!finite(position)) throw ValidationError("source position is not finite");
  if (!std::isfinite(level_ref)) throw ValidationError("source level_ref is not finite");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].off <= schedule[i].on) {
      throw ValidationError("source schedule interval must have off > on");
    }
    if (i > 0 && schedule[i].on < schedule[i - 1].off) {
      throw ValidationError("source schedule intervals must be sorted and non-overlapping");
    }
  }
}

void OtherAgent::validate() const {
  pose.validate();
  if (departure_step && *departure_step <= arrival_step) {
    throw ValidationError("other agent departure must be after arrival");
  }
  for (const auto& [kind, emission] : emissions) {
    if (!std::isfinite(emission.level_ref)) {
      throw ValidationError("emission '" + kind + "' has a non-finite level");
    }
    if (emission.duration < 1) {
      throw ValidationError("emission '" + kind + "' must last at least one step");
    }
  }
}

bool Bounds::contains(const Vec3& p, double slack) const {
  return (p.array() >= lo.array() - slack).all() && (p.array() <= hi.array() + slack).all();
}

Vec3 Bounds::clamp(const Vec3& p) const { return p.cwiseMax(lo).cwiseMin(hi); }

void WorldParams::validate() const {
  if (!(noise.sigma_translate >= 0.0) || !(noise.sigma_rotate >= 0.0)) {
    throw ValidationError("transition noise sigmas must be >= 0");
  }
  if (!(max_translate > 0.0) || !(max_rotate > 0.0)) {
    throw ValidationError("per-step action limits must be > 0");
  }
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  if (bounds && !(bounds->hi.array() >= bounds->lo.array()).all()) {
    throw ValidationError("bounds must satisfy min <= max");
  }
}

WorldState step(const WorldState& state, const Action& action, const WorldParams& params,
                RandomStream& rng) {
  state.agent.validate();
  WorldState next = state;
  next.time_step = state.time_step + 1;
  AgentPose& pose = next.agent;

  if (const auto* translate = std::get_if<Translate>(&action)) {
    if (!finite(translate->delta)) throw ValidationError("translate delta is not finite");
    const double magnitude = translate->delta.norm();
    if (magnitude > params.max_translate + 1e-12) {
      throw BoundViolation("translate magnitude " + std::to_string(magnitude) +
                           " exceeds per-step limit " + std::to_string(params.max_translate));
    }
    const Vec3 target = pose.position + pose.orientation * translate->delta;
    if (params.bounds && !params.bounds->contains(target)) {
      throw BoundViolation("translate leaves the world bounds");
    }
    Vec3 moved = target;
    if (params.noise.sigma_translate > 0.0) {
      for (int axis = 0; axis < 3; ++axis) {
        moved[axis] += rng.normal(0.0, params.noise.sigma_translate);
      }
    }
    pose.position = params.bounds ? params.bounds->clamp(moved) : moved;
  } else if (const auto* rotate = std::get_if<Rotate>(&action)) {
    if (!finite(rotate->axis_angle)) throw ValidationError("rotation is not finite");
    const double angle = rotate->axis_angle.norm();
    if (angle > params.max_rotate + 1e-12) {
      throw BoundViolation("rotation angle " + std::to_string(angle) +
                           " exceeds per-step limit " + std::to_string(params.max_rotate));
    }
    Quat q = pose.orientation * quat_from_axis_angle(rotate->axis_angle);
    if (params.noise.sigma_rotate > 0.0) {
      Vec3 perturbation;
      for (int axis = 0; axis < 3; ++axis) {
        perturbation[axis] = rng.normal(0.0, params.noise.sigma_rotate);
      }
      q = q * quat_from_axis_angle(perturbation);
    }
    q.normalize();
    pose.orientation = q;
  } else if (const auto* declare = std::get_if<Declare>(&action)) {
    if (!finite(declare->position)) throw ValidationError("declared position is not finite");
  }
  return next;
}

}  // namespace auditionlab
