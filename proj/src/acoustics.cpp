#include "auditionlab/acoustics.hpp"

#include "auditionlab/errors.hpp"

#include <cmath>

namespace auditionlab {

namespace {

constexpr double kDbPerNeper = 20.0 / 2.302585092994045684;  // 20 / ln 10

double power(double level_db) { return std::pow(10.0, level_db / 10.0); }

}  // namespace

void SensorModel::validate() const {
  if (!(d > 0.0)) throw ValidationError("sensor.d must satisfy d > 0");
  if (!(c > 0.0)) throw ValidationError("sensor.c must satisfy c > 0");
  if (!(r_ref > 0.0)) throw ValidationError("sensor.r_ref must satisfy r_ref > 0");
  if (!(r_min > 0.0)) throw ValidationError("sensor.r_min must satisfy r_min > 0");
  if (!std::isfinite(noise_floor_db)) throw ValidationError("sensor.noise_floor_db must be finite");
  if (!(sigma_level_db >= 0.0)) throw ValidationError("sensor.sigma_level_db must be >= 0");
  if (!(sigma_itd_s >= 0.0)) throw ValidationError("sensor.sigma_itd_s must be >= 0");
  if (!std::isfinite(snr_gate_db)) throw ValidationError("sensor.snr_gate_db must be finite");
}

double level_at_range(double level_ref, double r, const SensorModel& model) {
  return level_ref - 20.0 * std::log10(std::max(r, model.r_min) / model.r_ref);
}

double received_level(const SoundSource& source, const Vec3& mic, const SensorModel& model,
                      std::int64_t time_step) {
  if (!source.active_at(time_step)) return kNoSignal;
  if (!source.position.allFinite() || !mic.allFinite()) {
    throw ValidationError("received_level: non-finite position");
  }
  return level_at_range(source.level_ref, (source.position - mic).norm(), model);
}

double with_noise_floor(double level_db, double noise_floor_db) {
  if (level_db == kNoSignal) return noise_floor_db;
  // Factor out the larger term so neither power overflows.
  const double hi = std::max(level_db, noise_floor_db);
  const double lo = std::min(level_db, noise_floor_db);
  return hi + 10.0 * std::log10(1.0 + std::pow(10.0, (lo - hi) / 10.0));
}

double itd_unchecked(const Vec3& source_pos, const MicPair& mics, double c) {
  return ((source_pos - mics.right).norm() - (source_pos - mics.left).norm()) / c;
}

double itd_true(const Vec3& source_pos, const AgentPose& pose, const SensorModel& model) {
  const MicPair mics = mic_positions(pose, model.d);
  const double r_left = (source_pos - mics.left).norm();
  const double r_right = (source_pos - mics.right).norm();
  if (r_left < model.r_min || r_right < model.r_min) {
    throw GeometryError("source lies within r_min of a microphone");
  }
  return (r_right - r_left) / model.c;
}

Observation observe(const WorldState& state, const SensorModel& model, RandomStream& rng) {
  const MicPair mics = mic_positions(state.agent, model.d);
  const double floor_power = power(model.noise_floor_db);
  double sum_left = floor_power;
  double sum_right = floor_power;

  const SoundSource* loudest = nullptr;
  double loudest_left = kNoSignal;
  double loudest_right = kNoSignal;
  for (const auto& source : state.sources) {
    const double left = received_level(source, mics.left, model, state.time_step);
    if (left == kNoSignal) continue;
    const double right = received_level(source, mics.right, model, state.time_step);
    sum_left += power(left);
    sum_right += power(right);
    if (loudest == nullptr || std::max(left, right) > std::max(loudest_left, loudest_right)) {
      loudest = &source;
      loudest_left = left;
      loudest_right = right;
    }
  }

  Observation obs;
  obs.time_step = state.time_step;
  obs.level_left = 10.0 * std::log10(sum_left) + model.sigma_level_db * rng.normal();
  obs.level_right = 10.0 * std::log10(sum_right) + model.sigma_level_db * rng.normal();

  if (loudest != nullptr &&
      std::min(loudest_left, loudest_right) - model.noise_floor_db >= model.snr_gate_db) {
    const double r_left = (loudest->position - mics.left).norm();
    const double r_right = (loudest->position - mics.right).norm();
    if (r_left >= model.r_min && r_right >= model.r_min) {
      const double bound = model.d / model.c + 5.0 * model.sigma_itd_s;
      const double tau = (r_right - r_left) / model.c + model.sigma_itd_s * rng.normal();
      obs.itd = std::clamp(tau, -bound, bound);
      obs.itd_valid = true;
    }
  }
  return obs;
}

PredictedObservation predict_observation(const Vec3& source_pos, double level_ref,
                                         const AgentPose& pose, const SensorModel& model) {
  const MicPair mics = mic_positions(pose, model.d);
  const double r_left = (source_pos - mics.left).norm();
  const double r_right = (source_pos - mics.right).norm();
  PredictedObservation out;
  out.itd = (r_right - r_left) / model.c;
  out.level_left = with_noise_floor(level_at_range(level_ref, r_left, model), model.noise_floor_db);
  out.level_right =
      with_noise_floor(level_at_range(level_ref, r_right, model), model.noise_floor_db);
  return out;
}

Mat3 measurement_jacobian(const Vec3& source_pos, const AgentPose& pose, const SensorModel& model) {
  const MicPair mics = mic_positions(pose, model.d);
  const Vec3 from_left = source_pos - mics.left;
  const Vec3 from_right = source_pos - mics.right;
  const double r_left = from_left.norm();
  const double r_right = from_right.norm();
  if (r_left < model.r_min || r_right < model.r_min) {
    throw GeometryError("measurement_jacobian: source lies within r_min of a microphone");
  }
  Mat3 jacobian;
  jacobian.row(0) = (from_right / r_right - from_left / r_left).transpose() / model.c;
  // d/dp [-20 log10 r] = -(20 / ln 10) * (p - m) / r^2
  jacobian.row(1) = (-kDbPerNeper / (r_left * r_left)) * from_left.transpose();
  jacobian.row(2) = (-kDbPerNeper / (r_right * r_right)) * from_right.transpose();
  return jacobian;
}

}  // namespace auditionlab
