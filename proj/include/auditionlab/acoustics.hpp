#pragma once

#include "auditionlab/pose.hpp"
#include "auditionlab/random.hpp"
#include "auditionlab/sound_source.hpp"
#include "auditionlab/world.hpp"

#include <cstdint>
#include <limits>
#include <optional>

namespace auditionlab {

/// Received level of an inactive source.
inline constexpr double kNoSignal = -std::numeric_limits<double>::infinity();

struct SensorModel {
  double d = 0.2;                // rod length, m
  double c = 343.0;              // speed of sound, m/s
  double r_ref = 1.0;            // reference distance of source levels, m
  double r_min = 0.05;           // range clamp, m
  double noise_floor_db = 30.0;  // N0
  double sigma_level_db = 1.0;
  double sigma_itd_s = 1e-5;
  double snr_gate_db = 10.0;  // ITD is reported only above this per-mic SNR

  void validate() const;
};

struct Observation {
  double level_left = 0.0;   // dB
  double level_right = 0.0;  // dB
  std::optional<double> itd;  // s, (r_right - r_left) / c
  bool itd_valid = false;
  std::int64_t time_step = 0;

  double ild() const { return level_left - level_right; }
  double max_level() const { return level_left > level_right ? level_left : level_right; }
};

/// Spherical spreading: level_ref - 20 log10(max(r, r_min) / r_ref).
double level_at_range(double level_ref, double r, const SensorModel& model);

/// Noise-free level of `source` at `mic`; kNoSignal when the source is
/// inactive at `time_step`.
double received_level(const SoundSource& source, const Vec3& mic, const SensorModel& model,
                      std::int64_t time_step);

/// Power sum of a signal level with the noise floor, 10 log10(10^(L/10) + 10^(N0/10)).
double with_noise_floor(double level_db, double noise_floor_db);

/// Exact path-difference ITD, (|s - mic_right| - |s - mic_left|) / c.
/// Throws GeometryError when the source is within r_min of either microphone.
double itd_true(const Vec3& source_pos, const AgentPose& pose, const SensorModel& model);

/// Same path difference without the degeneracy check.
double itd_unchecked(const Vec3& source_pos, const MicPair& mics, double c);

/// Measurement model o_t ~ p(o_t | s_t). Per microphone the active sources
/// and the noise floor are power-summed and Gaussian dB noise is added. ITD
/// comes from the loudest active source and is valid only when that source
/// clears snr_gate_db at both microphones. Draw order: left noise, right
/// noise, then ITD noise when valid.
Observation observe(const WorldState& state, const SensorModel& model, RandomStream& rng);

/// Noise-free observation of a single source of known level, including the
/// noise floor in both level channels.
struct PredictedObservation {
  double itd = 0.0;
  double level_left = 0.0;
  double level_right = 0.0;
};

PredictedObservation predict_observation(const Vec3& source_pos, double level_ref,
                                         const AgentPose& pose, const SensorModel& model);

/// Rows: d[itd, L_left, L_right] / d(source position). Level rows are the
/// derivative of the spreading law (zero inside the r_min clamp).
Mat3 measurement_jacobian(const Vec3& source_pos, const AgentPose& pose, const SensorModel& model);

}  // namespace auditionlab
