#include "auditionlab/errors.hpp"
#include "auditionlab/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auditionlab {

double ParticleBelief::ess() const {
  double sum_sq = 0.0;
  for (double w : weights) sum_sq += w * w;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

Vec3 ParticleBelief::mean() const {
  Vec3 m = Vec3::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i) m += weights[i] * particles[i];
  return m;
}

Mat3 ParticleBelief::covariance() const {
  const Vec3 m = mean();
  Mat3 c = Mat3::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Vec3 d = particles[i] - m;
    c += weights[i] * d * d.transpose();
  }
  return c;
}

ParticleBelief ParticleBelief::uniform(const Bounds& bounds, std::size_t n, RandomStream& rng) {
  if (n == 0) throw ValidationError("particle count must be >= 1");
  ParticleBelief belief;
  belief.particles.resize(n);
  belief.weights.assign(n, 1.0 / static_cast<double>(n));
  for (auto& p : belief.particles) {
    for (int axis = 0; axis < 3; ++axis) p[axis] = rng.uniform(bounds.lo[axis], bounds.hi[axis]);
  }
  return belief;
}

void ParticleBelief::validate() const {
  if (particles.empty() || particles.size() != weights.size()) {
    throw ValidationError("particle belief needs one weight per particle");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("particle weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("particle weights must sum to 1");
}

std::vector<std::size_t> systematic_resample(const std::vector<double>& weights,
                                             RandomStream& rng) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> picks(n);
  if (n == 0) return picks;
  const double step = 1.0 / static_cast<double>(n);
  double target = rng.uniform() * step;
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (target > cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[j];
    }
    picks[i] = j;
    target += step;
  }
  return picks;
}

PfStepResult pf_step(const ParticleBelief& belief, const Observation& obs, const AgentPose& pose,
                     const LikelihoodModel& model, const PfParams& params, RandomStream& rng) {
  belief.validate();
  model.validate();
  const std::size_t n = belief.particles.size();

  std::vector<double> log_w(n);
  double max_log = -std::numeric_limits<double>::infinity();
  double max_lik = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double ll = log_likelihood(obs, belief.particles[i], pose, model);
    max_lik = std::max(max_lik, ll);
    log_w[i] = (belief.weights[i] > 0.0 ? std::log(belief.weights[i])
                                        : -std::numeric_limits<double>::infinity()) +
               ll;
    max_log = std::max(max_log, log_w[i]);
  }

  PfStepResult result;
  if (!std::isfinite(max_log) || max_lik <= kLogLikelihoodFloor) {
    // No particle explains the observation.
    result.belief = ParticleBelief::uniform(params.bounds, n, rng);
    result.reinitialized = true;
    return result;
  }

  ParticleBelief& out = result.belief;
  out.particles = belief.particles;
  out.weights.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = std::exp(log_w[i] - max_log);
    sum += out.weights[i];
  }
  for (double& w : out.weights) w /= sum;

  if (out.ess() < params.resample_fraction * static_cast<double>(n)) {
    const std::vector<std::size_t> picks = systematic_resample(out.weights, rng);
    std::vector<Vec3> resampled(n);
    const Vec3 extent = params.bounds.extent();
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 p = out.particles[picks[i]];
      if (params.jitter > 0.0) {
        for (int axis = 0; axis < 3; ++axis) {
          if (extent[axis] > 0.0) p[axis] += rng.normal(0.0, params.jitter);
        }
        p = params.bounds.clamp(p);
      }
      resampled[i] = p;
    }
    out.particles = std::move(resampled);
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    result.resampled = true;
  }
  return result;
}

}  // namespace auditionlab
