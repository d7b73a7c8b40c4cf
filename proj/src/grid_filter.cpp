#include "auditionlab/errors.hpp"
#include "auditionlab/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auditionlab {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

double gaussian_log_density(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kHalfLogTwoPi;
}

// Mirror index into [0, n) with period 2n (half-sample symmetric).
int fold(int x, int n) {
  const int period = 2 * n;
  int r = x % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

// Blur along one axis of a row-major (x fastest) lattice.
void blur_axis(std::vector<double>& values, const GridSpec& spec, int axis,
               const std::vector<double>& kernel) {
  const int n = axis == 0 ? spec.nx : axis == 1 ? spec.ny : spec.nz;
  if (n == 1) return;  // everything folds back onto the single cell
  const int radius = static_cast<int>(kernel.size() / 2);
  const std::size_t stride =
      axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(spec.nx)
                                : static_cast<std::size_t>(spec.nx) * spec.ny;
  std::vector<double> line(static_cast<std::size_t>(n));
  std::vector<double> out(static_cast<std::size_t>(n));
  const std::size_t total = values.size();
  for (std::size_t base = 0; base < total; ++base) {
    // Visit each line once, from its first element.
    if ((base / stride) % static_cast<std::size_t>(n) != 0) continue;
    for (int i = 0; i < n; ++i) line[i] = values[base + i * stride];
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (line[j] == 0.0) continue;
      for (int k = -radius; k <= radius; ++k) {
        out[fold(j + k, n)] += kernel[k + radius] * line[j];
      }
    }
    for (int i = 0; i < n; ++i) values[base + i * stride] = out[i];
  }
}

}  // namespace

void LikelihoodModel::validate() const {
  sensor.validate();
  if (!use.left && !use.right && !use.itd) {
    throw ValidationError("likelihood model must use at least one observation channel");
  }
  if ((use.left || use.right) && !(sensor.sigma_level_db > 0.0)) {
    throw ValidationError("level likelihood requires sensor.sigma_level_db > 0");
  }
  if (use.itd && !(sensor.sigma_itd_s > 0.0)) {
    throw ValidationError("ITD likelihood requires sensor.sigma_itd_s > 0");
  }
  if (!std::isfinite(source_level_db)) throw ValidationError("source level must be finite");
}

double log_likelihood(const Observation& obs, const Vec3& source_pos, const AgentPose& pose,
                      const LikelihoodModel& model) {
  const SensorModel& sensor = model.sensor;
  const MicPair mics = mic_positions(pose, sensor.d);
  double total = 0.0;
  if (model.use.left) {
    const double expected = with_noise_floor(
        level_at_range(model.source_level_db, (source_pos - mics.left).norm(), sensor),
        sensor.noise_floor_db);
    total += gaussian_log_density(obs.level_left, expected, sensor.sigma_level_db);
  }
  if (model.use.right) {
    const double expected = with_noise_floor(
        level_at_range(model.source_level_db, (source_pos - mics.right).norm(), sensor),
        sensor.noise_floor_db);
    total += gaussian_log_density(obs.level_right, expected, sensor.sigma_level_db);
  }
  if (model.use.itd && obs.itd_valid && obs.itd) {
    total += gaussian_log_density(*obs.itd, itd_unchecked(source_pos, mics, sensor.c),
                                  sensor.sigma_itd_s);
  }
  if (std::isnan(total)) return kLogLikelihoodFloor;
  return std::max(total, kLogLikelihoodFloor);
}

Vec3 GridSpec::center(std::size_t i) const {
  const std::size_t ix = i % static_cast<std::size_t>(nx);
  const std::size_t iy = (i / static_cast<std::size_t>(nx)) % static_cast<std::size_t>(ny);
  const std::size_t iz = i / (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  return origin + resolution * Vec3(static_cast<double>(ix), static_cast<double>(iy),
                                    static_cast<double>(iz));
}

std::size_t GridSpec::cell_of(const Vec3& p) const {
  const Vec3 rel = (p - origin) / resolution;
  const auto idx = [](double v, int n) {
    return std::clamp(static_cast<int>(std::lround(v)), 0, n - 1);
  };
  return index(idx(rel.x(), nx), idx(rel.y(), ny), idx(rel.z(), nz));
}

GridSpec GridSpec::covering(const Bounds& bounds, double resolution) {
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be > 0");
  GridSpec spec;
  spec.resolution = resolution;
  int counts[3];
  for (int axis = 0; axis < 3; ++axis) {
    const double extent = bounds.hi[axis] - bounds.lo[axis];
    if (extent <= 0.0) {
      counts[axis] = 1;
      spec.origin[axis] = bounds.lo[axis];
    } else {
      counts[axis] = std::max(1, static_cast<int>(std::lround(extent / resolution)));
      spec.origin[axis] = bounds.lo[axis] + 0.5 * resolution;
    }
  }
  spec.nx = counts[0];
  spec.ny = counts[1];
  spec.nz = counts[2];
  spec.validate();
  return spec;
}

void GridSpec::validate() const {
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be > 0");
  if (nx < 1 || ny < 1 || nz < 1) throw ValidationError("grid dimensions must be >= 1");
  if (!origin.allFinite()) throw ValidationError("grid origin must be finite");
}

GridBelief GridBelief::uniform(const GridSpec& spec) {
  spec.validate();
  const std::size_t n = spec.size();
  std::vector<Vec3> cells(n);
  for (std::size_t i = 0; i < n; ++i) cells[i] = spec.center(i);
  return GridBelief(spec, std::move(cells),
                    std::vector<double>(n, -std::log(static_cast<double>(n))));
}

GridBelief GridBelief::from_probabilities(const GridSpec& spec, std::vector<double> probs) {
  GridBelief belief = uniform(spec);
  if (probs.size() != belief.size()) {
    throw ValidationError("probability vector does not match the grid size");
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      throw ValidationError("grid probabilities must be finite and non-negative");
    }
    belief.log_weights_[i] =
        probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  belief.normalize();
  return belief;
}

void GridBelief::normalize() {
  double max_log = -std::numeric_limits<double>::infinity();
  for (double w : log_weights_) {
    if (std::isnan(w)) throw DegenerateBelief("grid belief has NaN weights");
    max_log = std::max(max_log, w);
  }
  if (!std::isfinite(max_log)) {
    throw DegenerateBelief("every grid cell has zero weight");
  }
  double sum = 0.0;
  for (double w : log_weights_) sum += std::exp(w - max_log);
  const double log_norm = max_log + std::log(sum);
  for (double& w : log_weights_) w -= log_norm;
}

std::vector<double> GridBelief::probabilities() const {
  std::vector<double> p(log_weights_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_weights_[i]);
  return p;
}

Vec3 GridBelief::mean() const {
  Vec3 m = Vec3::Zero();
  for (std::size_t i = 0; i < cells_.size(); ++i) m += std::exp(log_weights_[i]) * cells_[i];
  return m;
}

std::size_t GridBelief::mode_index() const {
  return static_cast<std::size_t>(
      std::max_element(log_weights_.begin(), log_weights_.end()) - log_weights_.begin());
}

double GridBelief::mass_where(const std::function<bool(const Vec3&)>& predicate) const {
  double mass = 0.0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (predicate(cells_[i])) mass += std::exp(log_weights_[i]);
  }
  return mass;
}

GridBelief grid_predict(const GridBelief& belief, double process_sigma) {
  if (!(process_sigma >= 0.0)) throw ValidationError("process sigma must be >= 0");
  const double resolution = belief.resolution();
  const int radius = static_cast<int>(std::ceil(4.0 * process_sigma / resolution));
  if (process_sigma == 0.0 || radius == 0) return belief;

  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double kernel_sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double x = k * resolution / process_sigma;
    kernel[k + radius] = std::exp(-0.5 * x * x);
    kernel_sum += kernel[k + radius];
  }
  for (double& w : kernel) w /= kernel_sum;

  std::vector<double> probs = belief.probabilities();
  for (int axis = 0; axis < 3; ++axis) blur_axis(probs, belief.spec(), axis, kernel);

  GridBelief out = belief;
  auto& lw = out.mutable_log_weights();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    lw[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  out.normalize();
  return out;
}

GridBelief grid_update(const GridBelief& belief, const Observation& obs, const AgentPose& pose,
                       const LikelihoodModel& model) {
  model.validate();
  GridBelief out = belief;
  auto& lw = out.mutable_log_weights();
  const auto& cells = belief.cells();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double ll = log_likelihood(obs, cells[i], pose, model);
    if (std::isfinite(lw[i])) best = std::max(best, ll);
    lw[i] += ll;
  }
  if (best <= kLogLikelihoodFloor) {
    throw DegenerateBelief("observation likelihood underflows in every supported cell");
  }
  out.normalize();
  return out;
}

double belief_entropy(const GridBelief& belief) {
  double h = 0.0;
  for (double w : belief.log_weights()) {
    if (w == -std::numeric_limits<double>::infinity()) continue;
    const double p = std::exp(w);
    if (p > 0.0) h -= p * w;
  }
  return h;
}

}  // namespace auditionlab
