#pragma once

#include "auditionlab/acoustics.hpp"
#include "auditionlab/pose.hpp"
#include "auditionlab/random.hpp"
#include "auditionlab/world.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace auditionlab {

/// Which observation channels a filter conditions on.
struct MeasurementSelect {
  bool left = true;
  bool right = true;
  bool itd = true;
};

/// Observation likelihood for a single static source of known level.
struct LikelihoodModel {
  SensorModel sensor;
  double source_level_db = 70.0;
  MeasurementSelect use;

  void validate() const;
};

/// Per-cell log-likelihoods are floored here so that a single outlier
/// cannot drive every cell to exp(-inf).
inline constexpr double kLogLikelihoodFloor = -700.0;

/// log p(obs | source at `source_pos`), Gaussian in each selected level and,
/// when the observation carries a valid ITD, Gaussian in ITD. Clamped at
/// kLogLikelihoodFloor.
double log_likelihood(const Observation& obs, const Vec3& source_pos, const AgentPose& pose,
                      const LikelihoodModel& model);

// ---------------------------------------------------------------------------
// Grid filter

/// Regular lattice of cell centers: origin + (i, j, k) * resolution.
struct GridSpec {
  Vec3 origin = Vec3::Zero();  // center of cell (0, 0, 0)
  double resolution = 0.25;
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * static_cast<std::size_t>(ny) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(ix);
  }
  Vec3 center(std::size_t i) const;
  /// Index of the cell containing p (clamped to the lattice).
  std::size_t cell_of(const Vec3& p) const;

  /// Cells of size `resolution` tiling `bounds`; a zero-extent axis gets one cell.
  static GridSpec covering(const Bounds& bounds, double resolution);

  void validate() const;
};

class GridBelief {
 public:
  static GridBelief uniform(const GridSpec& spec);

  /// Takes probabilities (not log weights); normalizes them.
  static GridBelief from_probabilities(const GridSpec& spec, std::vector<double> probs);

  const GridSpec& spec() const { return spec_; }
  const std::vector<Vec3>& cells() const { return cells_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  std::vector<double>& mutable_log_weights() { return log_weights_; }
  double resolution() const { return spec_.resolution; }
  std::size_t size() const { return cells_.size(); }

  /// Shift log weights so that sum(exp) = 1. Throws DegenerateBelief when
  /// every weight is -inf or any weight is NaN.
  void normalize();

  std::vector<double> probabilities() const;
  Vec3 mean() const;
  std::size_t mode_index() const;  // ties -> lowest index
  Vec3 mode() const { return cells_[mode_index()]; }
  double mass_where(const std::function<bool(const Vec3&)>& predicate) const;

 private:
  GridBelief(const GridSpec& spec, std::vector<Vec3> cells, std::vector<double> log_weights)
      : spec_(spec), cells_(std::move(cells)), log_weights_(std::move(log_weights)) {}

  GridSpec spec_;
  std::vector<Vec3> cells_;
  std::vector<double> log_weights_;
};

/// Action update: separable Gaussian blur of std `process_sigma` meters with
/// mirror boundaries (the resulting transition matrix is doubly stochastic,
/// so entropy never decreases). sigma = 0 is the identity.
GridBelief grid_predict(const GridBelief& belief, double process_sigma);

/// Measurement update; exact Bayes over the cells. Throws DegenerateBelief when
/// every supported cell sits at the likelihood floor; callers reset to uniform.
GridBelief grid_update(const GridBelief& belief, const Observation& obs, const AgentPose& pose,
                       const LikelihoodModel& model);

/// -sum p log p in nats, 0 log 0 = 0.
double belief_entropy(const GridBelief& belief);

// ---------------------------------------------------------------------------
// Extended Kalman filter

struct GaussianBelief {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();

  void validate() const;
};

/// Static-source prediction: mean kept, covariance += Q.
GaussianBelief ekf_predict(const GaussianBelief& belief, const Mat3& process_covariance);

/// Single EKF measurement update linearized at the prior mean. Uses the
/// selected level rows and, when the observation has a valid ITD, the ITD
/// row. Joseph-form covariance update, then symmetrized and clamped PSD.
GaussianBelief ekf_update(const GaussianBelief& belief, const Observation& obs,
                          const AgentPose& pose, const LikelihoodModel& model);

struct KalmanResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Generic Kalman measurement update given the innovation z - h(x).
KalmanResult kalman_update(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                           const Eigen::VectorXd& innovation, const Eigen::MatrixXd& h,
                           const Eigen::MatrixXd& r);

/// 0.5 log((2 pi e)^k det S) over the `dims` leading axes.
double gaussian_entropy(const GaussianBelief& belief, int dims = 3);

// ---------------------------------------------------------------------------
// Particle filter

struct ParticleBelief {
  std::vector<Vec3> particles;
  std::vector<double> weights;

  /// 1 / sum w^2.
  double ess() const;
  Vec3 mean() const;
  Mat3 covariance() const;

  static ParticleBelief uniform(const Bounds& bounds, std::size_t n, RandomStream& rng);
  void validate() const;
};

struct PfParams {
  double jitter = 0.01;              // m, std of post-resampling noise
  double resample_fraction = 0.5;    // resample when ess < fraction * N
  Bounds bounds;                     // reinitialization region; jitter is clamped to it
};

struct PfStepResult {
  ParticleBelief belief;
  bool resampled = false;
  bool reinitialized = false;
};

/// Low-variance (systematic) resampling; returns the selected indices.
std::vector<std::size_t> systematic_resample(const std::vector<double>& weights,
                                             RandomStream& rng);

/// Weight by the observation likelihood, normalize, resample when the
/// effective sample size drops below the threshold, then jitter. Total weight
/// underflow reinitializes the particles uniformly over params.bounds and
/// sets `reinitialized`.
PfStepResult pf_step(const ParticleBelief& belief, const Observation& obs, const AgentPose& pose,
                     const LikelihoodModel& model, const PfParams& params, RandomStream& rng);

}  // namespace auditionlab
