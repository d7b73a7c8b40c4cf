#include "auditionlab/errors.hpp"
#include "auditionlab/filters.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace auditionlab {

namespace {

Mat3 clamp_psd(const Mat3& m) {
  const Mat3 sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(sym);
  Vec3 values = solver.eigenvalues();
  if (values.minCoeff() >= 0.0) return sym;
  values = values.cwiseMax(0.0);
  const Mat3 out = solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

void GaussianBelief::validate() const {
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw ValidationError("gaussian belief has non-finite entries");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("gaussian covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(covariance);
  if (solver.eigenvalues().minCoeff() < -1e-12) {
    throw ValidationError("gaussian covariance is not positive semi-definite");
  }
}

GaussianBelief ekf_predict(const GaussianBelief& belief, const Mat3& process_covariance) {
  if (!process_covariance.allFinite() ||
      (process_covariance - process_covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ValidationError("process covariance Q must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(process_covariance);
  if (solver.eigenvalues().minCoeff() < -1e-12) {
    throw ValidationError("process covariance Q must be positive semi-definite");
  }
  GaussianBelief out = belief;
  out.covariance += process_covariance;
  return out;
}

KalmanResult kalman_update(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                           const Eigen::VectorXd& innovation, const Eigen::MatrixXd& h,
                           const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd s = h * covariance * h.transpose() + r;
  // Rows mix seconds and decibels; judge singularity on the unit-diagonal form.
  const Eigen::VectorXd diag = s.diagonal();
  bool singular = !s.allFinite() || (diag.array() <= 0.0).any();
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  if (!singular) {
    const Eigen::VectorXd inv_sqrt = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd unit = inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> unit_ldlt(unit);
    singular = unit_ldlt.info() != Eigen::Success || !unit_ldlt.isPositive() ||
               unit_ldlt.vectorD().minCoeff() <= 1e-12;
    ldlt.compute(s);
  }
  if (singular) {
    std::ostringstream msg;
    msg << "singular innovation covariance S (diag:";
    for (Eigen::Index i = 0; i < s.rows(); ++i) msg << ' ' << s(i, i);
    msg << ")";
    throw NumericalError(msg.str());
  }
  // K = P H^T S^-1
  const Eigen::MatrixXd gain = ldlt.solve(h * covariance).transpose();
  const Eigen::Index n = mean.size();
  const Eigen::MatrixXd i_kh = Eigen::MatrixXd::Identity(n, n) - gain * h;
  KalmanResult out;
  out.mean = mean + gain * innovation;
  out.covariance = i_kh * covariance * i_kh.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

GaussianBelief ekf_update(const GaussianBelief& belief, const Observation& obs,
                          const AgentPose& pose, const LikelihoodModel& model) {
  model.validate();
  const SensorModel& sensor = model.sensor;
  const Mat3 jacobian = measurement_jacobian(belief.mean, pose, sensor);
  const PredictedObservation predicted =
      predict_observation(belief.mean, model.source_level_db, pose, sensor);
  const MicPair mics = mic_positions(pose, sensor.d);

  // Chain rule through the noise-floor power sum: dL_obs/dL = share of signal power.
  const auto signal_share = [&](const Vec3& mic) {
    const double level = level_at_range(model.source_level_db, (belief.mean - mic).norm(), sensor);
    return 1.0 / (1.0 + std::pow(10.0, (sensor.noise_floor_db - level) / 10.0));
  };

  const bool use_itd = model.use.itd && obs.itd_valid && obs.itd.has_value();
  const int rows = (use_itd ? 1 : 0) + (model.use.left ? 1 : 0) + (model.use.right ? 1 : 0);
  if (rows == 0) throw ValidationError("ekf_update: observation has no usable component");

  Eigen::MatrixXd h(rows, 3);
  Eigen::VectorXd innovation(rows);
  Eigen::VectorXd noise(rows);
  int row = 0;
  if (use_itd) {
    h.row(row) = jacobian.row(0);
    innovation[row] = *obs.itd - predicted.itd;
    noise[row] = sensor.sigma_itd_s * sensor.sigma_itd_s;
    ++row;
  }
  if (model.use.left) {
    h.row(row) = signal_share(mics.left) * jacobian.row(1);
    innovation[row] = obs.level_left - predicted.level_left;
    noise[row] = sensor.sigma_level_db * sensor.sigma_level_db;
    ++row;
  }
  if (model.use.right) {
    h.row(row) = signal_share(mics.right) * jacobian.row(2);
    innovation[row] = obs.level_right - predicted.level_right;
    noise[row] = sensor.sigma_level_db * sensor.sigma_level_db;
    ++row;
  }

  const KalmanResult result =
      kalman_update(belief.mean, belief.covariance, innovation, h, noise.asDiagonal().toDenseMatrix());
  GaussianBelief out;
  out.mean = result.mean;
  out.covariance = clamp_psd(result.covariance);
  return out;
}

double gaussian_entropy(const GaussianBelief& belief, int dims) {
  const Eigen::MatrixXd block = belief.covariance.topLeftCorner(dims, dims);
  const double det = block.determinant();
  constexpr double kTwoPiE = 17.079468445347134131;
  return 0.5 * (dims * std::log(kTwoPiE) + std::log(det));
}

}  // namespace auditionlab
