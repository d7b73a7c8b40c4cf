#include "auditionlab/acoustics.hpp"
#include "auditionlab/errors.hpp"
#include "auditionlab/filters.hpp"

#include <cmath>
#include <numeric>

#include "doctest.h"

using namespace auditionlab;

namespace {

GridSpec line_spec(int n, double res = 1.0) {
  GridSpec spec;
  spec.resolution = res;
  spec.nx = n;
  return spec;
}

std::vector<double> random_probs(std::size_t n, RandomStream& rng) {
  std::vector<double> p(n);
  for (auto& x : p) x = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
  p[rng.index(n)] += 0.1;
  return p;
}

double entropy_of(const std::vector<double>& p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  double h = 0.0;
  for (double x : p) {
    if (x > 0) h -= x / total * std::log(x / total);
  }
  return h;
}

double normal_logpdf(double x, double mean, double sigma) {
  return -0.5 * std::pow((x - mean) / sigma, 2) - std::log(sigma * std::sqrt(2 * kPi));
}

LikelihoodModel level_model(double sigma = 1.0) {
  LikelihoodModel m;
  m.sensor.sigma_level_db = sigma;
  m.sensor.sigma_itd_s = 1e-5;
  m.source_level_db = 70.0;
  return m;
}

}  // namespace

TEST_CASE("grid predict with sigma 0 is the identity") {
  RandomStream rng(40);
  const GridBelief b = GridBelief::from_probabilities(line_spec(7), random_probs(7, rng));
  const GridBelief out = grid_predict(b, 0.0);
  CHECK(out.log_weights() == b.log_weights());
}

TEST_CASE("grid predict blurs a delta into the discrete Gaussian profile") {
  std::vector<double> delta(5, 0.0);
  delta[2] = 1.0;
  const GridBelief b = GridBelief::from_probabilities(line_spec(5), delta);
  const std::vector<double> p = grid_predict(b, 1.0).probabilities();
  // Kernel exp(-k^2/2) for |k| <= 4, mirrored at the line ends:
  // offsets -3,-4 fold onto cells 0,1 and +4,+3 onto cells 3,4.
  auto w = [](int k) { return std::exp(-0.5 * k * k); };
  double z = 0.0;
  for (int k = -4; k <= 4; ++k) z += w(k);
  const double expected[5] = {(w(2) + w(3)) / z, (w(1) + w(4)) / z, w(0) / z, (w(1) + w(4)) / z,
                              (w(2) + w(3)) / z};
  for (int i = 0; i < 5; ++i) CHECK(std::abs(p[i] - expected[i]) < 1e-12);
  CHECK(std::abs(p[2] - 0.3989422804) < 1e-3);
}

TEST_CASE("grid predict never decreases entropy") {
  RandomStream rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    GridSpec spec;
    spec.resolution = 0.5;
    spec.nx = 2 + static_cast<int>(rng.index(10));
    spec.ny = 1 + static_cast<int>(rng.index(8));
    spec.nz = 1 + static_cast<int>(rng.index(3));
    const GridBelief b = GridBelief::from_probabilities(spec, random_probs(spec.size(), rng));
    const double sigma = rng.uniform(0.05, 2.0);
    const GridBelief after = grid_predict(b, sigma);
    CHECK(belief_entropy(after) >= belief_entropy(b) - 1e-12);
    double total = 0.0;
    for (double p : after.probabilities()) total += p;
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("grid update under a uniform prior returns the normalized likelihood") {
  GridSpec spec = line_spec(2, 2.0);
  spec.origin = Vec3(1.0, 0, 0);
  const LikelihoodModel model = level_model(1.0);
  AgentPose pose;
  Observation obs;
  obs.level_left = 67.0;
  obs.level_right = 66.0;
  const GridBelief post = grid_update(GridBelief::uniform(spec), obs, pose, model);
  // Oracle: evaluate the Gaussian level likelihood of each cell directly.
  double lik[2];
  for (int i = 0; i < 2; ++i) {
    const Vec3 s = spec.center(static_cast<std::size_t>(i));
    const double rl = (s - Vec3(0, -0.1, 0)).norm();
    const double rr = (s - Vec3(0, 0.1, 0)).norm();
    auto level = [&](double r) {
      const double sig = 70.0 - 20 * std::log10(r);
      return 10 * std::log10(std::pow(10, sig / 10) + std::pow(10, 3.0));
    };
    lik[i] = std::exp(normal_logpdf(67.0, level(rl), 1.0) + normal_logpdf(66.0, level(rr), 1.0));
  }
  const auto p = post.probabilities();
  CHECK(std::abs(p[0] - lik[0] / (lik[0] + lik[1])) < 1e-9);
  CHECK(std::abs(p[1] - lik[1] / (lik[0] + lik[1])) < 1e-9);
}

TEST_CASE("grid update with an uninformative observation keeps the prior") {
  // ITD-only model and no valid ITD: nothing is conditioned on.
  GridBelief b = GridBelief::uniform(line_spec(4));
  auto& lw = b.mutable_log_weights();
  const double w[4] = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) lw[i] = std::log(w[i]);
  LikelihoodModel model = level_model();
  model.use = {false, false, true};
  Observation obs;  // itd invalid, so no channel contributes
  const GridBelief post = grid_update(b, obs, AgentPose{}, model);
  const auto p = post.probabilities();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(p[i] - w[i]) < 1e-12);
}

TEST_CASE("ten-cell line: three noiseless level observations find cell 7") {
  GridSpec spec = line_spec(10);
  spec.origin = Vec3(0, 3, 0);
  const Vec3 source = spec.center(7);
  SensorModel sensor;
  sensor.sigma_level_db = 0.0;
  sensor.sigma_itd_s = 0.0;
  LikelihoodModel model = level_model(1.0);
  model.use = {true, true, false};
  const std::vector<Vec3> stops = {Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(9, 0, 0)};
  GridBelief b = GridBelief::uniform(spec);
  std::vector<double> brute(10, 0.0);
  for (const Vec3& stop : stops) {
    AgentPose pose;
    pose.position = stop;
    WorldState s;
    s.agent = pose;
    SoundSource src;
    src.position = source;
    src.level_ref = 70.0;
    s.sources = {src};
    RandomStream rng(43);
    const Observation obs = observe(s, sensor, rng);
    b = grid_update(b, obs, pose, model);
    // Hand enumeration: sum of squared level residuals per cell.
    for (int i = 0; i < 10; ++i) {
      const auto pred = predict_observation(spec.center(static_cast<std::size_t>(i)), 70.0, pose,
                                            sensor);
      brute[i] += std::pow(obs.level_left - pred.level_left, 2) +
                  std::pow(obs.level_right - pred.level_right, 2);
    }
  }
  CHECK(b.mode_index() == 7);
  CHECK(std::min_element(brute.begin(), brute.end()) - brute.begin() == 7);
}

TEST_CASE("grid update rejects an observation no supported cell can explain") {
  const LikelihoodModel model = level_model(0.01);
  Observation obs;
  obs.level_left = 500.0;
  obs.level_right = 500.0;
  CHECK_THROWS_AS(grid_update(GridBelief::uniform(line_spec(3)), obs, AgentPose{}, model),
                  DegenerateBelief);
}

TEST_CASE("normalize keeps weights summing to one") {
  RandomStream rng(44);
  GridBelief b = GridBelief::uniform(line_spec(50));
  for (auto& w : b.mutable_log_weights()) w = rng.uniform(-800, 800);
  b.mutable_log_weights()[3] = -std::numeric_limits<double>::infinity();
  b.normalize();
  double total = 0.0;
  for (double w : b.log_weights()) {
    CHECK_FALSE(std::isnan(w));
    total += std::exp(w);
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  for (auto& w : b.mutable_log_weights()) w = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(b.normalize(), DegenerateBelief);
}

TEST_CASE("belief entropy examples") {
  CHECK(std::abs(belief_entropy(GridBelief::uniform(line_spec(17))) - std::log(17.0)) < 1e-12);
  std::vector<double> delta(6, 0.0);
  delta[4] = 1.0;
  CHECK(belief_entropy(GridBelief::from_probabilities(line_spec(6), delta)) == 0.0);
  const double h =
      belief_entropy(GridBelief::from_probabilities(line_spec(3), {0.5, 0.25, 0.25}));
  CHECK(std::abs(h - 1.0397) < 1e-4);
  CHECK(std::abs(h - 1.5 * std::log(2.0)) < 1e-12);
  RandomStream rng(45);
  const auto p = random_probs(30, rng);
  CHECK(std::abs(belief_entropy(GridBelief::from_probabilities(line_spec(30), p)) -
                 entropy_of(p)) < 1e-12);
}

TEST_CASE("covering tiles the bounds") {
  const GridSpec spec = GridSpec::covering(Bounds{Vec3(0, 0, 0), Vec3(7.5, 7.5, 0)}, 0.25);
  CHECK(spec.nx == 30);
  CHECK(spec.ny == 30);
  CHECK(spec.nz == 1);
  CHECK((spec.center(0) - Vec3(0.125, 0.125, 0)).norm() < 1e-15);
  CHECK(spec.cell_of(Vec3(7.4, 0.2, 0)) == spec.index(29, 0, 0));
}

TEST_CASE("ekf predict adds the process covariance") {
  GaussianBelief b;
  b.mean = Vec3(1, 2, 3);
  b.covariance = Mat3::Identity() * 0.5;
  const GaussianBelief same = ekf_predict(b, Mat3::Zero());
  CHECK(same.mean == b.mean);
  CHECK(same.covariance == b.covariance);
  const double s2 = 0.04;
  GaussianBelief g = b;
  for (int k = 1; k <= 10; ++k) {
    g = ekf_predict(g, s2 * Mat3::Identity());
    CHECK(std::abs(g.covariance.trace() - (b.covariance.trace() + 3 * s2 * k)) < 1e-12);
  }
  CHECK(g.mean == b.mean);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = -1;
  CHECK_THROWS_AS(ekf_predict(b, bad), ValidationError);
}

TEST_CASE("scalar Kalman update matches the closed form") {
  RandomStream rng(46);
  for (int i = 0; i < 100; ++i) {
    const double s2 = rng.uniform(0.01, 10.0);
    const double m2 = rng.uniform(0.01, 10.0);
    const double x = rng.uniform(-5, 5);
    const double v = rng.uniform(-5, 5);
    const KalmanResult r =
        kalman_update(Eigen::VectorXd::Constant(1, x), Eigen::MatrixXd::Constant(1, 1, s2),
                      Eigen::VectorXd::Constant(1, v), Eigen::MatrixXd::Constant(1, 1, 1.0),
                      Eigen::MatrixXd::Constant(1, 1, m2));
    CHECK(std::abs(r.covariance(0, 0) - s2 * m2 / (s2 + m2)) < 1e-12);
    CHECK(std::abs(r.mean[0] - (x + s2 / (s2 + m2) * v)) < 1e-12);
  }
}

TEST_CASE("ekf level update shrinks variance along the gradient as a scalar filter") {
  LikelihoodModel model = level_model(1.5);
  model.use = {true, false, false};
  model.sensor.noise_floor_db = -200.0;  // signal share is 1
  AgentPose pose;
  GaussianBelief b;
  b.mean = Vec3(2.0, 0.5, 0.0);
  const double s2 = 0.3;
  b.covariance = s2 * Mat3::Identity();
  const auto pred = predict_observation(b.mean, 70.0, pose, model.sensor);
  Observation obs;
  obs.level_left = pred.level_left;  // zero innovation
  obs.level_right = pred.level_right;
  const GaussianBelief post = ekf_update(b, obs, pose, model);
  CHECK((post.mean - b.mean).norm() < 1e-12);
  CHECK(post.covariance.trace() < b.covariance.trace());
  const Vec3 g = measurement_jacobian(b.mean, pose, model.sensor).row(1).transpose();
  const Vec3 u = g.normalized();
  const double m2 = std::pow(1.5 / g.norm(), 2);
  CHECK(std::abs(u.dot(post.covariance * u) - s2 * m2 / (s2 + m2)) < 1e-12);
  const Vec3 t = u.unitOrthogonal();
  CHECK(std::abs(t.dot(post.covariance * t) - s2) < 1e-12);
}

TEST_CASE("ekf update keeps a symmetric PSD covariance") {
  RandomStream rng(47);
  LikelihoodModel model = level_model(1.0);
  SensorModel sensor = model.sensor;
  for (int i = 0; i < 200; ++i) {
    GaussianBelief b;
    b.mean = Vec3(rng.uniform(1, 4), rng.uniform(-3, 3), rng.uniform(-1, 1));
    b.covariance = rng.uniform(0.1, 4.0) * Mat3::Identity();
    WorldState s;
    SoundSource src;
    src.position = Vec3(rng.uniform(1, 4), rng.uniform(-3, 3), rng.uniform(-1, 1));
    src.level_ref = 70.0;
    s.sources = {src};
    const Observation obs = observe(s, sensor, rng);
    const GaussianBelief post = ekf_update(b, obs, AgentPose{}, model);
    CHECK_NOTHROW(post.validate());
  }
}

TEST_CASE("kalman update rejects a singular innovation covariance") {
  Eigen::MatrixXd h(2, 3);
  h << 1, 0, 0, 1, 0, 0;
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(kalman_update(Eigen::VectorXd::Zero(3), p, Eigen::VectorXd::Zero(2), h, r),
                  NumericalError);
  CHECK_THROWS_AS(kalman_update(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 3),
                                Eigen::VectorXd::Zero(2), h, r),
                  NumericalError);
}

TEST_CASE("pf with a constant likelihood leaves weights alone") {
  RandomStream rng(48);
  const Bounds bounds{Vec3(-1, -1, 0), Vec3(1, 1, 0)};
  ParticleBelief b = ParticleBelief::uniform(bounds, 500, rng);
  LikelihoodModel model = level_model();
  model.use = {false, false, true};
  Observation obs;  // no valid itd: likelihood identical for all particles
  PfParams params;
  params.bounds = bounds;
  const PfStepResult r = pf_step(b, obs, AgentPose{}, model, params, rng);
  CHECK_FALSE(r.resampled);
  CHECK_FALSE(r.reinitialized);
  CHECK(std::abs(r.belief.ess() - b.ess()) < 1e-9);
  for (std::size_t i = 0; i < b.weights.size(); ++i) {
    CHECK(std::abs(r.belief.weights[i] - b.weights[i]) < 1e-15);
  }
}

TEST_CASE("pf keeps N and normalized weights, and reinitializes on underflow") {
  RandomStream rng(49);
  const Bounds bounds{Vec3(0, 0, 0), Vec3(5, 5, 0)};
  ParticleBelief b = ParticleBelief::uniform(bounds, 1000, rng);
  LikelihoodModel model = level_model();
  PfParams params;
  params.bounds = bounds;
  WorldState s;
  SoundSource src;
  src.position = Vec3(3, 2, 0);
  src.level_ref = 70.0;
  s.sources = {src};
  s.agent.position = Vec3(1, 1, 0);
  for (int t = 0; t < 5; ++t) {
    const Observation obs = observe(s, model.sensor, rng);
    const PfStepResult r = pf_step(b, obs, s.agent, model, params, rng);
    b = r.belief;
    CHECK(b.particles.size() == 1000);
    CHECK_NOTHROW(b.validate());
  }
  Observation impossible;
  impossible.level_left = 1e6;
  impossible.level_right = 1e6;
  const PfStepResult r = pf_step(b, impossible, s.agent, model, params, rng);
  CHECK(r.reinitialized);
  CHECK(r.belief.particles.size() == 1000);
}

TEST_CASE("systematic resampling preserves the weighted mean in expectation") {
  RandomStream rng(50);
  const std::size_t n = 200;
  std::vector<double> x(n);
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    w[i] = rng.uniform() * rng.uniform();
    total += w[i];
  }
  double target = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] /= total;
    target += w[i] * x[i];
  }
  const int runs = 1000;
  std::vector<double> means(runs);
  for (int r = 0; r < runs; ++r) {
    double m = 0.0;
    for (std::size_t idx : systematic_resample(w, rng)) m += x[idx];
    means[r] = m / n;
  }
  const double avg = std::accumulate(means.begin(), means.end(), 0.0) / runs;
  double var = 0.0;
  for (double m : means) var += (m - avg) * (m - avg);
  var /= runs - 1;
  const double se = std::sqrt(var / runs);
  CHECK(std::abs(avg - target) < 3 * se + 1e-15);
}

TEST_CASE("particle mean tracks the grid oracle on a small planar problem") {
  RandomStream rng(51);
  const Bounds bounds{Vec3(0, 0, 0), Vec3(5, 5, 0)};
  LikelihoodModel model = level_model(1.0);
  model.sensor.sigma_itd_s = 2e-5;
  GridBelief grid = GridBelief::uniform(GridSpec::covering(bounds, 0.25));
  ParticleBelief pf = ParticleBelief::uniform(bounds, 10000, rng);
  PfParams params;
  params.bounds = bounds;
  WorldState s;
  SoundSource src;
  src.position = Vec3(3.3, 1.6, 0);
  src.level_ref = 70.0;
  s.sources = {src};
  for (int t = 0; t < 10; ++t) {
    const double a = 2 * kPi * (t + 1) / 10;
    s.agent.position = Vec3(2.5 + 8 * std::cos(a), 2.5 + 8 * std::sin(a), 0);
    const Observation obs = observe(s, model.sensor, rng);
    grid = grid_update(grid, obs, s.agent, model);
    pf = pf_step(pf, obs, s.agent, model, params, rng).belief;
  }
  CHECK((pf.mean() - grid.mean()).norm() < 2 * 0.25);
}

TEST_CASE("gaussian entropy of an isotropic covariance") {
  GaussianBelief b;
  b.covariance = 2.0 * Mat3::Identity();
  const double expected3 = 1.5 * std::log(2 * kPi * std::exp(1.0) * 2.0);
  CHECK(std::abs(gaussian_entropy(b) - expected3) < 1e-12);
  CHECK(std::abs(gaussian_entropy(b, 2) - expected3 * 2 / 3) < 1e-12);
}
