#include "auditionlab/errors.hpp"
#include "auditionlab/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace auditionlab {

DiscretePOMDP::DiscretePOMDP(std::size_t n_states, std::size_t n_actions,
                             std::size_t n_observations, double gamma)
    : n_states_(n_states),
      n_actions_(n_actions),
      n_observations_(n_observations),
      gamma_(gamma),
      t_(n_states * n_actions * n_states, 0.0),
      z_(n_actions * n_states * n_observations, 0.0),
      r_(n_states * n_actions, 0.0),
      terminal_(n_states, false) {
  if (n_states == 0 || n_actions == 0 || n_observations == 0) {
    throw ValidationError("POMDP needs at least one state, action and observation");
  }
}

void DiscretePOMDP::set_transition(std::size_t s, std::size_t a, std::size_t next, double p) {
  t_.at((s * n_actions_ + a) * n_states_ + next) = p;
  finalized_ = false;
}

void DiscretePOMDP::set_observation(std::size_t a, std::size_t next, std::size_t o, double p) {
  z_.at((a * n_states_ + next) * n_observations_ + o) = p;
  finalized_ = false;
}

void DiscretePOMDP::set_reward(std::size_t s, std::size_t a, double r) {
  r_.at(s * n_actions_ + a) = r;
  finalized_ = false;
}

void DiscretePOMDP::set_terminal(std::size_t s, bool terminal) {
  terminal_.at(s) = terminal;
  finalized_ = false;
}

void DiscretePOMDP::finalize() {
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ValidationError("gamma must be in [0, 1)");
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      double sum = 0.0;
      for (std::size_t next = 0; next < n_states_; ++next) {
        const double p = transition(s, a, next);
        if (!(p >= 0.0)) throw ValidationError("transition probabilities must be >= 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "T[" << s << "][" << a << "] sums to " << sum;
        throw ValidationError(msg.str());
      }
      if (!std::isfinite(reward(s, a))) throw ValidationError("rewards must be finite");
    }
  }
  for (std::size_t a = 0; a < n_actions_; ++a) {
    for (std::size_t next = 0; next < n_states_; ++next) {
      double sum = 0.0;
      for (std::size_t o = 0; o < n_observations_; ++o) {
        const double p = observation(a, next, o);
        if (!(p >= 0.0)) throw ValidationError("observation probabilities must be >= 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "Z[" << a << "][" << next << "] sums to " << sum;
        throw ValidationError(msg.str());
      }
    }
  }
  row_offsets_.assign(n_states_ * n_actions_ + 1, 0);
  successors_.clear();
  for (std::size_t row = 0; row < n_states_ * n_actions_; ++row) {
    row_offsets_[row] = successors_.size();
    for (std::size_t next = 0; next < n_states_; ++next) {
      const double p = t_[row * n_states_ + next];
      if (p > 0.0) successors_.push_back({next, p});
    }
  }
  row_offsets_.back() = successors_.size();
  finalized_ = true;
}

std::span<const Successor> DiscretePOMDP::successors(std::size_t s, std::size_t a) const {
  if (!finalized_) throw ValidationError("POMDP must be finalized before solving");
  const std::size_t row = s * n_actions_ + a;
  return {successors_.data() + row_offsets_[row], row_offsets_[row + 1] - row_offsets_[row]};
}

DiscreteBelief DiscreteBelief::uniform(std::size_t n) {
  return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

DiscreteBelief DiscreteBelief::delta(std::size_t n, std::size_t s) {
  DiscreteBelief b{std::vector<double>(n, 0.0)};
  b.probs.at(s) = 1.0;
  return b;
}

void DiscreteBelief::validate() const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("belief entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("belief must sum to 1");
}

double entropy(const DiscreteBelief& b) {
  double h = 0.0;
  for (double p : b.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double QTable::value(std::size_t s) const {
  double best = at(s, 0);
  for (std::size_t a = 1; a < n_actions; ++a) best = std::max(best, at(s, a));
  return best;
}

QTable bellman_backup(const DiscretePOMDP& pomdp, const QTable& q) {
  const std::size_t n_states = pomdp.n_states();
  const std::size_t n_actions = pomdp.n_actions();
  std::vector<double> v(n_states);
  for (std::size_t s = 0; s < n_states; ++s) v[s] = q.value(s);
  QTable out = q;
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double value = 0.0;
      if (!pomdp.terminal(s)) {
        double expected = 0.0;
        for (const auto& succ : pomdp.successors(s, a)) expected += succ.probability * v[succ.state];
        value = pomdp.reward(s, a) + pomdp.gamma() * expected;
      }
      out.q[s * n_actions + a] = value;
    }
  }
  return out;
}

namespace {

double sup_distance(const QTable& a, const QTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.q.size(); ++i) d = std::max(d, std::abs(a.q[i] - b.q[i]));
  return d;
}

}  // namespace

QTable value_iteration(const DiscretePOMDP& pomdp, double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be > 0");
  if (!pomdp.finalized()) throw ValidationError("value_iteration: POMDP is not finalized");
  QTable q;
  q.n_states = pomdp.n_states();
  q.n_actions = pomdp.n_actions();
  q.q.assign(q.n_states * q.n_actions, 0.0);
  double change = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    QTable next = bellman_backup(pomdp, q);
    change = sup_distance(next, q);
    q = std::move(next);
    q.iterations = iter;
    if (change < tol) {
      q.residual = sup_distance(bellman_backup(pomdp, q), q);
      return q;
    }
  }
  std::ostringstream msg;
  msg << "value iteration did not converge in " << max_iters << " iterations (residual " << change
      << ")";
  throw ConvergenceError(msg.str(), change);
}

std::size_t qmdp_action(const DiscreteBelief& b, const QTable& q) {
  if (b.probs.size() != q.n_states) throw ValidationError("belief size does not match Q table");
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.n_actions; ++a) {
    double value = 0.0;
    for (std::size_t s = 0; s < q.n_states; ++s) {
      if (b.probs[s] > 0.0) value += b.probs[s] * q.at(s, a);
    }
    if (value > best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

namespace {

std::vector<double> predict(const DiscreteBelief& b, std::size_t a, const DiscretePOMDP& pomdp) {
  std::vector<double> predicted(pomdp.n_states(), 0.0);
  for (std::size_t s = 0; s < pomdp.n_states(); ++s) {
    if (b.probs[s] == 0.0) continue;
    for (const auto& succ : pomdp.successors(s, a)) {
      predicted[succ.state] += succ.probability * b.probs[s];
    }
  }
  return predicted;
}

}  // namespace

DiscreteBelief belief_update_discrete(const DiscreteBelief& b, std::size_t a, std::size_t o,
                                      const DiscretePOMDP& pomdp) {
  if (b.probs.size() != pomdp.n_states()) throw ValidationError("belief size mismatch");
  if (a >= pomdp.n_actions() || o >= pomdp.n_observations()) {
    throw ValidationError("action or observation index out of range");
  }
  std::vector<double> posterior = predict(b, a, pomdp);
  double norm = 0.0;
  for (std::size_t next = 0; next < posterior.size(); ++next) {
    posterior[next] *= pomdp.observation(a, next, o);
    norm += posterior[next];
  }
  if (!(norm > 0.0)) {
    throw ImpossibleObservation("observation " + std::to_string(o) + " after action " +
                                std::to_string(a) + " has zero probability under the belief");
  }
  for (double& p : posterior) p /= norm;
  return {std::move(posterior)};
}

namespace {

double expectimax(const DiscretePOMDP& pomdp, const std::vector<double>& b, std::size_t horizon) {
  if (horizon == 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> joint(b.size());
  for (std::size_t a = 0; a < pomdp.n_actions(); ++a) {
    double value = 0.0;
    for (std::size_t s = 0; s < b.size(); ++s) {
      if (b[s] != 0.0 && !pomdp.terminal(s)) value += b[s] * pomdp.reward(s, a);
    }
    if (horizon > 1) {
      const std::vector<double> predicted = predict(DiscreteBelief{b}, a, pomdp);
      for (std::size_t o = 0; o < pomdp.n_observations(); ++o) {
        double p_obs = 0.0;
        for (std::size_t next = 0; next < predicted.size(); ++next) {
          joint[next] = predicted[next] * pomdp.observation(a, next, o);
          p_obs += joint[next];
        }
        if (!(p_obs > 0.0)) continue;
        for (double& j : joint) j /= p_obs;
        value += pomdp.gamma() * p_obs * expectimax(pomdp, joint, horizon - 1);
      }
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace

double finite_horizon_value(const DiscretePOMDP& pomdp, const DiscreteBelief& b,
                            std::size_t horizon) {
  if (!pomdp.finalized()) throw ValidationError("finite_horizon_value: POMDP is not finalized");
  if (b.probs.size() != pomdp.n_states()) throw ValidationError("belief size mismatch");
  b.validate();
  return expectimax(pomdp, b.probs, horizon);
}

double expected_information_gain(const DiscreteBelief& b, std::size_t a,
                                 const DiscretePOMDP& pomdp) {
  const std::vector<double> predicted = predict(b, a, pomdp);
  double expected_posterior_entropy = 0.0;
  std::vector<double> joint(predicted.size());
  for (std::size_t o = 0; o < pomdp.n_observations(); ++o) {
    double p_obs = 0.0;
    for (std::size_t next = 0; next < predicted.size(); ++next) {
      joint[next] = predicted[next] * pomdp.observation(a, next, o);
      p_obs += joint[next];
    }
    if (!(p_obs > 0.0)) continue;
    double h = 0.0;
    for (double j : joint) {
      if (j > 0.0) {
        const double p = j / p_obs;
        h -= p * std::log(p);
      }
    }
    expected_posterior_entropy += p_obs * h;
  }
  return entropy(b) - expected_posterior_entropy;
}

std::size_t info_gain_action(const DiscreteBelief& b, const DiscretePOMDP& pomdp) {
  std::vector<std::size_t> all(pomdp.n_actions());
  for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
  return info_gain_action(b, pomdp, all);
}

std::size_t info_gain_action(const DiscreteBelief& b, const DiscretePOMDP& pomdp,
                             std::span<const std::size_t> allowed) {
  if (allowed.empty()) throw ValidationError("info_gain_action: no candidate actions");
  std::size_t best = allowed.front();
  double best_gain = -std::numeric_limits<double>::infinity();
  for (std::size_t a : allowed) {
    const double gain = expected_information_gain(b, a, pomdp);
    if (gain > best_gain + kGainTieTolerance) {
      best_gain = gain;
      best = a;
    }
  }
  return best;
}

}  // namespace auditionlab
