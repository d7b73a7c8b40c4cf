#include "auditionlab/errors.hpp"
#include "auditionlab/planning.hpp"

#include <algorithm>
#include <cmath>

namespace auditionlab {

Policy make_qmdp_policy(QTable q) {
  return [q = std::move(q)](const PolicyContext& ctx) { return qmdp_action(ctx.belief, q); };
}

Policy make_info_gain_policy(const DiscretePOMDP& pomdp) {
  return [&pomdp](const PolicyContext& ctx) { return info_gain_action(ctx.belief, pomdp); };
}

Policy make_hybrid_policy(const DiscretePOMDP& pomdp, QTable q,
                          std::vector<std::size_t> commit_actions) {
  std::vector<std::size_t> explore;
  for (std::size_t a = 0; a < pomdp.n_actions(); ++a) {
    if (std::find(commit_actions.begin(), commit_actions.end(), a) == commit_actions.end()) {
      explore.push_back(a);
    }
  }
  if (explore.empty()) throw ValidationError("hybrid policy needs at least one non-commit action");
  return [&pomdp, q = std::move(q), commit = std::move(commit_actions),
          explore = std::move(explore)](const PolicyContext& ctx) {
    const std::size_t recommended = qmdp_action(ctx.belief, q);
    if (std::find(commit.begin(), commit.end(), recommended) != commit.end()) return recommended;
    return info_gain_action(ctx.belief, pomdp, explore);
  };
}

Policy make_random_policy(std::size_t n_actions) {
  return [n_actions](const PolicyContext& ctx) {
    return static_cast<std::size_t>(ctx.rng.index(n_actions));
  };
}

Policy make_memoryless_policy(
    std::function<std::size_t(std::optional<ActionObservation>, RandomStream&)> reactive) {
  return [reactive = std::move(reactive)](const PolicyContext& ctx) {
    std::optional<ActionObservation> last;
    if (!ctx.history.empty()) last = ctx.history.back();
    return reactive(last, ctx.rng);
  };
}

namespace {

std::size_t sample_index(const std::vector<double>& probs, RandomStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace

EpisodeLog simulate_episode(const DiscretePOMDP& pomdp, const Policy& policy,
                            const DiscreteBelief& initial, std::size_t s0, std::size_t horizon,
                            RandomStream& rng) {
  if (horizon < 1) throw ValidationError("simulate_episode: horizon must be >= 1");
  if (s0 >= pomdp.n_states()) throw ValidationError("simulate_episode: s0 out of range");
  initial.validate();

  EpisodeLog log;
  DiscreteBelief belief = initial;
  std::vector<ActionObservation> history;
  std::size_t state = s0;
  log.states.push_back(state);
  double discount = 1.0;
  std::vector<double> next_probs(pomdp.n_states());
  std::vector<double> obs_probs(pomdp.n_observations());

  for (std::size_t t = 0; t < horizon; ++t) {
    const PolicyContext ctx{belief, history, static_cast<std::int64_t>(t), rng};
    const std::size_t action = policy(ctx);
    if (action >= pomdp.n_actions()) {
      throw ProtocolError("policy returned action " + std::to_string(action) + " but only " +
                          std::to_string(pomdp.n_actions()) + " exist");
    }
    const double reward = pomdp.reward(state, action);

    std::fill(next_probs.begin(), next_probs.end(), 0.0);
    for (const auto& succ : pomdp.successors(state, action)) next_probs[succ.state] = succ.probability;
    const std::size_t next = sample_index(next_probs, rng);
    for (std::size_t o = 0; o < obs_probs.size(); ++o) obs_probs[o] = pomdp.observation(action, next, o);
    const std::size_t obs = sample_index(obs_probs, rng);

    log.actions.push_back(action);
    log.rewards.push_back(reward);
    log.observations.push_back(obs);
    log.states.push_back(next);
    log.discounted_return += discount * reward;
    discount *= pomdp.gamma();

    belief = belief_update_discrete(belief, action, obs, pomdp);
    log.belief_entropy.push_back(entropy(belief));
    history.push_back({action, obs});
    state = next;
    if (pomdp.terminal(state)) {
      log.terminated = true;
      break;
    }
  }
  return log;
}

EpisodeLog simulate_episode(const DiscretePOMDP& pomdp, const Policy& policy,
                            const DiscreteBelief& initial, std::size_t horizon,
                            RandomStream& rng) {
  initial.validate();
  const std::size_t s0 = sample_index(initial.probs, rng);
  return simulate_episode(pomdp, policy, initial, s0, horizon, rng);
}

DiscretePOMDP make_tiger(const TigerParams& params) {
  if (!(params.accuracy >= 0.0 && params.accuracy <= 1.0)) {
    throw ValidationError("tiger listen accuracy must be in [0, 1]");
  }
  DiscretePOMDP pomdp(2, 3, 2, params.gamma);
  for (std::size_t s = 0; s < 2; ++s) {
    pomdp.set_transition(s, tiger::kListen, s, 1.0);
    for (std::size_t next = 0; next < 2; ++next) {
      pomdp.set_transition(s, tiger::kOpenLeft, next, 0.5);
      pomdp.set_transition(s, tiger::kOpenRight, next, 0.5);
    }
    pomdp.set_reward(s, tiger::kListen, params.listen_cost);
  }
  // State 0: tiger behind the left door.
  pomdp.set_reward(0, tiger::kOpenLeft, params.wrong);
  pomdp.set_reward(0, tiger::kOpenRight, params.correct);
  pomdp.set_reward(1, tiger::kOpenLeft, params.correct);
  pomdp.set_reward(1, tiger::kOpenRight, params.wrong);
  for (std::size_t next = 0; next < 2; ++next) {
    pomdp.set_observation(tiger::kListen, next, next, params.accuracy);
    pomdp.set_observation(tiger::kListen, next, 1 - next, 1.0 - params.accuracy);
    for (std::size_t o = 0; o < 2; ++o) {
      pomdp.set_observation(tiger::kOpenLeft, next, o, 0.5);
      pomdp.set_observation(tiger::kOpenRight, next, o, 0.5);
    }
  }
  pomdp.finalize();
  return pomdp;
}

double assess_action_effect(double prior_effect, double observed_level, double effect_level,
                            double no_effect_level, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("assess_action_effect: sigma must be > 0");
  if (!(prior_effect >= 0.0 && prior_effect <= 1.0)) {
    throw ValidationError("assess_action_effect: prior must be in [0, 1]");
  }
  if (prior_effect == 0.0 || prior_effect == 1.0) return prior_effect;
  const double z1 = (observed_level - effect_level) / sigma;
  const double z0 = (observed_level - no_effect_level) / sigma;
  // log(l0 / l1); equal sigmas cancel the normalizers.
  const double log_ratio = -0.5 * z0 * z0 + 0.5 * z1 * z1;
  if (log_ratio == 0.0) return prior_effect;
  const double odds_against = (1.0 - prior_effect) / prior_effect * std::exp(log_ratio);
  return 1.0 / (1.0 + odds_against);
}

double assess_action_effect(double prior_effect, const Observation& obs, double effect_level,
                            double no_effect_level, double sigma) {
  return assess_action_effect(prior_effect, obs.max_level(), effect_level, no_effect_level, sigma);
}

}  // namespace auditionlab
