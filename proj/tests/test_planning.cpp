#include "auditionlab/errors.hpp"
#include "auditionlab/filters.hpp"
#include "auditionlab/planning.hpp"
#include "auditionlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "doctest.h"

using namespace auditionlab;

namespace {

DiscretePOMDP single_state(double reward, double gamma) {
  DiscretePOMDP p(1, 1, 1, gamma);
  p.set_transition(0, 0, 0, 1.0);
  p.set_observation(0, 0, 0, 1.0);
  p.set_reward(0, 0, reward);
  p.finalize();
  return p;
}

// Two states, one action per state moving 0 -> 1, with 1 absorbing; R = (0, 1).
DiscretePOMDP chain(double gamma) {
  DiscretePOMDP p(2, 1, 1, gamma);
  p.set_transition(0, 0, 1, 1.0);
  p.set_transition(1, 0, 1, 1.0);
  p.set_reward(1, 0, 1.0);
  for (std::size_t s = 0; s < 2; ++s) p.set_observation(0, s, 0, 1.0);
  p.finalize();
  return p;
}

// n states, identity dynamics, observation o reveals the state with the
// given accuracy (or is uninformative when accuracy = 1/n_obs).
DiscretePOMDP identity_sensor(double accuracy) {
  DiscretePOMDP p(2, 2, 2, 0.9);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      p.set_transition(s, a, s, 1.0);
      p.set_observation(a, s, s, accuracy);
      p.set_observation(a, s, 1 - s, 1.0 - accuracy);
    }
  }
  p.finalize();
  return p;
}

double h(const std::vector<double>& p) {
  double out = 0.0;
  for (double x : p) {
    if (x > 0) out -= x * std::log(x);
  }
  return out;
}

// Independent expectimax written against the raw tensors.
double oracle_value(const DiscretePOMDP& m, const std::vector<double>& b, std::size_t depth) {
  if (depth == 0) return 0.0;
  double best = -1e300;
  for (std::size_t a = 0; a < m.n_actions(); ++a) {
    double value = 0.0;
    std::vector<double> next(m.n_states(), 0.0);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
      if (b[s] == 0.0 || m.terminal(s)) continue;
      value += b[s] * m.reward(s, a);
      for (std::size_t t = 0; t < m.n_states(); ++t) next[t] += b[s] * m.transition(s, a, t);
    }
    for (std::size_t s = 0; s < m.n_states(); ++s) {
      if (m.terminal(s)) next[s] = 0.0;
    }
    for (std::size_t o = 0; o < m.n_observations(); ++o) {
      std::vector<double> post(m.n_states(), 0.0);
      double po = 0.0;
      for (std::size_t t = 0; t < m.n_states(); ++t) {
        post[t] = next[t] * m.observation(a, t, o);
        po += post[t];
      }
      if (po <= 0.0) continue;
      for (double& x : post) x /= po;
      value += m.gamma() * po * oracle_value(m, post, depth - 1);
    }
    best = std::max(best, value);
  }
  return best;
}

PhoneProblemConfig small_phone(double sigma) {
  PhoneProblemConfig c;
  c.grid_size = 2;
  c.sensor.sigma_level_db = sigma;
  c.sensor.noise_floor_db = 30.0;
  c.source_level_db = 60.0;
  c.bins = 4;
  return c;
}

}  // namespace

TEST_CASE("value iteration examples") {
  const QTable one = value_iteration(single_state(1.0, 0.9), 1e-10, 10000);
  CHECK(std::abs(one.value(0) - 10.0) < 1e-8);

  DiscretePOMDP myopic(3, 2, 1, 0.0);
  RandomStream rng(60);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      myopic.set_transition(s, a, (s + a) % 3, 1.0);
      myopic.set_reward(s, a, rng.uniform(-5, 5));
      myopic.set_observation(a, s, 0, 1.0);
    }
  }
  myopic.finalize();
  const QTable q0 = value_iteration(myopic, 1e-12, 100);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) CHECK(q0.at(s, a) == myopic.reward(s, a));
  }

  const QTable c = value_iteration(chain(0.5), 1e-12, 1000);
  CHECK(std::abs(c.value(1) - 2.0) < 1e-10);
  CHECK(std::abs(c.value(0) - 1.0) < 1e-10);
}

TEST_CASE("value iteration residual is confirmed by one more backup") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const QTable q = value_iteration(tiger, 1e-9, 100000);
  CHECK(q.residual < 1e-9);
  const QTable next = bellman_backup(tiger, q);
  double sup = 0.0;
  for (std::size_t i = 0; i < q.q.size(); ++i) sup = std::max(sup, std::abs(next.q[i] - q.q[i]));
  CHECK(sup < 1e-9);
  CHECK(std::abs(sup - q.residual) < 1e-15);
}

TEST_CASE("value iteration reports non-convergence with the residual") {
  const DiscretePOMDP slow = single_state(1.0, 0.999);
  try {
    value_iteration(slow, 1e-12, 5);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-12);
  }
}

TEST_CASE("qmdp action rules") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const QTable q = value_iteration(tiger, 1e-10, 100000);
  const DiscreteBelief uniform = DiscreteBelief::uniform(2);
  // Belief-weighted door values are (10 - 100) / 2 = -45 plus the discounted reset value.
  const double door = 0.5 * (q.at(0, tiger::kOpenLeft) + q.at(1, tiger::kOpenLeft));
  const double listen = 0.5 * (q.at(0, tiger::kListen) + q.at(1, tiger::kListen));
  CHECK(door < listen);
  CHECK(std::abs((door - 0.95 * 0.5 * (q.value(0) + q.value(1))) - (-45.0)) < 1e-8);
  CHECK(qmdp_action(uniform, q) == tiger::kListen);
  CHECK(qmdp_action(DiscreteBelief::delta(2, 0), q) == tiger::kOpenRight);
  CHECK(qmdp_action(DiscreteBelief::delta(2, 1), q) == tiger::kOpenLeft);

  QTable tie;
  tie.n_states = 2;
  tie.n_actions = 2;
  tie.q = {1.0, 1.0, 3.0, 3.0};
  CHECK(qmdp_action(uniform, tie) == 0);
}

TEST_CASE("discrete belief update examples") {
  const DiscreteBelief u = DiscreteBelief::uniform(2);
  const DiscreteBelief same = belief_update_discrete(u, 0, 1, identity_sensor(0.5));
  CHECK(std::abs(same.probs[0] - 0.5) < 1e-15);
  const DiscretePOMDP m = identity_sensor(0.85);
  const DiscreteBelief once = belief_update_discrete(u, 0, 0, m);
  CHECK(std::abs(once.probs[0] - 0.85) < 1e-12);
  CHECK(std::abs(once.probs[1] - 0.15) < 1e-12);
  const DiscreteBelief twice = belief_update_discrete(once, 1, 0, m);
  CHECK(std::abs(twice.probs[0] - 0.85 * 0.85 / (0.85 * 0.85 + 0.15 * 0.15)) < 1e-12);
  CHECK(std::abs(twice.probs[0] - 0.9698) < 1e-4);
  CHECK_THROWS_AS(belief_update_discrete(DiscreteBelief::delta(2, 0), 0, 1, identity_sensor(1.0)),
                  ImpossibleObservation);
}

TEST_CASE("discrete Bayes agrees with the grid filter") {
  // A 1x6 grid and a POMDP over the same cells with identity dynamics whose
  // observation 0 has probability L(s) / max L.
  GridSpec spec;
  spec.resolution = 0.5;
  spec.nx = 6;
  spec.origin = Vec3(0.5, 0.7, 0);
  LikelihoodModel model;
  model.sensor.sigma_level_db = 2.0;
  model.use = {true, true, false};
  AgentPose pose;
  Observation obs;
  obs.level_left = 66.0;
  obs.level_right = 64.5;
  const GridBelief grid = grid_update(GridBelief::uniform(spec), obs, pose, model);
  std::vector<double> lik(6);
  for (std::size_t s = 0; s < 6; ++s) lik[s] = std::exp(log_likelihood(obs, spec.center(s), pose, model));
  const double top = *std::max_element(lik.begin(), lik.end());
  DiscretePOMDP m(6, 1, 2, 0.5);
  for (std::size_t s = 0; s < 6; ++s) {
    m.set_transition(s, 0, s, 1.0);
    m.set_observation(0, s, 0, lik[s] / top);
    m.set_observation(0, s, 1, 1.0 - lik[s] / top);
  }
  m.finalize();
  const DiscreteBelief b = belief_update_discrete(DiscreteBelief::uniform(6), 0, 0, m);
  const auto p = grid.probabilities();
  for (std::size_t s = 0; s < 6; ++s) CHECK(std::abs(b.probs[s] - p[s]) < 1e-9);
}

TEST_CASE("information gain examples") {
  const DiscretePOMDP flat = identity_sensor(0.5);
  CHECK(std::abs(expected_information_gain(DiscreteBelief::uniform(2), 0, flat)) < 1e-12);
  CHECK(info_gain_action(DiscreteBelief::uniform(2), flat) == 0);

  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const DiscreteBelief u = DiscreteBelief::uniform(2);
  // Hand enumeration: each observation has probability 1/2 and posterior (0.85, 0.15).
  const double listen_gain = std::log(2.0) - h({0.85, 0.15});
  CHECK(std::abs(expected_information_gain(u, tiger::kListen, tiger) - listen_gain) < 1e-12);
  CHECK(std::abs(expected_information_gain(u, tiger::kOpenLeft, tiger)) < 1e-12);
  CHECK(info_gain_action(u, tiger) == tiger::kListen);

  const DiscretePOMDP sharp = identity_sensor(0.85);
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(expected_information_gain(DiscreteBelief::delta(2, 1), a, sharp) <= 1e-12);
  }
}

TEST_CASE("episodes are reproducible and respect the protocol") {
  const DiscretePOMDP one = single_state(3.5, 0.9);
  RandomStream rng(61);
  const EpisodeLog log =
      simulate_episode(one, make_random_policy(1), DiscreteBelief::uniform(1), 0, 1, rng);
  CHECK(log.discounted_return == 3.5);
  CHECK(log.actions.size() == 1);
  CHECK(log.states.size() == 2);

  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  RandomStream a(62);
  RandomStream b(62);
  const Policy random = make_random_policy(3);
  const EpisodeLog x = simulate_episode(tiger, random, DiscreteBelief::uniform(2), 30, a);
  const EpisodeLog y = simulate_episode(tiger, random, DiscreteBelief::uniform(2), 30, b);
  CHECK(x.states == y.states);
  CHECK(x.actions == y.actions);
  CHECK(x.observations == y.observations);
  CHECK(x.rewards == y.rewards);
  CHECK(x.discounted_return == y.discounted_return);

  const Policy broken = [](const PolicyContext&) { return std::size_t{7}; };
  CHECK_THROWS_AS(simulate_episode(tiger, broken, DiscreteBelief::uniform(2), 0, 5, a),
                  ProtocolError);
}

TEST_CASE("memoryless adapter sees the previous action-observation pair") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  std::vector<bool> saw_previous;
  const Policy reactive = make_memoryless_policy(
      [&saw_previous](std::optional<ActionObservation> last, RandomStream&) {
        saw_previous.push_back(last.has_value());
        return tiger::kListen;
      });
  RandomStream rng(63);
  simulate_episode(tiger, reactive, DiscreteBelief::uniform(2), 0, 4, rng);
  REQUIRE(saw_previous.size() == 4);
  CHECK_FALSE(saw_previous[0]);
  CHECK(saw_previous[1]);
  CHECK(saw_previous[3]);
}

TEST_CASE("tiger: qmdp beats random and stays below its own upper bound") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const QTable q = value_iteration(tiger, 1e-10, 100000);
  const Policy qmdp = make_qmdp_policy(q);
  const Policy random = make_random_policy(3);
  std::vector<double> rq;
  std::vector<double> rr;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RandomStream s1(derive_seed(64, i));
    RandomStream s2(derive_seed(65, i));
    rq.push_back(simulate_episode(tiger, qmdp, DiscreteBelief::uniform(2), 20, s1).discounted_return);
    rr.push_back(simulate_episode(tiger, random, DiscreteBelief::uniform(2), 20, s2).discounted_return);
  }
  CHECK(mean(rq) - mean(rr) >= 10.0);
  CHECK_FALSE(normal_ci95(rq).overlaps(normal_ci95(rr)));
  const double bound = 0.5 * (q.value(0) + q.value(1));
  CHECK(bound >= mean(rq));
}

TEST_CASE("hybrid policy keeps listening until the belief is sharp") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const QTable q = value_iteration(tiger, 1e-10, 100000);
  const Policy hybrid = make_hybrid_policy(tiger, q, {tiger::kOpenLeft, tiger::kOpenRight});
  RandomStream rng(66);
  const std::vector<ActionObservation> none;
  auto act = [&](double p) {
    const DiscreteBelief b{{p, 1 - p}};
    return hybrid(PolicyContext{b, none, 0, rng});
  };
  CHECK(act(0.5) == tiger::kListen);
  CHECK(act(0.999) == tiger::kOpenRight);
  CHECK(act(0.001) == tiger::kOpenLeft);
}

TEST_CASE("find-the-phone structure") {
  const PhoneProblem p = build_find_the_phone(small_phone(1.0));
  CHECK(p.pomdp.n_states() == 17);
  CHECK(p.pomdp.n_actions() == phone::kNumActions);
  CHECK(p.pomdp.terminal(p.terminal_state));
  for (std::size_t s = 0; s < p.terminal_state; ++s) {
    const std::size_t agent = p.agent_of(s);
    CHECK(p.pomdp.transition(s, phone::kObserve, s) == 1.0);
    CHECK(p.pomdp.transition(s, phone::kDeclare, p.terminal_state) == 1.0);
    CHECK(p.pomdp.reward(s, phone::kDeclare) == (agent == p.phone_of(s) ? 100.0 : -100.0));
    CHECK(p.pomdp.reward(s, phone::kNorth) == -1.0);
  }
  // Bumping: cell 0 is (0, 0); south and west are walls.
  const std::size_t s0 = p.state_index(0, 3);
  CHECK(p.pomdp.transition(s0, phone::kSouth, s0) == 1.0);
  CHECK(p.pomdp.transition(s0, phone::kWest, s0) == 1.0);
  CHECK(p.pomdp.transition(s0, phone::kEast, p.state_index(1, 3)) == 1.0);
  CHECK(p.pomdp.transition(s0, phone::kNorth, p.state_index(2, 3)) == 1.0);

  // Observe leaves the agent marginal unchanged.
  DiscreteBelief b = p.initial_belief(2);
  const DiscreteBelief after = belief_update_discrete(b, phone::kObserve, 3, p.pomdp);
  double agent_mass = 0.0;
  for (std::size_t phone_cell = 0; phone_cell < 4; ++phone_cell) {
    agent_mass += after.probs[p.state_index(2, phone_cell)];
  }
  CHECK(std::abs(agent_mass - 1.0) < 1e-12);

  PhoneProblemConfig big;
  big.grid_size = 10;
  big.max_transition_entries = 1000;
  CHECK_THROWS_AS(build_find_the_phone(big), TooLargeError);
}

TEST_CASE("find-the-phone value matches exhaustive search over action sequences") {
  const PhoneProblem p = build_find_the_phone(small_phone(0.0));
  const QTable q = value_iteration(p.pomdp, 1e-12, 10000);
  const double g = p.pomdp.gamma();
  // Dynamics are deterministic, so the best open-loop plan is optimal. Within
  // four steps the agent can reach any cell of the 2x2 grid and declare;
  // every plan that never declares is worse than one that does.
  for (std::size_t s = 0; s < p.terminal_state; ++s) {
    double best = -1e300;
    for (int code = 0; code < 6 * 6 * 6 * 6; ++code) {
      std::size_t state = s;
      double ret = 0.0;
      double discount = 1.0;
      int c = code;
      for (int t = 0; t < 4 && state != p.terminal_state; ++t) {
        const std::size_t a = static_cast<std::size_t>(c % 6);
        c /= 6;
        ret += discount * p.pomdp.reward(state, a);
        for (std::size_t next = 0; next < p.pomdp.n_states(); ++next) {
          if (p.pomdp.transition(state, a, next) == 1.0) {
            state = next;
            break;
          }
        }
        discount *= g;
      }
      best = std::max(best, ret);
    }
    CHECK(std::abs(q.value(s) - best) < 1e-9);
  }
}

TEST_CASE("finite-horizon POMDP value matches an independent expectimax") {
  const DiscretePOMDP tiger = make_tiger(TigerParams{});
  const DiscreteBelief u = DiscreteBelief::uniform(2);
  CHECK(std::abs(finite_horizon_value(tiger, u, 1) - (-1.0)) < 1e-12);
  for (std::size_t horizon = 1; horizon <= 5; ++horizon) {
    CHECK(std::abs(finite_horizon_value(tiger, u, horizon) - oracle_value(tiger, u.probs, horizon)) <
          1e-9);
  }
  const PhoneProblem p = build_find_the_phone(small_phone(2.0));
  for (std::size_t agent = 0; agent < 4; ++agent) {
    const DiscreteBelief b = p.initial_belief(agent);
    CHECK(std::abs(finite_horizon_value(p.pomdp, b, 3) - oracle_value(p.pomdp, b.probs, 3)) < 1e-9);
  }
}

TEST_CASE("gradient follow rules") {
  const GradientFollowParams params;
  RandomStream rng(67);
  const std::vector<SearchRecord> rising = {{Vec3(0, 0, 0), 50.0}, {Vec3(0.5, 0, 0), 51.0}};
  const Translate up = gradient_follow_action(rising, params, rng);
  CHECK((up.delta - Vec3(params.step, 0, 0)).norm() < 1e-12);
  const std::vector<SearchRecord> falling = {{Vec3(0, 0, 0), 51.0}, {Vec3(0.5, 0, 0), 50.0}};
  const Translate turned = gradient_follow_action(falling, params, rng);
  CHECK((turned.delta - Vec3(0, params.step, 0)).norm() < 1e-12);

  const std::vector<SearchRecord> flat = {{Vec3(0, 0, 0), 50.0}, {Vec3(0.5, 0, 0), 50.05}};
  RandomStream a(68);
  RandomStream b(68);
  const Translate explore = gradient_follow_action(flat, params, a);
  const Translate reference = random_walk_action(params.step, b);
  CHECK(explore.delta == reference.delta);
  CHECK(std::abs(explore.delta.norm() - params.step) < 1e-12);
}

TEST_CASE("action effect assessment") {
  CHECK(std::abs(assess_action_effect(0.3, 55.0, 60.0, 50.0, 2.0) - 0.3) < 1e-12);
  // Separation 2 sigma with the observation at l1 - ln 9 / 2 sigma-units from the midpoint
  // gives l1 / l0 = 1/9.
  const double sigma = 1.0;
  const double mu1 = 1.0;
  const double mu0 = 0.0;
  // log(l1/l0) = ((x - mu0)^2 - (x - mu1)^2) / 2 = x - 0.5 = -ln 9.
  const double x = 0.5 - std::log(9.0);
  CHECK(std::abs(assess_action_effect(0.9, x, mu1, mu0, sigma) - 0.5) < 1e-12);
  CHECK(assess_action_effect(0.5, 40.0, 50.0, 40.0, 1.0) < 1e-6);
  Observation obs;
  obs.level_left = 40.0;
  obs.level_right = 49.0;
  CHECK(std::abs(assess_action_effect(0.5, obs, 49.0, 40.0, 1.0) -
                 assess_action_effect(0.5, 49.0, 49.0, 40.0, 1.0)) < 1e-15);
}

TEST_CASE("pomdp validation") {
  DiscretePOMDP p(2, 1, 1, 0.9);
  p.set_transition(0, 0, 0, 0.6);
  p.set_transition(1, 0, 1, 1.0);
  p.set_observation(0, 0, 0, 1.0);
  p.set_observation(0, 1, 0, 1.0);
  CHECK_THROWS_AS(p.finalize(), ValidationError);
  DiscretePOMDP g(1, 1, 1, 1.0);
  g.set_transition(0, 0, 0, 1.0);
  g.set_observation(0, 0, 0, 1.0);
  CHECK_THROWS_AS(g.finalize(), ValidationError);
}
