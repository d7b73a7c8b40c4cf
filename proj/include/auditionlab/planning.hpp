#pragma once

#include "auditionlab/acoustics.hpp"
#include "auditionlab/pose.hpp"
#include "auditionlab/random.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace auditionlab {

// ---------------------------------------------------------------------------
// Discrete POMDP

struct Successor {
  std::size_t state;
  double probability;
};

/// Finite (S, A, O, T, Z, R, gamma). Tensors are dense; call finalize()
/// after filling them to validate and build the sparse successor lists used
/// by the solvers.
class DiscretePOMDP {
 public:
  DiscretePOMDP() = default;
  DiscretePOMDP(std::size_t n_states, std::size_t n_actions, std::size_t n_observations,
                double gamma);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_observations() const { return n_observations_; }
  double gamma() const { return gamma_; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return t_[(s * n_actions_ + a) * n_states_ + next];
  }
  double observation(std::size_t a, std::size_t next, std::size_t o) const {
    return z_[(a * n_states_ + next) * n_observations_ + o];
  }
  double reward(std::size_t s, std::size_t a) const { return r_[s * n_actions_ + a]; }
  bool terminal(std::size_t s) const { return terminal_[s]; }

  void set_transition(std::size_t s, std::size_t a, std::size_t next, double p);
  void set_observation(std::size_t a, std::size_t next, std::size_t o, double p);
  void set_reward(std::size_t s, std::size_t a, double r);
  /// Terminal states are absorbing with zero reward; episodes stop on entry.
  void set_terminal(std::size_t s, bool terminal = true);

  /// Checks every T[s][a][.] and Z[a][s'][.] sums to 1 within 1e-9, rewards
  /// are finite and gamma is in [0, 1). Throws ValidationError.
  void finalize();
  bool finalized() const { return finalized_; }

  std::span<const Successor> successors(std::size_t s, std::size_t a) const;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::size_t n_observations_ = 0;
  double gamma_ = 0.0;
  std::vector<double> t_;
  std::vector<double> z_;
  std::vector<double> r_;
  std::vector<bool> terminal_;
  std::vector<std::size_t> row_offsets_;
  std::vector<Successor> successors_;
  bool finalized_ = false;
};

struct DiscreteBelief {
  std::vector<double> probs;

  static DiscreteBelief uniform(std::size_t n);
  static DiscreteBelief delta(std::size_t n, std::size_t s);
  void validate() const;
};

double entropy(const DiscreteBelief& b);

struct QTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> q;  // row-major [s][a]
  double residual = 0.0;  // sup-norm Bellman residual of the returned q
  std::size_t iterations = 0;

  double at(std::size_t s, std::size_t a) const { return q[s * n_actions + a]; }
  double value(std::size_t s) const;
};

/// One Bellman optimality backup of `q`.
QTable bellman_backup(const DiscretePOMDP& pomdp, const QTable& q);

/// Value iteration on the fully observed MDP underlying the POMDP. Stops
/// when successive sweeps differ by less than tol in sup norm; the returned
/// residual is that of one further backup. Throws ConvergenceError carrying
/// the last residual when max_iters is reached.
QTable value_iteration(const DiscretePOMDP& pomdp, double tol, std::size_t max_iters);

/// Optimal expected discounted return of the POMDP over `horizon` steps from
/// belief b, by exhaustive expectimax over action-observation histories.
/// Terminal states earn nothing. Cost grows as (|A| |O|)^horizon.
double finite_horizon_value(const DiscretePOMDP& pomdp, const DiscreteBelief& b,
                            std::size_t horizon);

/// argmax_a sum_s b[s] Q[s][a], ties to the lowest index.
std::size_t qmdp_action(const DiscreteBelief& b, const QTable& q);

/// b'[s'] ~ Z[a][s'][o] sum_s T[s][a][s'] b[s]. Throws ImpossibleObservation
/// when the normalizer is zero.
DiscreteBelief belief_update_discrete(const DiscreteBelief& b, std::size_t a, std::size_t o,
                                      const DiscretePOMDP& pomdp);

/// Expected entropy reduction H(b) - E_o[H(b' | a, o)], by exact enumeration.
double expected_information_gain(const DiscreteBelief& b, std::size_t a,
                                 const DiscretePOMDP& pomdp);

/// Tie tolerance used when comparing expected gains.
inline constexpr double kGainTieTolerance = 1e-12;

/// argmax of expected information gain over all actions, or over `allowed`
/// when given. Ties (within kGainTieTolerance) go to the lowest index.
std::size_t info_gain_action(const DiscreteBelief& b, const DiscretePOMDP& pomdp);
std::size_t info_gain_action(const DiscreteBelief& b, const DiscretePOMDP& pomdp,
                             std::span<const std::size_t> allowed);

// ---------------------------------------------------------------------------
// Policies and episodes

struct ActionObservation {
  std::size_t action;
  std::size_t observation;
};

struct PolicyContext {
  const DiscreteBelief& belief;
  std::span<const ActionObservation> history;
  std::int64_t time_step;
  RandomStream& rng;
};

using Policy = std::function<std::size_t(const PolicyContext&)>;

Policy make_qmdp_policy(QTable q);
Policy make_info_gain_policy(const DiscretePOMDP& pomdp);
/// Commits (takes a `commit` action) whenever QMDP recommends one, otherwise
/// gathers information with the entropy-greedy choice restricted to the
/// remaining actions. QMDP alone never values information; this is the
/// policy that keeps observing while the belief is uncertain.
Policy make_hybrid_policy(const DiscretePOMDP& pomdp, QTable q,
                          std::vector<std::size_t> commit_actions);
Policy make_random_policy(std::size_t n_actions);
/// Adapter for reactive policies a_t ~ p(a_t | o_{t-1}, a_{t-1}); the
/// callback sees nullopt on the first step.
Policy make_memoryless_policy(
    std::function<std::size_t(std::optional<ActionObservation>, RandomStream&)> reactive);

struct EpisodeLog {
  std::vector<std::size_t> states;  // s_0 .. s_T (one more than actions)
  std::vector<std::size_t> actions;
  std::vector<std::size_t> observations;
  std::vector<double> rewards;
  std::vector<double> belief_entropy;  // after each update
  double discounted_return = 0.0;
  bool terminated = false;
};

/// Generative loop: a_t from the policy, r_t = R[s_t][a_t], s_{t+1} ~ T,
/// o ~ Z[a_t][s_{t+1}], belief updated exactly. Stops early on entering a
/// terminal state. Draw order per step: policy, transition, observation.
EpisodeLog simulate_episode(const DiscretePOMDP& pomdp, const Policy& policy,
                            const DiscreteBelief& initial, std::size_t s0, std::size_t horizon,
                            RandomStream& rng);
/// Samples s0 from `initial` first.
EpisodeLog simulate_episode(const DiscretePOMDP& pomdp, const Policy& policy,
                            const DiscreteBelief& initial, std::size_t horizon,
                            RandomStream& rng);

// ---------------------------------------------------------------------------
// Fixtures

struct TigerParams {
  double listen_cost = -1.0;
  double correct = 10.0;
  double wrong = -100.0;
  double accuracy = 0.85;
  double gamma = 0.95;
};

/// States {tiger-left, tiger-right}; actions {listen, open-left, open-right};
/// observations {hear-left, hear-right}. Opening a door resets the tiger
/// uniformly and yields an uninformative observation.
DiscretePOMDP make_tiger(const TigerParams& params);

namespace tiger {
inline constexpr std::size_t kListen = 0;
inline constexpr std::size_t kOpenLeft = 1;
inline constexpr std::size_t kOpenRight = 2;
}  // namespace tiger

// ---------------------------------------------------------------------------
// Find the phone

struct PhoneRewards {
  double step = -1.0;
  double correct = 100.0;
  double wrong = -100.0;
};

struct PhoneProblemConfig {
  std::size_t grid_size = 4;
  double cell_size = 1.0;  // m
  double source_level_db = 60.0;
  SensorModel sensor;  // uses noise_floor_db, sigma_level_db, r_ref, r_min
  std::size_t bins = 8;
  PhoneRewards rewards;
  double gamma = 0.95;
  std::size_t max_transition_entries = 1'000'000;
};

namespace phone {
inline constexpr std::size_t kNorth = 0;  // +y
inline constexpr std::size_t kEast = 1;   // +x
inline constexpr std::size_t kSouth = 2;  // -y
inline constexpr std::size_t kWest = 3;   // -x
inline constexpr std::size_t kObserve = 4;
inline constexpr std::size_t kDeclare = 5;
inline constexpr std::size_t kNumActions = 6;
}  // namespace phone

struct PhoneProblem {
  DiscretePOMDP pomdp;
  std::size_t grid_size = 0;
  std::size_t n_cells = 0;
  std::size_t terminal_state = 0;
  std::vector<double> bin_edges;  // bins + 1 edges; outer bins are open-ended

  std::size_t state_index(std::size_t agent_cell, std::size_t phone_cell) const {
    return agent_cell * n_cells + phone_cell;
  }
  std::size_t agent_of(std::size_t s) const { return s / n_cells; }
  std::size_t phone_of(std::size_t s) const { return s % n_cells; }
  std::size_t cell(std::size_t x, std::size_t y) const { return y * grid_size + x; }
  /// Agent position known, phone uniform.
  DiscreteBelief initial_belief(std::size_t agent_cell) const;
};

/// States are (agent cell, phone cell) pairs plus one absorbing terminal.
/// Moves bump against walls; Observe keeps the agent cell; Declare ends the
/// episode with the correct/wrong reward. Observations are equal-width dB
/// bins over [N0 - 3 sigma, L_max + 3 sigma] of the level heard at the
/// agent cell. Throws TooLargeError when S * A * S exceeds the cap.
PhoneProblem build_find_the_phone(const PhoneProblemConfig& config);

// ---------------------------------------------------------------------------
// Continuous search

struct SearchRecord {
  Vec3 position;
  double level;  // dB, mean of both microphones
};

struct GradientFollowParams {
  double step = 0.5;            // m
  double turn_angle = kPi / 2;  // rad, about world z
  double epsilon_db = 0.1;      // level changes within +/- epsilon count as flat
};

/// Intensity-seeking step. Compares the last two levels along the last
/// displacement: rising keeps the heading, falling turns it by turn_angle,
/// flat (or no displacement) takes a uniformly random heading from `rng`.
/// Returns a world-frame planar Translate of length params.step. With fewer
/// than two records the heading is random.
Translate gradient_follow_action(std::span<const SearchRecord> history,
                                 const GradientFollowParams& params, RandomStream& rng);

/// Random-walk baseline: uniformly random planar heading.
Translate random_walk_action(double step, RandomStream& rng);

// ---------------------------------------------------------------------------
// Action-effect assessment

/// Posterior probability that an action had its expected audible effect,
/// from two Gaussian level hypotheses: p l1 / (p l1 + (1 - p) l0), where l1
/// is centered on `effect_level` and l0 on `no_effect_level`. Silence near
/// no_effect_level is evidence the effect did not happen.
double assess_action_effect(double prior_effect, double observed_level, double effect_level,
                            double no_effect_level, double sigma);
/// Uses the louder microphone of `obs`.
double assess_action_effect(double prior_effect, const Observation& obs, double effect_level,
                            double no_effect_level, double sigma);

}  // namespace auditionlab
