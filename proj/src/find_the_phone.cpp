#include "auditionlab/errors.hpp"
#include "auditionlab/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auditionlab {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

DiscreteBelief PhoneProblem::initial_belief(std::size_t agent_cell) const {
  DiscreteBelief b{std::vector<double>(pomdp.n_states(), 0.0)};
  for (std::size_t phone_cell = 0; phone_cell < n_cells; ++phone_cell) {
    b.probs[state_index(agent_cell, phone_cell)] = 1.0 / static_cast<double>(n_cells);
  }
  return b;
}

PhoneProblem build_find_the_phone(const PhoneProblemConfig& config) {
  if (config.grid_size < 2) throw ValidationError("find-the-phone grid_size must be >= 2");
  if (config.bins < 1) throw ValidationError("find-the-phone needs at least one observation bin");
  if (!(config.cell_size > 0.0)) throw ValidationError("find-the-phone cell_size must be > 0");
  config.sensor.validate();

  const std::size_t g = config.grid_size;
  const std::size_t n_cells = g * g;
  const std::size_t n_states = n_cells * n_cells + 1;
  const std::size_t n_actions = phone::kNumActions;
  const double entries = static_cast<double>(n_states) * static_cast<double>(n_actions) *
                         static_cast<double>(n_states);
  if (entries > static_cast<double>(config.max_transition_entries)) {
    throw TooLargeError("find-the-phone grid " + std::to_string(g) + "x" + std::to_string(g) +
                        " needs " + std::to_string(static_cast<long long>(entries)) +
                        " transition entries (cap " +
                        std::to_string(config.max_transition_entries) +
                        "); use the continuous search pipeline instead");
  }

  PhoneProblem problem;
  problem.grid_size = g;
  problem.n_cells = n_cells;
  problem.terminal_state = n_cells * n_cells;
  problem.pomdp = DiscretePOMDP(n_states, n_actions, config.bins, config.gamma);
  DiscretePOMDP& pomdp = problem.pomdp;

  const auto moved = [g](std::size_t cell, std::size_t action) {
    std::size_t x = cell % g;
    std::size_t y = cell / g;
    switch (action) {
      case phone::kNorth: if (y + 1 < g) ++y; break;
      case phone::kEast: if (x + 1 < g) ++x; break;
      case phone::kSouth: if (y > 0) --y; break;
      case phone::kWest: if (x > 0) --x; break;
      default: break;
    }
    return y * g + x;
  };

  const SensorModel& sensor = config.sensor;
  const auto heard = [&](std::size_t agent_cell, std::size_t phone_cell) {
    const double dx = static_cast<double>(agent_cell % g) - static_cast<double>(phone_cell % g);
    const double dy = static_cast<double>(agent_cell / g) - static_cast<double>(phone_cell / g);
    const double r = config.cell_size * std::sqrt(dx * dx + dy * dy);
    return with_noise_floor(level_at_range(config.source_level_db, r, sensor),
                            sensor.noise_floor_db);
  };

  double max_level = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n_cells; ++a) {
    for (std::size_t p = 0; p < n_cells; ++p) max_level = std::max(max_level, heard(a, p));
  }
  const double sigma = sensor.sigma_level_db;
  const double lo = sensor.noise_floor_db - 3.0 * sigma;
  const double hi = max_level + 3.0 * sigma;
  problem.bin_edges.resize(config.bins + 1);
  for (std::size_t i = 0; i <= config.bins; ++i) {
    problem.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(config.bins);
  }

  // Bin probabilities of a heard level; outer bins extend to +/- infinity.
  const auto bin_probs = [&](double level) {
    std::vector<double> probs(config.bins, 0.0);
    if (sigma == 0.0) {
      std::size_t bin = 0;
      while (bin + 1 < config.bins && level >= problem.bin_edges[bin + 1]) ++bin;
      probs[bin] = 1.0;
      return probs;
    }
    double previous = 0.0;
    for (std::size_t bin = 0; bin < config.bins; ++bin) {
      const double upper =
          bin + 1 == config.bins ? 1.0 : normal_cdf((problem.bin_edges[bin + 1] - level) / sigma);
      probs[bin] = upper - previous;
      previous = upper;
    }
    return probs;
  };

  const std::size_t terminal = problem.terminal_state;
  for (std::size_t agent = 0; agent < n_cells; ++agent) {
    for (std::size_t phone_cell = 0; phone_cell < n_cells; ++phone_cell) {
      const std::size_t s = problem.state_index(agent, phone_cell);
      for (std::size_t a = 0; a < n_actions; ++a) {
        if (a == phone::kDeclare) {
          pomdp.set_transition(s, a, terminal, 1.0);
          pomdp.set_reward(s, a, agent == phone_cell ? config.rewards.correct : config.rewards.wrong);
        } else {
          pomdp.set_transition(s, a, problem.state_index(moved(agent, a), phone_cell), 1.0);
          pomdp.set_reward(s, a, config.rewards.step);
        }
      }
      const std::vector<double> probs = bin_probs(heard(agent, phone_cell));
      for (std::size_t a = 0; a < n_actions; ++a) {
        for (std::size_t o = 0; o < config.bins; ++o) pomdp.set_observation(a, s, o, probs[o]);
      }
    }
  }
  for (std::size_t a = 0; a < n_actions; ++a) {
    pomdp.set_transition(terminal, a, terminal, 1.0);
    pomdp.set_observation(a, terminal, 0, 1.0);
  }
  pomdp.set_terminal(terminal);
  pomdp.finalize();
  return problem;
}

}  // namespace auditionlab
