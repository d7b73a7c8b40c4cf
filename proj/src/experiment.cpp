#include "auditionlab/experiment.hpp"

#include "auditionlab/errors.hpp"
#include "auditionlab/random.hpp"
#include "auditionlab/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace auditionlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDegToRad = kPi / 180.0;

// Sub-stream keys inside an episode.
constexpr std::uint64_t kWorldStream = 1;
constexpr std::uint64_t kSensorStream = 2;
constexpr std::uint64_t kFilterStream = 3;
constexpr std::uint64_t kPolicyStream = 4;
// Run-level streams live past any plausible episode index.
constexpr std::uint64_t kCalibrationIndex = std::numeric_limits<std::uint64_t>::max();

struct EpisodeStreams {
  RandomStream world;
  RandomStream sensor;
  RandomStream filter;
  RandomStream policy;

  EpisodeStreams(std::uint64_t seed, std::size_t episode)
      : EpisodeStreams(RandomStream(derive_seed(seed, episode))) {}

 private:
  explicit EpisodeStreams(RandomStream root)
      : world(root.split(kWorldStream)),
        sensor(root.split(kSensorStream)),
        filter(root.split(kFilterStream)),
        policy(root.split(kPolicyStream)) {}
};

std::string vec_string(const Vec3& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

std::string observation_string(const Observation& obs) {
  return format_double(obs.level_left) + " " + format_double(obs.level_right) + " " +
         (obs.itd_valid && obs.itd ? format_double(*obs.itd) : std::string("none"));
}

Quat yaw_quat(double degrees) { return quat_from_axis_angle(Vec3(0.0, 0.0, degrees * kDegToRad)); }

// Shared per-run state, built once before episodes start.
struct Prepared {
  std::optional<DiscretePOMDP> tiger;
  std::optional<PhoneProblem> phone;
  std::optional<QTable> q;
  DetectorRates rates;
};

// ---------------------------------------------------------------- world setup

AgentPose start_pose(const WorldConfig& w) {
  AgentPose pose;
  pose.position = w.agent_start;
  if (w.trajectory == Trajectory::circle) pose.position += Vec3(w.trajectory_radius, 0.0, 0.0);
  pose.orientation = yaw_quat(w.agent_yaw_deg);
  return pose;
}

Vec3 uniform_in(const Bounds& b, RandomStream& rng) {
  Vec3 p;
  for (int axis = 0; axis < 3; ++axis) p[axis] = rng.uniform(b.lo[axis], b.hi[axis]);
  return p;
}

Vec3 place_source(const WorldConfig& w, const Vec3& agent, RandomStream& rng) {
  if (w.source_position) return *w.source_position;
  if (!w.params.bounds) {
    throw ValidationError("world.source_position or world.bounds is required to place the source");
  }
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec3 p = uniform_in(*w.params.bounds, rng);
    if ((p - agent).norm() >= w.min_source_distance) return p;
  }
  throw ValidationError("no source position inside world.bounds satisfies min_source_distance");
}

WorldState initial_world(const ScenarioConfig& c, RandomStream& rng, bool with_source) {
  WorldState state;
  state.agent = start_pose(c.world);
  if (with_source) {
    SoundSource source;
    source.id = 1;
    source.position = place_source(c.world, state.agent.position, rng);
    source.level_ref = c.world.source_level_db;
    source.kind = SourceKind::continuous;
    state.sources.push_back(source);
  }
  return state;
}

Translate body_translate(const AgentPose& pose, const Vec3& world_delta, double limit) {
  Vec3 delta = world_delta;
  const double n = delta.norm();
  if (n > limit) delta *= limit / n;
  return {pose.orientation.conjugate() * delta};
}

Action trajectory_action(const ScenarioConfig& c, const WorldState& state, std::int64_t t,
                         RandomStream& rng) {
  const WorldConfig& w = c.world;
  const double step_rad = w.rotation_step_deg * kDegToRad;
  switch (w.trajectory) {
    case Trajectory::stationary:
      return Observe{};
    case Trajectory::circle: {
      const double theta = 2.0 * kPi * static_cast<double>(t + 1) / w.trajectory_points;
      const Vec3 target =
          w.agent_start + w.trajectory_radius * Vec3(std::cos(theta), std::sin(theta), 0.0);
      return body_translate(state.agent, target - state.agent.position, w.params.max_translate);
    }
    case Trajectory::random_walk: {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const double heading = rng.uniform(0.0, 2.0 * kPi);
        const Vec3 delta = w.step_length * Vec3(std::cos(heading), std::sin(heading), 0.0);
        if (!w.params.bounds || w.params.bounds->contains(state.agent.position + delta, 0.0)) {
          return body_translate(state.agent, delta, w.params.max_translate);
        }
      }
      return Observe{};
    }
    case Trajectory::rotate:
      return Rotate{t % 2 == 0 ? Vec3(0.0, 0.0, step_rad) : Vec3(step_rad, 0.0, 0.0)};
    case Trajectory::yaw:
      return Rotate{Vec3(0.0, 0.0, step_rad)};
  }
  return Observe{};
}

// ---------------------------------------------------------------- simulate

EpisodeResult simulate_episode_run(const ScenarioConfig& c, std::size_t horizon,
                                   EpisodeStreams& rng) {
  EpisodeResult out;
  WorldState state = initial_world(c, rng.world, true);
  double sum_left = 0.0;
  double sum_right = 0.0;
  std::size_t valid = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Action action = trajectory_action(c, state, static_cast<std::int64_t>(t), rng.policy);
    state = step(state, action, c.world.params, rng.world);
    const Observation obs = observe(state, c.sensor, rng.sensor);
    sum_left += obs.level_left;
    sum_right += obs.level_right;
    if (obs.itd_valid) ++valid;
    out.steps.push_back({state.time_step, describe(action), observation_string(obs), "", "", kNaN, 0.0});
  }
  const double n = static_cast<double>(horizon);
  out.metrics = {n, sum_left / n, sum_right / n, static_cast<double>(valid) / n};
  return out;
}

// ---------------------------------------------------------------- localize

EpisodeResult localize_episode_run(const ScenarioConfig& c, std::size_t horizon,
                                   EpisodeStreams& rng) {
  EpisodeResult out;
  const Bounds& bounds = *c.world.params.bounds;
  WorldState state = initial_world(c, rng.world, true);
  const Vec3 truth = state.sources.front().position;
  const LikelihoodModel model{c.sensor, c.world.source_level_db, c.filter.use};
  const int dims = c.world.planar ? 2 : 3;
  const double sigma_q = c.filter.process_sigma;

  std::optional<GridBelief> grid;
  std::optional<GaussianBelief> gauss;
  std::optional<ParticleBelief> particles;
  PfParams pf_params{c.filter.jitter, 0.5, bounds};

  switch (c.filter.type) {
    case FilterType::grid:
      grid = GridBelief::uniform(GridSpec::covering(bounds, c.filter.resolution));
      break;
    case FilterType::ekf: {
      GaussianBelief b;
      b.mean = bounds.center();
      const Vec3 extent = bounds.extent();
      Vec3 var;
      for (int axis = 0; axis < 3; ++axis) {
        const double s = c.filter.ekf_prior_sigma ? *c.filter.ekf_prior_sigma
                                                  : extent[axis] / std::sqrt(12.0);
        var[axis] = s * s;
      }
      if (c.world.planar) var.z() = 1e-8;
      b.covariance = var.asDiagonal();
      gauss = b;
      break;
    }
    case FilterType::pf:
      particles = ParticleBelief::uniform(bounds, c.filter.n_particles, rng.filter);
      break;
  }

  Mat3 process = Mat3::Identity() * sigma_q * sigma_q;
  if (c.world.planar) process(2, 2) = 0.0;

  Vec3 mean = Vec3::Zero();
  std::string mode;
  double h = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Action action = trajectory_action(c, state, static_cast<std::int64_t>(t), rng.policy);
    state = step(state, action, c.world.params, rng.world);
    const Observation obs = observe(state, c.sensor, rng.sensor);
    if (grid) {
      if (sigma_q > 0.0) *grid = grid_predict(*grid, sigma_q);
      try {
        *grid = grid_update(*grid, obs, state.agent, model);
      } catch (const DegenerateBelief& e) {
        *grid = GridBelief::uniform(grid->spec());
        out.notes.push_back("step " + std::to_string(state.time_step) + ": " + e.what() +
                            ", belief reset to uniform");
      }
      mean = grid->mean();
      mode = vec_string(grid->mode());
      h = belief_entropy(*grid);
    } else if (gauss) {
      if (sigma_q > 0.0) *gauss = ekf_predict(*gauss, process);
      *gauss = ekf_update(*gauss, obs, state.agent, model);
      mean = gauss->mean;
      mode = vec_string(mean);
      h = gaussian_entropy(*gauss, dims);
    } else {
      if (sigma_q > 0.0) {
        for (auto& p : particles->particles) {
          for (int axis = 0; axis < dims; ++axis) p[axis] += rng.filter.normal(0.0, sigma_q);
          p = bounds.clamp(p);
        }
      }
      PfStepResult r = pf_step(*particles, obs, state.agent, model, pf_params, rng.filter);
      if (r.reinitialized) {
        out.notes.push_back("step " + std::to_string(state.time_step) +
                            ": particle weights collapsed, reinitialized uniformly");
      }
      particles = std::move(r.belief);
      mean = particles->mean();
      mode = vec_string(mean);
      h = gaussian_entropy(GaussianBelief{mean, particles->covariance()}, dims);
    }
    out.steps.push_back(
        {state.time_step, describe(action), observation_string(obs), vec_string(mean), mode, h, 0.0});
  }
  const double error = (mean - truth).norm();
  const double success = error <= 2.0 * c.filter.resolution ? 1.0 : 0.0;
  out.steps.back().reward = success;
  out.metrics = {static_cast<double>(horizon), error, h, success};
  return out;
}

// ---------------------------------------------------------------- plan

Policy make_policy(const ScenarioConfig& c, const DiscretePOMDP& pomdp, const QTable& q,
                   std::vector<std::size_t> commit) {
  switch (c.planner.solver) {
    case Solver::vi_qmdp:
      return make_qmdp_policy(q);
    case Solver::info_gain:
      return make_info_gain_policy(pomdp);
    case Solver::hybrid:
      return make_hybrid_policy(pomdp, q, std::move(commit));
    case Solver::random:
      return make_random_policy(pomdp.n_actions());
    case Solver::gradient_follow:
      break;
  }
  throw ValidationError("solver '" + to_string(c.planner.solver) + "' cannot drive a discrete problem");
}

std::string discrete_mode(const std::vector<double>& probs) {
  return std::to_string(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

EpisodeResult discrete_plan_run(const ScenarioConfig& c, const Prepared& prep, std::size_t horizon,
                                EpisodeStreams& rng) {
  EpisodeResult out;
  const bool is_tiger = c.planner.problem == Problem::tiger;
  const DiscretePOMDP& pomdp = is_tiger ? *prep.tiger : prep.phone->pomdp;
  std::vector<std::size_t> commit;
  if (is_tiger) {
    commit = {tiger::kOpenLeft, tiger::kOpenRight};
  } else {
    commit = {phone::kDeclare};
  }
  const Policy policy = make_policy(c, pomdp, *prep.q, commit);

  DiscreteBelief initial;
  std::size_t s0 = 0;
  if (is_tiger) {
    initial = DiscreteBelief::uniform(2);
    s0 = rng.world.index(2);
  } else {
    const PhoneProblem& p = *prep.phone;
    const std::size_t agent = rng.world.index(p.n_cells);
    const std::size_t phone_cell = rng.world.index(p.n_cells);
    initial = p.initial_belief(agent);
    s0 = p.state_index(agent, phone_cell);
  }
  const EpisodeLog log = simulate_episode(pomdp, policy, initial, s0, horizon, rng.policy);

  static const char* const kTigerNames[] = {"listen", "open_left", "open_right"};
  static const char* const kPhoneNames[] = {"north", "east", "south", "west", "observe", "declare"};
  DiscreteBelief belief = initial;
  double success = 0.0;
  bool decided = false;
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    const std::size_t a = log.actions[t];
    belief = belief_update_discrete(belief, a, log.observations[t], pomdp);
    out.steps.push_back({static_cast<std::int64_t>(t + 1), is_tiger ? kTigerNames[a] : kPhoneNames[a],
                         std::to_string(log.observations[t]), "", discrete_mode(belief.probs),
                         entropy(belief), log.rewards[t]});
    if (!decided && std::find(commit.begin(), commit.end(), a) != commit.end()) {
      decided = true;
      success = log.rewards[t] > 0.0 ? 1.0 : 0.0;
    }
  }
  out.metrics = {static_cast<double>(log.actions.size()), log.discounted_return, success};
  return out;
}

EpisodeResult search_run(const ScenarioConfig& c, std::size_t horizon, EpisodeStreams& rng) {
  EpisodeResult out;
  const Bounds& bounds = *c.world.params.bounds;
  const PlannerConfig& pl = c.planner;
  WorldState state;
  Vec3 source_pos = Vec3::Zero();
  bool placed = false;
  for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
    source_pos = c.world.source_position ? *c.world.source_position : uniform_in(bounds, rng.world);
    state.agent.position = uniform_in(bounds, rng.world);
    placed = (state.agent.position - source_pos).norm() >= pl.min_start_distance;
  }
  if (!placed) throw ValidationError("world.bounds too small for planner.min_start_distance");
  SoundSource source;
  source.id = 1;
  source.position = source_pos;
  source.level_ref = c.world.source_level_db;
  state.sources.push_back(source);

  const GradientFollowParams gparams{pl.step_size, pl.turn_angle_deg * kDegToRad, pl.epsilon_db};
  std::vector<SearchRecord> history;
  const auto record = [&](const Observation& obs) {
    history.push_back({state.agent.position, 0.5 * (obs.level_left + obs.level_right)});
  };
  record(observe(state, c.sensor, rng.sensor));

  double ret = 0.0;
  double discount = 1.0;
  std::size_t steps = 0;
  bool found = (state.agent.position - source_pos).norm() <= pl.capture_radius;
  while (!found && steps < horizon) {
    const Translate proposal = pl.solver == Solver::gradient_follow
                                   ? gradient_follow_action(history, gparams, rng.policy)
                                   : random_walk_action(pl.step_size, rng.policy);
    const Vec3 target = bounds.clamp(state.agent.position + proposal.delta);
    const Translate action{state.agent.orientation.conjugate() * (target - state.agent.position)};
    state = step(state, action, c.world.params, rng.world);
    const Observation obs = observe(state, c.sensor, rng.sensor);
    record(obs);
    ret += discount * pl.rewards.step;
    discount *= pl.gamma;
    ++steps;
    found = (state.agent.position - source_pos).norm() <= pl.capture_radius;
    out.steps.push_back({state.time_step, describe(Action(action)), observation_string(obs),
                         vec_string(state.agent.position), "", kNaN, pl.rewards.step});
  }
  out.metrics = {static_cast<double>(steps), ret, found ? 1.0 : 0.0};
  return out;
}

// ---------------------------------------------------------------- multiagent

MultiagentParams multiagent_params(const ScenarioConfig& c) {
  const MultiagentConfig& m = *c.multiagent;
  MultiagentParams params;
  params.lambda_arrival = m.lambda_arrival;
  params.departure_probability = m.departure_probability;
  params.arrival_template.policy = RandomWalkPolicy{m.arrival_walk_sigma, 0.0};
  params.arrival_template.emissions["arrive"] = m.arrival_emission;
  params.spawn_bounds = c.world.params.bounds;
  return params;
}

EpisodeResult multiagent_run(const ScenarioConfig& c, const Prepared& prep, std::size_t horizon,
                             EpisodeStreams& rng) {
  EpisodeResult out;
  const MultiagentConfig& m = *c.multiagent;
  const MultiagentParams params = multiagent_params(c);
  WorldState state = initial_world(c, rng.world, c.world.source_position.has_value());
  state.other_agents = m.agents;

  OnsetDetector detector(m.detector);
  PresenceBelief presence;
  std::vector<DetectionEvent> events;
  std::vector<TruthOnset> truth;
  const auto horizon_steps = static_cast<std::int64_t>(horizon);
  for (std::int64_t t = 0; t < horizon_steps; ++t) {
    const Observation obs = observe(state, c.sensor, rng.sensor);
    std::optional<DetectionEvent> event = detector.push(obs);
    if (event) events.push_back(*event);
    std::optional<DetectionEvent> onset;
    if (event && event->kind == DetectionKind::onset) onset = event;
    presence = update_presence(presence, onset, m.hazard, prep.rates);
    presence.background_level = detector.background_level();
    presence.background_var = detector.background_var();
    std::string action = "observe";
    if (event) action = event->kind == DetectionKind::onset ? "onset" : "offset";
    out.steps.push_back({t, action, observation_string(obs), "", format_double(presence.p_new_agent),
                         kNaN, 0.0});
    if (t + 1 < horizon_steps) {
      MultiStepResult next = multi_step(state, Observe{}, c.world.params, params, rng.world);
      for (const auto& e : next.emissions) truth.push_back({e.onset_step, e.agent_id});
      state = std::move(next.state);
    }
  }
  const DetectionMetrics metrics = score_detections(events, truth, m.tolerance, horizon_steps);
  out.metrics = {static_cast<double>(horizon),
                 static_cast<double>(metrics.n_true),
                 static_cast<double>(metrics.n_predicted),
                 metrics.precision,
                 metrics.recall,
                 metrics.n_matched > 0 ? metrics.mean_delay : kNaN,
                 presence.p_new_agent};
  return out;
}

// ---------------------------------------------------------------- dispatch

Prepared prepare(const ScenarioConfig& c, Mode mode, std::uint64_t seed, std::vector<std::string>& notes) {
  Prepared prep;
  const PlannerConfig& pl = c.planner;
  if (mode == Mode::plan && pl.problem == Problem::tiger) {
    prep.tiger = make_tiger({pl.rewards.step, pl.rewards.correct, pl.rewards.wrong,
                             pl.listen_accuracy, pl.gamma});
    prep.q = value_iteration(*prep.tiger, pl.tol, pl.max_iters);
  } else if (mode == Mode::plan && pl.problem == Problem::find_the_phone) {
    PhoneProblemConfig pc;
    pc.grid_size = pl.grid_size;
    pc.cell_size = pl.cell_size;
    pc.source_level_db = c.world.source_level_db;
    pc.sensor = c.sensor;
    pc.bins = pl.bins;
    pc.rewards = pl.rewards;
    pc.gamma = pl.gamma;
    pc.max_transition_entries = pl.max_transition_entries;
    prep.phone = build_find_the_phone(pc);
    prep.q = value_iteration(prep.phone->pomdp, pl.tol, pl.max_iters);
  }
  if (prep.q) {
    notes.push_back("value iteration: " + std::to_string(prep.q->iterations) +
                    " iterations, residual " + format_double(prep.q->residual));
  }
  if (mode == Mode::multiagent) {
    if (!c.multiagent) throw ValidationError("the multiagent mode needs a multiagent section");
    const MultiagentConfig& m = *c.multiagent;
    multiagent_params(c).validate();
    if (m.rates) {
      prep.rates = *m.rates;
    } else {
      RandomStream rng(derive_seed(seed, kCalibrationIndex));
      const double sigma = c.sensor.sigma_level_db;
      prep.rates = calibrate_detector(m.detector, sigma, (m.detector.k + 2.0) * sigma,
                                      m.arrival_emission.duration, 1000, rng);
      notes.push_back("calibrated detector: tpr " + format_double(prep.rates.tpr) + ", fpr " +
                      format_double(prep.rates.fpr));
    }
  }
  return prep;
}

EpisodeResult run_one(const ScenarioConfig& c, Mode mode, const Prepared& prep,
                      std::uint64_t seed, std::size_t episode) {
  EpisodeStreams rng(seed, episode);
  const std::size_t horizon = mode == Mode::plan && c.planner.horizon ? *c.planner.horizon
                                                                      : c.run.horizon;
  EpisodeResult out;
  switch (mode) {
    case Mode::simulate:
      out = simulate_episode_run(c, horizon, rng);
      break;
    case Mode::localize:
      out = localize_episode_run(c, horizon, rng);
      break;
    case Mode::plan:
      out = c.planner.problem == Problem::continuous_search ? search_run(c, horizon, rng)
                                                            : discrete_plan_run(c, prep, horizon, rng);
      break;
    case Mode::multiagent:
      out = multiagent_run(c, prep, horizon, rng);
      break;
  }
  out.episode = episode;
  out.metrics.insert(out.metrics.begin(), static_cast<double>(episode));
  return out;
}

// ---------------------------------------------------------------- output helpers

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

json number_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string join_header(const std::vector<std::string>& columns) {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s) {
  if (s == "nan") return kNaN;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw NumericalError("unparseable number '" + s + "' in written output");
  return x;
}

bool close(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

void check_consistency(Mode mode, const std::vector<std::vector<double>>& rows,
                       const std::vector<AggregateRow>& written) {
  std::vector<EpisodeResult> episodes(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) episodes[i].metrics = rows[i];
  const std::vector<AggregateRow> recomputed = aggregate(mode, episodes);
  if (recomputed.size() != written.size()) {
    throw NumericalError("summary has " + std::to_string(written.size()) + " rows, expected " +
                         std::to_string(recomputed.size()));
  }
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    const AggregateRow& a = recomputed[i];
    const AggregateRow& b = written[i];
    if (a.column != b.column || a.n != b.n || !close(a.mean, b.mean) || !close(a.median, b.median) ||
        !close(a.ci95_low, b.ci95_low) || !close(a.ci95_high, b.ci95_high)) {
      throw NumericalError("summary row '" + b.column + "' does not match the metrics rows");
    }
  }
}

void verify_csv(Mode mode, const std::filesystem::path& dir) {
  std::istringstream metrics(read_file(dir / "metrics.csv"));
  std::string line;
  std::getline(metrics, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(metrics, line)) {
    std::vector<double> row;
    for (const auto& f : split_line(line)) row.push_back(parse_number(f));
    rows.push_back(std::move(row));
  }
  std::istringstream summary(read_file(dir / "summary.csv"));
  std::getline(summary, line);
  std::vector<AggregateRow> written;
  while (std::getline(summary, line)) {
    const auto f = split_line(line);
    if (f.size() != 6) throw NumericalError("malformed summary row '" + line + "'");
    written.push_back({f[0], static_cast<std::size_t>(std::stoull(f[1])), parse_number(f[2]),
                       parse_number(f[3]), parse_number(f[4]), parse_number(f[5])});
  }
  check_consistency(mode, rows, written);
}

double json_number(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

void verify_json(Mode mode, const std::filesystem::path& dir) {
  const json doc = json::parse(read_file(dir / "metrics.json"));
  std::vector<std::vector<double>> rows;
  for (const auto& r : doc.at("rows")) {
    std::vector<double> row;
    for (const auto& v : r) row.push_back(json_number(v));
    rows.push_back(std::move(row));
  }
  std::vector<AggregateRow> written;
  for (const auto& s : doc.at("summary")) {
    written.push_back({s.at("column").get<std::string>(), s.at("n").get<std::size_t>(),
                       json_number(s.at("mean")), json_number(s.at("median")),
                       json_number(s.at("ci95_low")), json_number(s.at("ci95_high"))});
  }
  check_consistency(mode, rows, written);
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::simulate:
      return "simulate";
    case Mode::localize:
      return "localize";
    case Mode::plan:
      return "plan";
    case Mode::multiagent:
      return "multiagent";
  }
  return "?";
}

const std::vector<std::string>& metrics_header(Mode mode) {
  static const std::vector<std::string> kSimulate = {
      "episode", "steps", "mean_level_left", "mean_level_right", "itd_valid_fraction"};
  static const std::vector<std::string> kLocalize = {"episode", "steps", "final_error",
                                                     "entropy_final", "return"};
  static const std::vector<std::string> kPlan = {"episode", "steps", "return", "success"};
  static const std::vector<std::string> kMultiagent = {
      "episode", "steps",  "n_true",     "n_detected",
      "precision", "recall", "mean_delay", "presence_final"};
  switch (mode) {
    case Mode::simulate:
      return kSimulate;
    case Mode::localize:
      return kLocalize;
    case Mode::plan:
      return kPlan;
    case Mode::multiagent:
      return kMultiagent;
  }
  return kSimulate;
}

std::uint64_t resolve_seed(const ScenarioConfig& config, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (config.run.seed) return *config.run.seed;
  if (const char* env = std::getenv("AUDITIONLAB_SEED")) {
    const std::string text = env;
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
      value = std::stoull(text, &used, 10);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
      throw ConfigError("AUDITIONLAB_SEED = '" + text + "' is not an unsigned 64-bit integer");
    }
    return value;
  }
  return 1;
}

RunResult run_experiment(const ScenarioConfig& config, Mode mode, std::uint64_t seed) {
  RunResult result;
  result.mode = mode;
  result.seed = seed;
  if (mode == Mode::localize && !config.world.params.bounds) {
    throw ConfigError("localize needs world.bounds (filter.type '" + to_string(config.filter.type) +
                      "' covers them)");
  }
  const Prepared prep = prepare(config, mode, seed, result.notes);

  const std::size_t n = config.run.episodes;
  result.episodes.resize(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        result.episodes[i] = run_one(config, mode, prep, seed, i);
      } catch (const std::exception& e) {
        EpisodeResult failed;
        failed.episode = i;
        failed.error = e.what();
        result.episodes[i] = std::move(failed);
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(config.run.jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : result.episodes) {
    if (e.error) ++result.n_errors;
  }
  result.summary = aggregate(mode, result.episodes);
  return result;
}

std::vector<AggregateRow> aggregate(Mode mode, const std::vector<EpisodeResult>& episodes) {
  const auto& header = metrics_header(mode);
  std::vector<AggregateRow> rows;
  for (std::size_t col = 1; col < header.size(); ++col) {
    std::vector<double> xs;
    for (const auto& e : episodes) {
      if (e.error || col >= e.metrics.size()) continue;
      if (std::isfinite(e.metrics[col])) xs.push_back(e.metrics[col]);
    }
    AggregateRow row;
    row.column = header[col];
    row.n = xs.size();
    if (xs.empty()) {
      row.mean = row.median = row.ci95_low = row.ci95_high = kNaN;
    } else {
      const Interval ci = normal_ci95(xs);
      row.mean = mean(xs);
      row.median = median(xs);
      row.ci95_low = ci.low;
      row.ci95_high = ci.high;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string metrics_csv(const RunResult& result) {
  std::string out = join_header(metrics_header(result.mode)) + "\n";
  for (const auto& e : result.episodes) {
    if (e.error) continue;
    for (std::size_t i = 0; i < e.metrics.size(); ++i) {
      out += (i ? "," : "") + format_double(e.metrics[i]);
    }
    out += "\n";
  }
  return out;
}

std::string summary_csv(const RunResult& result) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : result.summary) {
    out += r.column + "," + std::to_string(r.n) + "," + format_double(r.mean) + "," +
           format_double(r.median) + "," + format_double(r.ci95_low) + "," +
           format_double(r.ci95_high) + "\n";
  }
  return out;
}

std::string steps_csv(const RunResult& result) {
  std::string out = std::string(kStepHeader) + "\n";
  for (const auto& e : result.episodes) {
    for (const auto& s : e.steps) {
      out += std::to_string(e.episode) + "," + std::to_string(s.time_step) + "," +
             csv_field(s.action) + "," + csv_field(s.observation) + "," + csv_field(s.belief_mean) +
             "," + csv_field(s.belief_mode) + "," + format_double(s.entropy) + "," +
             format_double(s.reward) + "\n";
    }
  }
  return out;
}

json metrics_json(const RunResult& result) {
  json rows = json::array();
  json errors = json::array();
  for (const auto& e : result.episodes) {
    if (e.error) {
      errors.push_back({{"episode", e.episode}, {"error", *e.error}});
      continue;
    }
    json row = json::array();
    for (double x : e.metrics) row.push_back(number_json(x));
    rows.push_back(row);
  }
  json summary = json::array();
  for (const auto& r : result.summary) {
    summary.push_back({{"column", r.column},
                       {"n", r.n},
                       {"mean", number_json(r.mean)},
                       {"median", number_json(r.median)},
                       {"ci95_low", number_json(r.ci95_low)},
                       {"ci95_high", number_json(r.ci95_high)}});
  }
  return {{"mode", to_string(result.mode)},
          {"seed", result.seed},
          {"columns", metrics_header(result.mode)},
          {"rows", rows},
          {"summary", summary},
          {"errors", errors},
          {"notes", result.notes}};
}

json steps_json(const RunResult& result) {
  json episodes = json::array();
  for (const auto& e : result.episodes) {
    json steps = json::array();
    for (const auto& s : e.steps) {
      steps.push_back({{"time_step", s.time_step},
                       {"action", s.action},
                       {"observation", s.observation},
                       {"belief_mean", s.belief_mean},
                       {"belief_mode", s.belief_mode},
                       {"entropy", number_json(s.entropy)},
                       {"reward", number_json(s.reward)}});
    }
    json entry = {{"episode", e.episode}, {"steps", steps}, {"notes", e.notes}};
    if (e.error) entry["error"] = *e.error;
    episodes.push_back(entry);
  }
  return episodes;
}

void write_outputs(const RunResult& result, const ScenarioConfig& config,
                   const std::filesystem::path& dir, OutputFormat format) {
  std::filesystem::create_directories(dir);
  write_file(dir / "scenario.json", to_json(config).dump(2) + "\n");
  if (format == OutputFormat::csv) {
    write_file(dir / "metrics.csv", metrics_csv(result));
    write_file(dir / "summary.csv", summary_csv(result));
    write_file(dir / "episodes.csv", steps_csv(result));
    std::string errors;
    std::string notes;
    for (const auto& n : result.notes) notes += "run," + csv_field(n) + "\n";
    for (const auto& e : result.episodes) {
      if (e.error) errors += std::to_string(e.episode) + "," + csv_field(*e.error) + "\n";
      for (const auto& n : e.notes) notes += std::to_string(e.episode) + "," + csv_field(n) + "\n";
    }
    if (!errors.empty()) write_file(dir / "errors.csv", "episode,error\n" + errors);
    if (!notes.empty()) write_file(dir / "notes.csv", "episode,note\n" + notes);
    verify_csv(result.mode, dir);
  } else {
    write_file(dir / "metrics.json", metrics_json(result).dump(2) + "\n");
    write_file(dir / "episodes.json", steps_json(result).dump(2) + "\n");
    verify_json(result.mode, dir);
  }
}

bool run_failed(const RunResult& result) {
  return result.n_errors * 100 > result.episodes.size();
}

}  // namespace auditionlab
