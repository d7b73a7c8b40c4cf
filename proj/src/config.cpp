#include "auditionlab/config.hpp"

#include "auditionlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace auditionlab {

using nlohmann::json;

namespace {

constexpr double kDegToRad = kPi / 180.0;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

void check_keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + join(path, item.key()) + "' (did you mean '" +
                        nearest_key(item.key(), allowed) + "'?)");
    }
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

double number(const json& obj, const std::string& path, const char* key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(join(path, key) + ": expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError(join(path, key) + ": must be finite");
  return x;
}

std::int64_t integer(const json& obj, const std::string& path, const char* key,
                     std::int64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(join(path, key) + ": expected an integer");
  return v->get<std::int64_t>();
}

std::size_t count(const json& obj, const std::string& path, const char* key, std::size_t fallback) {
  const std::int64_t v = integer(obj, path, key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError(join(path, key) + " = " + std::to_string(v) + " must be >= 0");
  return static_cast<std::size_t>(v);
}

bool boolean(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(path, key) + ": expected true or false");
  return v->get<bool>();
}

std::string string(const json& obj, const std::string& path, const char* key,
                   const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(join(path, key) + ": expected a string");
  return v->get<std::string>();
}

Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ConfigError(where + ": expected [x, y, z]");
    out[i] = v[i].get<double>();
  }
  if (!out.allFinite()) throw ConfigError(where + ": must be finite");
  return out;
}

std::optional<Vec3> optional_vec3(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (!v) return std::nullopt;
  return vec3(*v, join(path, key));
}

void require(bool ok, const std::string& key, double value, const std::string& invariant) {
  if (!ok) {
    throw ConfigError(key + " = " + format_number(value) + " violates the invariant " + invariant);
  }
}

template <typename Enum>
Enum parse_enum(const json& obj, const std::string& path, const char* key, Enum fallback,
                const std::vector<std::pair<std::string, Enum>>& names) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(join(path, key) + ": expected a string");
  const std::string s = v->get<std::string>();
  std::vector<std::string> valid;
  for (const auto& [name, value] : names) {
    if (name == s) return value;
    valid.push_back(name);
  }
  throw ConfigError(join(path, key) + ": unknown value '" + s + "' (did you mean '" +
                    nearest_key(s, valid) + "'?)");
}

const std::vector<std::pair<std::string, Trajectory>> kTrajectories = {
    {"static", Trajectory::stationary}, {"circle", Trajectory::circle},
    {"random_walk", Trajectory::random_walk}, {"rotate", Trajectory::rotate},
    {"yaw", Trajectory::yaw}};
const std::vector<std::pair<std::string, FilterType>> kFilters = {
    {"grid", FilterType::grid}, {"ekf", FilterType::ekf}, {"pf", FilterType::pf}};
const std::vector<std::pair<std::string, Problem>> kProblems = {
    {"tiger", Problem::tiger},
    {"find_the_phone", Problem::find_the_phone},
    {"continuous_search", Problem::continuous_search}};
const std::vector<std::pair<std::string, Solver>> kSolvers = {
    {"vi+qmdp", Solver::vi_qmdp},   {"info_gain", Solver::info_gain},
    {"hybrid", Solver::hybrid},     {"gradient_follow", Solver::gradient_follow},
    {"random", Solver::random}};
const std::vector<std::pair<std::string, SourceKind>> kSourceKinds = {
    {"continuous", SourceKind::continuous}, {"impulsive", SourceKind::impulsive}};

template <typename Enum>
std::string name_of(Enum value, const std::vector<std::pair<std::string, Enum>>& names) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void parse_world(const json& obj, ScenarioConfig& config) {
  const std::string p = "world";
  check_keys(obj, p,
             {"dt", "sigma_translate", "sigma_rotate", "max_translate", "max_rotate", "bounds",
              "planar", "source_level_db", "source_position", "min_source_distance",
              "agent_start", "agent_yaw_deg", "trajectory", "trajectory_radius",
              "trajectory_points", "step_length", "rotation_step_deg"});
  WorldConfig& w = config.world;
  WorldParams& params = w.params;
  params.dt = number(obj, p, "dt", params.dt);
  params.noise.sigma_translate = number(obj, p, "sigma_translate", params.noise.sigma_translate);
  params.noise.sigma_rotate = number(obj, p, "sigma_rotate", params.noise.sigma_rotate);
  params.max_translate = number(obj, p, "max_translate", params.max_translate);
  params.max_rotate = number(obj, p, "max_rotate", params.max_rotate);
  if (const json* b = find(obj, "bounds")) {
    check_keys(*b, "world.bounds", {"min", "max"});
    if (!find(*b, "min") || !find(*b, "max")) {
      throw ConfigError("world.bounds: needs both min and max");
    }
    params.bounds = Bounds{vec3((*b)["min"], "world.bounds.min"), vec3((*b)["max"], "world.bounds.max")};
  }
  w.planar = boolean(obj, p, "planar", w.planar);
  w.source_level_db = number(obj, p, "source_level_db", w.source_level_db);
  w.source_position = optional_vec3(obj, p, "source_position");
  w.min_source_distance = number(obj, p, "min_source_distance", w.min_source_distance);
  if (auto start = optional_vec3(obj, p, "agent_start")) w.agent_start = *start;
  w.agent_yaw_deg = number(obj, p, "agent_yaw_deg", w.agent_yaw_deg);
  w.trajectory = parse_enum(obj, p, "trajectory", w.trajectory, kTrajectories);
  w.trajectory_radius = number(obj, p, "trajectory_radius", w.trajectory_radius);
  w.trajectory_points = static_cast<int>(integer(obj, p, "trajectory_points", w.trajectory_points));
  w.step_length = number(obj, p, "step_length", w.step_length);
  w.rotation_step_deg = number(obj, p, "rotation_step_deg", w.rotation_step_deg);
}

void validate_world(const WorldConfig& w) {
  const WorldParams& params = w.params;
  require(params.dt > 0, "world.dt", params.dt, "dt > 0");
  require(params.noise.sigma_translate >= 0, "world.sigma_translate", params.noise.sigma_translate,
          "sigma_translate >= 0");
  require(params.noise.sigma_rotate >= 0, "world.sigma_rotate", params.noise.sigma_rotate,
          "sigma_rotate >= 0");
  require(params.max_translate > 0, "world.max_translate", params.max_translate, "max_translate > 0");
  require(params.max_rotate > 0, "world.max_rotate", params.max_rotate, "max_rotate > 0");
  if (params.bounds) {
    for (int axis = 0; axis < 3; ++axis) {
      if (params.bounds->hi[axis] < params.bounds->lo[axis]) {
        throw ConfigError("world.bounds: min must be <= max on every axis");
      }
    }
    if (w.planar && params.bounds->hi.z() != params.bounds->lo.z()) {
      throw ConfigError("world.bounds: a planar world needs min.z == max.z");
    }
    if (w.source_position && !params.bounds->contains(*w.source_position)) {
      throw ConfigError("world.source_position lies outside world.bounds");
    }
  }
  require(w.min_source_distance >= 0, "world.min_source_distance", w.min_source_distance,
          "min_source_distance >= 0");
  require(w.trajectory_radius > 0, "world.trajectory_radius", w.trajectory_radius,
          "trajectory_radius > 0");
  require(w.trajectory_points >= 3, "world.trajectory_points", w.trajectory_points,
          "trajectory_points >= 3");
  require(w.step_length > 0, "world.step_length", w.step_length, "step_length > 0");
  require(w.rotation_step_deg >= 0, "world.rotation_step_deg", w.rotation_step_deg,
          "rotation_step_deg >= 0");
}

void parse_sensor(const json& obj, SensorModel& s) {
  const std::string p = "sensor";
  check_keys(obj, p,
             {"d", "c", "r_ref", "r_min", "noise_floor_db", "sigma_level_db", "sigma_itd_s",
              "snr_gate_db"});
  s.d = number(obj, p, "d", s.d);
  s.c = number(obj, p, "c", s.c);
  s.r_ref = number(obj, p, "r_ref", s.r_ref);
  s.r_min = number(obj, p, "r_min", s.r_min);
  s.noise_floor_db = number(obj, p, "noise_floor_db", s.noise_floor_db);
  s.sigma_level_db = number(obj, p, "sigma_level_db", s.sigma_level_db);
  s.sigma_itd_s = number(obj, p, "sigma_itd_s", s.sigma_itd_s);
  s.snr_gate_db = number(obj, p, "snr_gate_db", s.snr_gate_db);
}

void validate_sensor(const SensorModel& s) {
  require(s.d > 0, "sensor.d", s.d, "d > 0");
  require(s.c > 0, "sensor.c", s.c, "c > 0");
  require(s.r_ref > 0, "sensor.r_ref", s.r_ref, "r_ref > 0");
  require(s.r_min > 0, "sensor.r_min", s.r_min, "r_min > 0");
  require(s.sigma_level_db >= 0, "sensor.sigma_level_db", s.sigma_level_db, "sigma_level_db >= 0");
  require(s.sigma_itd_s >= 0, "sensor.sigma_itd_s", s.sigma_itd_s, "sigma_itd_s >= 0");
}

void parse_filter(const json& obj, FilterConfig& f) {
  const std::string p = "filter";
  check_keys(obj, p,
             {"type", "resolution", "n_particles", "jitter", "process_sigma", "use_left",
              "use_right", "use_itd", "ekf_prior_sigma"});
  f.type = parse_enum(obj, p, "type", f.type, kFilters);
  f.resolution = number(obj, p, "resolution", f.resolution);
  f.n_particles = count(obj, p, "n_particles", f.n_particles);
  f.jitter = number(obj, p, "jitter", f.jitter);
  f.process_sigma = number(obj, p, "process_sigma", f.process_sigma);
  f.use.left = boolean(obj, p, "use_left", f.use.left);
  f.use.right = boolean(obj, p, "use_right", f.use.right);
  f.use.itd = boolean(obj, p, "use_itd", f.use.itd);
  if (find(obj, "ekf_prior_sigma")) f.ekf_prior_sigma = number(obj, p, "ekf_prior_sigma", 0.0);
}

void validate_filter(const FilterConfig& f) {
  require(f.resolution > 0, "filter.resolution", f.resolution, "resolution > 0");
  require(f.n_particles >= 1, "filter.n_particles", static_cast<double>(f.n_particles),
          "n_particles >= 1");
  require(f.jitter >= 0, "filter.jitter", f.jitter, "jitter >= 0");
  require(f.process_sigma >= 0, "filter.process_sigma", f.process_sigma, "process_sigma >= 0");
  if (!f.use.left && !f.use.right && !f.use.itd) {
    throw ConfigError("filter: at least one of use_left, use_right, use_itd must be true");
  }
  if (f.ekf_prior_sigma) {
    require(*f.ekf_prior_sigma > 0, "filter.ekf_prior_sigma", *f.ekf_prior_sigma,
            "ekf_prior_sigma > 0");
  }
}

void parse_planner(const json& obj, PlannerConfig& pl) {
  const std::string p = "planner";
  check_keys(obj, p,
             {"problem", "solver", "gamma", "tol", "max_iters", "rewards", "bins", "horizon",
              "grid_size", "cell_size", "max_transition_entries", "listen_accuracy", "step_size",
              "turn_angle_deg", "epsilon_db", "capture_radius", "min_start_distance"});
  pl.problem = parse_enum(obj, p, "problem", pl.problem, kProblems);
  pl.solver = parse_enum(obj, p, "solver", pl.solver, kSolvers);
  pl.gamma = number(obj, p, "gamma", pl.gamma);
  pl.tol = number(obj, p, "tol", pl.tol);
  pl.max_iters = count(obj, p, "max_iters", pl.max_iters);
  if (pl.problem == Problem::tiger) pl.rewards = {-1.0, 10.0, -100.0};
  if (const json* r = find(obj, "rewards")) {
    check_keys(*r, "planner.rewards", {"step", "correct", "wrong"});
    pl.rewards.step = number(*r, "planner.rewards", "step", pl.rewards.step);
    pl.rewards.correct = number(*r, "planner.rewards", "correct", pl.rewards.correct);
    pl.rewards.wrong = number(*r, "planner.rewards", "wrong", pl.rewards.wrong);
  }
  pl.bins = count(obj, p, "bins", pl.bins);
  if (find(obj, "horizon")) pl.horizon = count(obj, p, "horizon", 0);
  pl.grid_size = count(obj, p, "grid_size", pl.grid_size);
  pl.cell_size = number(obj, p, "cell_size", pl.cell_size);
  pl.max_transition_entries = count(obj, p, "max_transition_entries", pl.max_transition_entries);
  pl.listen_accuracy = number(obj, p, "listen_accuracy", pl.listen_accuracy);
  pl.step_size = number(obj, p, "step_size", pl.step_size);
  pl.turn_angle_deg = number(obj, p, "turn_angle_deg", pl.turn_angle_deg);
  pl.epsilon_db = number(obj, p, "epsilon_db", pl.epsilon_db);
  pl.capture_radius = number(obj, p, "capture_radius", pl.capture_radius);
  pl.min_start_distance = number(obj, p, "min_start_distance", pl.min_start_distance);
}

void validate_planner(const PlannerConfig& pl) {
  require(pl.gamma >= 0 && pl.gamma < 1, "planner.gamma", pl.gamma, "0 <= gamma < 1");
  require(pl.tol > 0, "planner.tol", pl.tol, "tol > 0");
  require(pl.max_iters >= 1, "planner.max_iters", static_cast<double>(pl.max_iters), "max_iters >= 1");
  require(pl.bins >= 1, "planner.bins", static_cast<double>(pl.bins), "bins >= 1");
  if (pl.horizon) {
    require(*pl.horizon >= 1, "planner.horizon", static_cast<double>(*pl.horizon), "horizon >= 1");
  }
  require(pl.grid_size >= 2, "planner.grid_size", static_cast<double>(pl.grid_size), "grid_size >= 2");
  require(pl.cell_size > 0, "planner.cell_size", pl.cell_size, "cell_size > 0");
  require(pl.listen_accuracy >= 0 && pl.listen_accuracy <= 1, "planner.listen_accuracy",
          pl.listen_accuracy, "0 <= listen_accuracy <= 1");
  require(pl.step_size > 0, "planner.step_size", pl.step_size, "step_size > 0");
  require(pl.epsilon_db >= 0, "planner.epsilon_db", pl.epsilon_db, "epsilon_db >= 0");
  require(pl.capture_radius > 0, "planner.capture_radius", pl.capture_radius, "capture_radius > 0");
  require(pl.min_start_distance >= 0, "planner.min_start_distance", pl.min_start_distance,
          "min_start_distance >= 0");
  const bool discrete = pl.problem != Problem::continuous_search;
  if (discrete && pl.solver == Solver::gradient_follow) {
    throw ConfigError("planner.solver 'gradient_follow' requires planner.problem 'continuous_search'");
  }
  if (!discrete && pl.solver != Solver::gradient_follow && pl.solver != Solver::random) {
    throw ConfigError(
        "planner.problem 'continuous_search' supports solvers 'gradient_follow' and 'random'");
  }
}

EmissionTemplate parse_emission(const json& obj, const std::string& p, EmissionTemplate e) {
  check_keys(obj, p, {"level_db", "duration", "kind"});
  e.level_ref = number(obj, p, "level_db", e.level_ref);
  e.duration = integer(obj, p, "duration", e.duration);
  e.kind = parse_enum(obj, p, "kind", e.kind, kSourceKinds);
  if (e.duration < 1) {
    throw ConfigError(join(p, "duration") + " = " + std::to_string(e.duration) +
                      " violates the invariant duration >= 1");
  }
  return e;
}

json emission_json(const EmissionTemplate& e) {
  return {{"level_db", e.level_ref}, {"duration", e.duration}, {"kind", name_of(e.kind, kSourceKinds)}};
}

OtherAgent parse_agent(const json& obj, const std::string& p) {
  check_keys(obj, p,
             {"id", "position", "arrival", "departure", "policy", "step_sigma", "act_probability",
              "path", "emissions"});
  OtherAgent agent;
  agent.id = static_cast<int>(integer(obj, p, "id", 0));
  if (auto pos = optional_vec3(obj, p, "position")) agent.pose.position = *pos;
  agent.arrival_step = integer(obj, p, "arrival", 0);
  if (find(obj, "departure")) agent.departure_step = integer(obj, p, "departure", 0);
  const std::string policy = string(obj, p, "policy", "scripted");
  if (policy == "scripted") {
    ScriptedPolicy script;
    if (const json* acts = find(obj, "path")) {
      if (!acts->is_array()) throw ConfigError(join(p, "path") + ": expected a list");
      for (std::size_t i = 0; i < acts->size(); ++i) {
        const std::string ap = join(p, "path[" + std::to_string(i) + "]");
        const json& a = (*acts)[i];
        check_keys(a, ap, {"step", "kind", "delta"});
        ScriptedAct act;
        act.step = integer(a, ap, "step", 0);
        act.kind = string(a, ap, "kind", "");
        if (auto delta = optional_vec3(a, ap, "delta")) act.delta = *delta;
        script.acts.push_back(act);
      }
    }
    agent.policy = script;
  } else if (policy == "random_walk") {
    RandomWalkPolicy walk;
    walk.step_sigma = number(obj, p, "step_sigma", 0.0);
    walk.act_probability = number(obj, p, "act_probability", 0.0);
    if (walk.step_sigma < 0 || walk.act_probability < 0 || walk.act_probability > 1) {
      throw ConfigError(p + ": random_walk needs step_sigma >= 0 and act_probability in [0, 1]");
    }
    agent.policy = walk;
  } else {
    throw ConfigError(join(p, "policy") + ": unknown value '" + policy + "' (did you mean '" +
                      nearest_key(policy, {"scripted", "random_walk"}) + "'?)");
  }
  if (const json* emissions = find(obj, "emissions")) {
    if (!emissions->is_object()) throw ConfigError(join(p, "emissions") + ": expected an object");
    for (const auto& item : emissions->items()) {
      agent.emissions[item.key()] =
          parse_emission(item.value(), join(join(p, "emissions"), item.key()), EmissionTemplate{});
    }
  }
  if (const auto* script = std::get_if<ScriptedPolicy>(&agent.policy)) {
    for (const auto& act : script->acts) {
      if (agent.emissions.count(act.kind) == 0) {
        throw ConfigError(p + ": scripted act '" + act.kind + "' has no matching emission");
      }
    }
  }
  try {
    agent.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(p + ": " + e.what());
  }
  return agent;
}

json agent_json(const OtherAgent& agent) {
  json out = {{"id", agent.id},
              {"position", vec_json(agent.pose.position)},
              {"arrival", agent.arrival_step}};
  if (agent.departure_step) out["departure"] = *agent.departure_step;
  if (const auto* script = std::get_if<ScriptedPolicy>(&agent.policy)) {
    out["policy"] = "scripted";
    json acts = json::array();
    for (const auto& act : script->acts) {
      acts.push_back({{"step", act.step}, {"kind", act.kind}, {"delta", vec_json(act.delta)}});
    }
    out["path"] = acts;
  } else {
    const auto& walk = std::get<RandomWalkPolicy>(agent.policy);
    out["policy"] = "random_walk";
    out["step_sigma"] = walk.step_sigma;
    out["act_probability"] = walk.act_probability;
  }
  json emissions = json::object();
  for (const auto& [kind, e] : agent.emissions) emissions[kind] = emission_json(e);
  out["emissions"] = emissions;
  return out;
}

void parse_multiagent(const json& obj, MultiagentConfig& m) {
  const std::string p = "multiagent";
  check_keys(obj, p,
             {"agents", "lambda_arrival", "departure_probability", "arrival_emission",
              "arrival_walk_sigma", "detector", "hazard", "tpr", "fpr", "tolerance"});
  if (const json* agents = find(obj, "agents")) {
    if (!agents->is_array()) throw ConfigError("multiagent.agents: expected a list");
    for (std::size_t i = 0; i < agents->size(); ++i) {
      m.agents.push_back(parse_agent((*agents)[i], "multiagent.agents[" + std::to_string(i) + "]"));
    }
  }
  m.lambda_arrival = number(obj, p, "lambda_arrival", m.lambda_arrival);
  m.departure_probability = number(obj, p, "departure_probability", m.departure_probability);
  if (const json* e = find(obj, "arrival_emission")) {
    m.arrival_emission = parse_emission(*e, "multiagent.arrival_emission", m.arrival_emission);
  }
  m.arrival_walk_sigma = number(obj, p, "arrival_walk_sigma", m.arrival_walk_sigma);
  if (const json* d = find(obj, "detector")) {
    check_keys(*d, "multiagent.detector", {"k", "m", "alpha", "warmup"});
    m.detector.k = number(*d, "multiagent.detector", "k", m.detector.k);
    m.detector.m = static_cast<int>(integer(*d, "multiagent.detector", "m", m.detector.m));
    m.detector.alpha = number(*d, "multiagent.detector", "alpha", m.detector.alpha);
    m.detector.warmup = static_cast<int>(integer(*d, "multiagent.detector", "warmup", m.detector.warmup));
  }
  m.hazard = number(obj, p, "hazard", m.hazard);
  const bool has_tpr = find(obj, "tpr") != nullptr;
  const bool has_fpr = find(obj, "fpr") != nullptr;
  if (has_tpr != has_fpr) throw ConfigError("multiagent: tpr and fpr must be given together");
  if (has_tpr) m.rates = DetectorRates{number(obj, p, "tpr", 0.0), number(obj, p, "fpr", 0.0)};
  m.tolerance = integer(obj, p, "tolerance", m.tolerance);
}

void validate_multiagent(const MultiagentConfig& m, const WorldConfig& w) {
  require(m.lambda_arrival >= 0, "multiagent.lambda_arrival", m.lambda_arrival, "lambda_arrival >= 0");
  require(m.departure_probability >= 0 && m.departure_probability <= 1,
          "multiagent.departure_probability", m.departure_probability,
          "0 <= departure_probability <= 1");
  require(m.arrival_walk_sigma >= 0, "multiagent.arrival_walk_sigma", m.arrival_walk_sigma,
          "arrival_walk_sigma >= 0");
  require(m.detector.k > 0, "multiagent.detector.k", m.detector.k, "k > 0");
  require(m.detector.m >= 1, "multiagent.detector.m", m.detector.m, "m >= 1");
  require(m.detector.alpha > 0 && m.detector.alpha <= 1, "multiagent.detector.alpha",
          m.detector.alpha, "0 < alpha <= 1");
  require(m.detector.warmup >= 0, "multiagent.detector.warmup", m.detector.warmup, "warmup >= 0");
  require(m.hazard >= 0 && m.hazard < 1, "multiagent.hazard", m.hazard, "0 <= hazard < 1");
  if (m.rates) {
    require(m.rates->tpr >= 0 && m.rates->tpr <= 1, "multiagent.tpr", m.rates->tpr, "0 <= tpr <= 1");
    require(m.rates->fpr >= 0 && m.rates->fpr <= 1, "multiagent.fpr", m.rates->fpr, "0 <= fpr <= 1");
  }
  require(m.tolerance >= 0, "multiagent.tolerance", static_cast<double>(m.tolerance), "tolerance >= 0");
  if (m.lambda_arrival > 0 && !w.params.bounds) {
    throw ConfigError("multiagent.lambda_arrival > 0 requires world.bounds for spawning");
  }
  std::vector<int> ids;
  for (const auto& a : m.agents) ids.push_back(a.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ConfigError("multiagent.agents: ids must be unique");
  }
}

void parse_run(const json& obj, RunConfig& r) {
  const std::string p = "run";
  check_keys(obj, p, {"seed", "episodes", "horizon", "output_path", "jobs"});
  if (const json* s = find(obj, "seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
      throw ConfigError("run.seed: expected a non-negative 64-bit integer");
    }
    r.seed = s->get<std::uint64_t>();
  }
  r.episodes = count(obj, p, "episodes", r.episodes);
  r.horizon = count(obj, p, "horizon", r.horizon);
  r.output_path = string(obj, p, "output_path", r.output_path);
  r.jobs = count(obj, p, "jobs", r.jobs);
}

void validate_run(const RunConfig& r) {
  require(r.episodes >= 1, "run.episodes", static_cast<double>(r.episodes), "episodes >= 1");
  require(r.horizon >= 1, "run.horizon", static_cast<double>(r.horizon), "horizon >= 1");
  require(r.jobs >= 1, "run.jobs", static_cast<double>(r.jobs), "jobs >= 1");
}

void validate_cross(const ScenarioConfig& c) {
  const bool bounded = c.world.params.bounds.has_value();
  if (c.planner.problem == Problem::continuous_search && !bounded) {
    throw ConfigError("planner.problem 'continuous_search' requires world.bounds");
  }
  if (c.world.trajectory == Trajectory::circle) {
    const double chord = 2.0 * c.world.trajectory_radius * std::sin(kPi / c.world.trajectory_points);
    if (chord > c.world.params.max_translate + 1e-12) {
      throw ConfigError("world.trajectory 'circle' steps " + format_number(chord) +
                        " m per step, above world.max_translate");
    }
  }
  if ((c.world.trajectory == Trajectory::rotate || c.world.trajectory == Trajectory::yaw) &&
      c.world.rotation_step_deg * kDegToRad > c.world.params.max_rotate) {
    throw ConfigError("world.rotation_step_deg exceeds world.max_rotate");
  }
  if (c.world.trajectory == Trajectory::random_walk &&
      c.world.step_length > c.world.params.max_translate) {
    throw ConfigError("world.step_length exceeds world.max_translate");
  }
  if (c.planner.problem == Problem::continuous_search &&
      c.planner.step_size > c.world.params.max_translate) {
    throw ConfigError("planner.step_size exceeds world.max_translate");
  }
}

}  // namespace

std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_distance = std::numeric_limits<std::size_t>::max();
  for (const auto& candidate : candidates) {
    // Levenshtein distance, single-row DP.
    std::vector<std::size_t> row(candidate.size() + 1);
    for (std::size_t j = 0; j <= candidate.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= key.size(); ++i) {
      std::size_t diagonal = row[0];
      row[0] = i;
      for (std::size_t j = 1; j <= candidate.size(); ++j) {
        const std::size_t above = row[j];
        row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                           diagonal + (key[i - 1] == candidate[j - 1] ? 0 : 1)});
        diagonal = above;
      }
    }
    if (row.back() < best_distance) {
      best_distance = row.back();
      best = candidate;
    }
  }
  return best;
}

std::string to_string(Trajectory t) { return name_of(t, kTrajectories); }
std::string to_string(FilterType t) { return name_of(t, kFilters); }
std::string to_string(Problem p) { return name_of(p, kProblems); }
std::string to_string(Solver s) { return name_of(s, kSolvers); }

ScenarioConfig parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario ") + e.what());
  }
  check_keys(root, "", {"world", "sensor", "filter", "planner", "multiagent", "run"});

  ScenarioConfig config;
  if (const json* w = find(root, "world")) parse_world(*w, config);
  if (const json* s = find(root, "sensor")) parse_sensor(*s, config.sensor);
  if (const json* f = find(root, "filter")) parse_filter(*f, config.filter);
  if (const json* p = find(root, "planner")) {
    parse_planner(*p, config.planner);
  }
  if (const json* m = find(root, "multiagent")) {
    config.multiagent.emplace();
    parse_multiagent(*m, *config.multiagent);
  }
  if (const json* r = find(root, "run")) parse_run(*r, config.run);

  validate_world(config.world);
  validate_sensor(config.sensor);
  validate_filter(config.filter);
  validate_planner(config.planner);
  if (config.multiagent) validate_multiagent(*config.multiagent, config.world);
  validate_run(config.run);
  validate_cross(config);
  return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

nlohmann::json to_json(const ScenarioConfig& c) {
  json world = {{"dt", c.world.params.dt},
                {"sigma_translate", c.world.params.noise.sigma_translate},
                {"sigma_rotate", c.world.params.noise.sigma_rotate},
                {"max_translate", c.world.params.max_translate},
                {"max_rotate", c.world.params.max_rotate},
                {"planar", c.world.planar},
                {"source_level_db", c.world.source_level_db},
                {"min_source_distance", c.world.min_source_distance},
                {"agent_start", vec_json(c.world.agent_start)},
                {"agent_yaw_deg", c.world.agent_yaw_deg},
                {"trajectory", to_string(c.world.trajectory)},
                {"trajectory_radius", c.world.trajectory_radius},
                {"trajectory_points", c.world.trajectory_points},
                {"step_length", c.world.step_length},
                {"rotation_step_deg", c.world.rotation_step_deg}};
  if (c.world.params.bounds) {
    world["bounds"] = {{"min", vec_json(c.world.params.bounds->lo)},
                       {"max", vec_json(c.world.params.bounds->hi)}};
  }
  if (c.world.source_position) world["source_position"] = vec_json(*c.world.source_position);

  const SensorModel& s = c.sensor;
  json sensor = {{"d", s.d},
                 {"c", s.c},
                 {"r_ref", s.r_ref},
                 {"r_min", s.r_min},
                 {"noise_floor_db", s.noise_floor_db},
                 {"sigma_level_db", s.sigma_level_db},
                 {"sigma_itd_s", s.sigma_itd_s},
                 {"snr_gate_db", s.snr_gate_db}};

  json filter = {{"type", to_string(c.filter.type)},
                 {"resolution", c.filter.resolution},
                 {"n_particles", c.filter.n_particles},
                 {"jitter", c.filter.jitter},
                 {"process_sigma", c.filter.process_sigma},
                 {"use_left", c.filter.use.left},
                 {"use_right", c.filter.use.right},
                 {"use_itd", c.filter.use.itd}};
  if (c.filter.ekf_prior_sigma) filter["ekf_prior_sigma"] = *c.filter.ekf_prior_sigma;

  const PlannerConfig& pl = c.planner;
  json planner = {{"problem", to_string(pl.problem)},
                  {"solver", to_string(pl.solver)},
                  {"gamma", pl.gamma},
                  {"tol", pl.tol},
                  {"max_iters", pl.max_iters},
                  {"rewards",
                   {{"step", pl.rewards.step},
                    {"correct", pl.rewards.correct},
                    {"wrong", pl.rewards.wrong}}},
                  {"bins", pl.bins},
                  {"grid_size", pl.grid_size},
                  {"cell_size", pl.cell_size},
                  {"max_transition_entries", pl.max_transition_entries},
                  {"listen_accuracy", pl.listen_accuracy},
                  {"step_size", pl.step_size},
                  {"turn_angle_deg", pl.turn_angle_deg},
                  {"epsilon_db", pl.epsilon_db},
                  {"capture_radius", pl.capture_radius},
                  {"min_start_distance", pl.min_start_distance}};
  if (pl.horizon) planner["horizon"] = *pl.horizon;

  json run = {{"episodes", c.run.episodes},
              {"horizon", c.run.horizon},
              {"output_path", c.run.output_path},
              {"jobs", c.run.jobs}};
  if (c.run.seed) run["seed"] = *c.run.seed;

  json out = {{"world", world}, {"sensor", sensor}, {"filter", filter}, {"planner", planner},
              {"run", run}};
  if (c.multiagent) {
    const MultiagentConfig& m = *c.multiagent;
    json agents = json::array();
    for (const auto& a : m.agents) agents.push_back(agent_json(a));
    json multi = {{"agents", agents},
                  {"lambda_arrival", m.lambda_arrival},
                  {"departure_probability", m.departure_probability},
                  {"arrival_emission", emission_json(m.arrival_emission)},
                  {"arrival_walk_sigma", m.arrival_walk_sigma},
                  {"detector",
                   {{"k", m.detector.k},
                    {"m", m.detector.m},
                    {"alpha", m.detector.alpha},
                    {"warmup", m.detector.warmup}}},
                  {"hazard", m.hazard},
                  {"tolerance", m.tolerance}};
    if (m.rates) {
      multi["tpr"] = m.rates->tpr;
      multi["fpr"] = m.rates->fpr;
    }
    out["multiagent"] = multi;
  }
  return out;
}

}  // namespace auditionlab
