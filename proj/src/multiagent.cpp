#include "auditionlab/multiagent.hpp"

#include "auditionlab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace auditionlab {

void MultiagentParams::validate() const {
  if (!(lambda_arrival >= 0.0) || !std::isfinite(lambda_arrival)) {
    throw ValidationError("multiagent.lambda_arrival must be >= 0");
  }
  if (!(departure_probability >= 0.0 && departure_probability <= 1.0)) {
    throw ValidationError("multiagent.departure_probability must be in [0, 1]");
  }
  if (lambda_arrival > 0.0 && !spawn_bounds) {
    throw ValidationError("Poisson arrivals need spawn bounds");
  }
  for (const auto& [kind, emission] : arrival_template.emissions) {
    if (!std::isfinite(emission.level_ref) || emission.duration < 1) {
      throw ValidationError("arrival template emission '" + kind + "' is invalid");
    }
  }
}

namespace {

void emit(WorldState& world, const OtherAgent& agent, const std::string& kind,
          std::int64_t onset, std::vector<EmissionRecord>& log) {
  const auto it = agent.emissions.find(kind);
  if (it == agent.emissions.end()) {
    throw ValidationError("agent " + std::to_string(agent.id) + " has no emission for act '" +
                          kind + "'");
  }
  SoundSource source;
  source.id = world.next_source_id++;
  source.position = agent.pose.position;
  source.level_ref = it->second.level_ref;
  source.schedule = {{onset, onset + it->second.duration}};
  source.kind = it->second.kind;
  source.emitter = agent.id;
  world.sources.push_back(source);
  log.push_back({agent.id, source.id, onset, it->second.duration, kind});
}

}  // namespace

MultiStepResult multi_step(const WorldState& world, const Action& primary_action,
                           const WorldParams& world_params, const MultiagentParams& params,
                           RandomStream& rng) {
  MultiStepResult result;
  WorldState next = world;
  const std::int64_t now = world.time_step + 1;

  for (auto& agent : next.other_agents) {
    if (agent.spawned && agent.present_at(world.time_step) && !agent.departure_step &&
        params.departure_probability > 0.0 && rng.bernoulli(params.departure_probability)) {
      agent.departure_step = now;
    }
    if (agent.departure_step && *agent.departure_step == now) result.departures.push_back(agent.id);
    if (!agent.spawned && agent.arrival_step == now) result.arrivals.push_back(agent.id);
  }

  const std::size_t existing = next.other_agents.size();
  if (params.lambda_arrival > 0.0) {
    const std::uint64_t count = rng.poisson(params.lambda_arrival);
    for (std::uint64_t i = 0; i < count; ++i) {
      OtherAgent agent = params.arrival_template;
      agent.id = next.next_agent_id++;
      agent.spawned = true;
      agent.arrival_step = now;
      agent.departure_step.reset();
      const Bounds& box = *params.spawn_bounds;
      for (int axis = 0; axis < 3; ++axis) {
        agent.pose.position[axis] = rng.uniform(box.lo[axis], box.hi[axis]);
      }
      if (agent.emissions.count("arrive") != 0) emit(next, agent, "arrive", now, result.emissions);
      result.arrivals.push_back(agent.id);
      next.other_agents.push_back(std::move(agent));
    }
  }

  for (std::size_t i = 0; i < existing; ++i) {
    OtherAgent& agent = next.other_agents[i];
    if (!agent.present_at(now)) continue;
    if (const auto* script = std::get_if<ScriptedPolicy>(&agent.policy)) {
      for (const auto& act : script->acts) {
        if (act.step != now) continue;
        agent.pose.position += act.delta;
        emit(next, agent, act.kind, now, result.emissions);
      }
    } else if (const auto* walk = std::get_if<RandomWalkPolicy>(&agent.policy)) {
      if (walk->step_sigma > 0.0) {
        agent.pose.position.x() += rng.normal(0.0, walk->step_sigma);
        agent.pose.position.y() += rng.normal(0.0, walk->step_sigma);
        if (params.spawn_bounds) agent.pose.position = params.spawn_bounds->clamp(agent.pose.position);
      }
      if (walk->act_probability > 0.0 && rng.bernoulli(walk->act_probability)) {
        std::vector<const std::string*> kinds;
        for (const auto& [kind, emission] : agent.emissions) {
          if (kind != "arrive") kinds.push_back(&kind);
        }
        if (!kinds.empty()) {
          emit(next, agent, *kinds[rng.index(kinds.size())], now, result.emissions);
        }
      }
    }
  }

  std::erase_if(next.other_agents, [now](const OtherAgent& agent) {
    return agent.spawned && agent.departure_step && *agent.departure_step <= now;
  });
  std::erase_if(next.sources, [now](const SoundSource& source) {
    return source.emitter.has_value() && source.expired_at(now);
  });

  result.state = step(next, primary_action, world_params, rng);
  return result;
}

int DetectorParams::effective_warmup() const {
  return warmup > 0 ? warmup : static_cast<int>(std::ceil(2.0 / alpha));
}

void DetectorParams::validate() const {
  if (!(k > 0.0)) throw ValidationError("detector k must be > 0");
  if (m < 1) throw ValidationError("detector m must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("detector alpha must be in (0, 1]");
  if (warmup < 0) throw ValidationError("detector warmup must be >= 0");
}

OnsetDetector::OnsetDetector(DetectorParams params) : params_(params) {
  params_.validate();
  warmup_ = params_.effective_warmup();
}

double OnsetDetector::threshold() const { return mean_ + params_.k * std::sqrt(var_); }

std::optional<DetectionEvent> OnsetDetector::push(const Observation& obs) {
  const double x = obs.max_level();
  if (seen_ < warmup_) {
    // Plain running mean/variance to seed the background.
    ++seen_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(seen_);
    var_ += (delta * (x - mean_) - var_) / static_cast<double>(seen_);
    return std::nullopt;
  }
  ++seen_;
  const double thr = threshold();
  if (!active_) {
    if (x > thr) {
      if (run_ == 0) {
        run_start_ = obs.time_step;
        run_excess_ = x - mean_;
      }
      if (++run_ >= params_.m) {
        active_ = true;
        run_ = 0;
        return DetectionEvent{obs.time_step, DetectionKind::onset, run_excess_, run_start_, {}};
      }
      return std::nullopt;
    }
    run_ = 0;
    const double delta = x - mean_;
    mean_ += params_.alpha * delta;
    var_ = (1.0 - params_.alpha) * (var_ + params_.alpha * delta * delta);
    return std::nullopt;
  }
  if (x <= thr) {
    if (run_ == 0) run_start_ = obs.time_step;
    if (++run_ >= params_.m) {
      active_ = false;
      run_ = 0;
      return DetectionEvent{obs.time_step, DetectionKind::offset, x - mean_, run_start_, {}};
    }
  } else {
    run_ = 0;
  }
  return std::nullopt;
}

std::vector<DetectionEvent> onset_detect(std::span<const Observation> stream,
                                         const DetectorParams& params) {
  OnsetDetector detector(params);
  std::vector<DetectionEvent> events;
  for (const auto& obs : stream) {
    if (auto event = detector.push(obs)) events.push_back(*event);
  }
  return events;
}

void DetectorRates::validate() const {
  if (!(tpr >= 0.0 && tpr <= 1.0) || !(fpr >= 0.0 && fpr <= 1.0)) {
    throw ValidationError("detector rates must be probabilities");
  }
}

PresenceBelief update_presence(const PresenceBelief& belief,
                               const std::optional<DetectionEvent>& detection, double hazard,
                               const DetectorRates& rates) {
  if (!(hazard >= 0.0 && hazard < 1.0)) throw ValidationError("hazard must be in [0, 1)");
  rates.validate();
  PresenceBelief out = belief;
  const double prior = belief.p_new_agent + (1.0 - belief.p_new_agent) * hazard;
  const bool detected = detection && detection->kind == DetectionKind::onset;
  const double l_present = detected ? rates.tpr : 1.0 - rates.tpr;
  const double l_absent = detected ? rates.fpr : 1.0 - rates.fpr;
  const double norm = prior * l_present + (1.0 - prior) * l_absent;
  out.p_new_agent = norm > 0.0 ? prior * l_present / norm : prior;
  return out;
}

DetectorRates calibrate_detector(const DetectorParams& params, double sigma, double excess_db,
                                 std::int64_t duration, int trials, RandomStream& rng) {
  params.validate();
  if (trials < 1) throw ValidationError("calibration needs at least one trial");
  const std::int64_t lead = params.effective_warmup() + 20;
  const std::int64_t window = duration + params.m;
  int hits = 0;
  int false_alarms = 0;
  for (int trial = 0; trial < trials; ++trial) {
    for (int positive = 0; positive < 2; ++positive) {
      OnsetDetector detector(params);
      bool fired = false;
      for (std::int64_t t = 0; t < lead + window; ++t) {
        Observation obs;
        obs.time_step = t;
        const bool in_event = positive == 1 && t >= lead && t < lead + duration;
        obs.level_left = obs.level_right = (in_event ? excess_db : 0.0) + sigma * rng.normal();
        const auto event = detector.push(obs);
        if (event && event->kind == DetectionKind::onset && t >= lead) fired = true;
      }
      if (fired) (positive == 1 ? hits : false_alarms) += 1;
    }
  }
  return {static_cast<double>(hits) / trials, static_cast<double>(false_alarms) / trials};
}

DetectionMetrics score_detections(std::span<const DetectionEvent> events,
                                  std::span<const TruthOnset> truth, std::int64_t tolerance,
                                  std::int64_t horizon) {
  if (tolerance < 0) throw ValidationError("score_detections: tolerance must be >= 0");
  for (const auto& e : events) {
    if (e.time_step < 0 || e.time_step >= horizon) {
      throw ValidationError("detection at step " + std::to_string(e.time_step) +
                            " lies outside the episode log [0, " + std::to_string(horizon) + ")");
    }
  }
  for (const auto& t : truth) {
    if (t.step < 0 || t.step >= horizon) {
      throw ValidationError("ground-truth onset at step " + std::to_string(t.step) +
                            " lies outside the episode log");
    }
  }

  DetectionMetrics metrics;
  for (const auto& e : events) {
    if (e.kind == DetectionKind::onset) metrics.attributed.push_back(e);
  }
  std::stable_sort(metrics.attributed.begin(), metrics.attributed.end(),
                   [](const auto& a, const auto& b) { return a.time_step < b.time_step; });
  std::vector<TruthOnset> sorted_truth(truth.begin(), truth.end());
  std::stable_sort(sorted_truth.begin(), sorted_truth.end(),
                   [](const auto& a, const auto& b) { return a.step < b.step; });

  std::vector<bool> used(metrics.attributed.size(), false);
  for (const auto& onset : sorted_truth) {
    for (std::size_t i = 0; i < metrics.attributed.size(); ++i) {
      const auto& e = metrics.attributed[i];
      if (used[i] || e.time_step < onset.step || e.time_step > onset.step + tolerance) continue;
      used[i] = true;
      metrics.attributed[i].attributed_agent = onset.agent_id;
      metrics.delays.push_back(static_cast<double>(e.time_step - onset.step + 1));
      break;
    }
  }
  metrics.n_predicted = metrics.attributed.size();
  metrics.n_true = sorted_truth.size();
  metrics.n_matched = metrics.delays.size();
  metrics.zero_predictions = metrics.n_predicted == 0;
  metrics.precision = metrics.zero_predictions
                          ? 1.0
                          : static_cast<double>(metrics.n_matched) / metrics.n_predicted;
  metrics.recall =
      metrics.n_true == 0 ? 1.0 : static_cast<double>(metrics.n_matched) / metrics.n_true;
  if (!metrics.delays.empty()) {
    double sum = 0.0;
    for (double d : metrics.delays) sum += d;
    metrics.mean_delay = sum / metrics.delays.size();
    std::vector<double> sorted = metrics.delays;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    metrics.median_delay = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  return metrics;
}

}  // namespace auditionlab
