#include "auditionlab/acoustics.hpp"
#include "auditionlab/errors.hpp"
#include "auditionlab/multiagent.hpp"
#include "auditionlab/stats.hpp"

#include <cmath>

#include "doctest.h"

using namespace auditionlab;

namespace {

OtherAgent scripted(int id, std::int64_t act_step, double level, std::int64_t duration) {
  OtherAgent agent;
  agent.id = id;
  agent.pose.position = Vec3(2, 1, 0);
  agent.policy = ScriptedPolicy{{{act_step, "knock", Vec3::Zero()}}};
  agent.emissions["knock"] = EmissionTemplate{level, duration, SourceKind::impulsive};
  return agent;
}

Observation level_obs(std::int64_t t, double level) {
  Observation o;
  o.time_step = t;
  o.level_left = level;
  o.level_right = level;
  return o;
}

DetectionEvent onset_at(std::int64_t t) {
  DetectionEvent e;
  e.time_step = t;
  e.start_step = t;
  e.level_excess = 10.0;
  return e;
}

}  // namespace

TEST_CASE("multi_step without other agents matches step") {
  WorldState s;
  s.agent.position = Vec3(1, 2, 0);
  WorldParams wp;
  wp.noise = {0.1, 0.05};
  RandomStream a(70);
  RandomStream b(70);
  const Action act = Translate{Vec3(0.3, 0.1, 0)};
  const MultiStepResult r = multi_step(s, act, wp, MultiagentParams{}, a);
  const WorldState direct = step(s, act, wp, b);
  CHECK(r.state.agent.position == direct.agent.position);
  CHECK(r.state.agent.orientation.coeffs() == direct.agent.orientation.coeffs());
  CHECK(r.state.time_step == direct.time_step);
  CHECK(r.emissions.empty());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("scripted emission is active exactly on its scheduled steps") {
  WorldState s;
  s.other_agents.push_back(scripted(5, 10, 80.0, 3));
  RandomStream rng(71);
  std::vector<std::int64_t> audible;
  bool recorded = false;
  for (int t = 0; t < 20; ++t) {
    const MultiStepResult r = multi_step(s, Observe{}, WorldParams{}, MultiagentParams{}, rng);
    s = r.state;
    if (!r.emissions.empty()) {
      CHECK(r.emissions[0].onset_step == 10);
      CHECK(r.emissions[0].duration == 3);
      CHECK(r.emissions[0].agent_id == 5);
      recorded = true;
    }
    for (const auto& src : s.sources) {
      if (src.active_at(s.time_step)) {
        CHECK(src.level_ref == 80.0);
        CHECK(src.emitter == 5);
        audible.push_back(s.time_step);
      }
    }
  }
  CHECK(recorded);
  CHECK(audible == std::vector<std::int64_t>{10, 11, 12});
  CHECK(s.sources.empty());
}

TEST_CASE("without other agents and noise the multiagent pipeline observes identically") {
  WorldState s;
  SoundSource src;
  src.position = Vec3(3, 1, 0);
  src.level_ref = 65.0;
  s.sources = {src};
  SensorModel sensor;
  RandomStream a(72);
  RandomStream b(72);
  WorldState single = s;
  WorldState multi = s;
  for (int t = 0; t < 50; ++t) {
    const Observation x = observe(single, sensor, a);
    const Observation y = observe(multi, sensor, b);
    CHECK(x.level_left == y.level_left);
    CHECK(x.level_right == y.level_right);
    CHECK(x.itd == y.itd);
    single = step(single, Observe{}, WorldParams{}, a);
    multi = multi_step(multi, Observe{}, WorldParams{}, MultiagentParams{}, b).state;
  }
}

TEST_CASE("Poisson arrival rate is within 10% of lambda") {
  MultiagentParams params;
  params.lambda_arrival = 0.02;
  params.departure_probability = 0.05;
  params.spawn_bounds = Bounds{Vec3(-5, -5, 0), Vec3(5, 5, 0)};
  params.arrival_template.policy = RandomWalkPolicy{0.0, 0.0};
  std::size_t arrivals = 0;
  const int steps = 10000;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    RandomStream rng(derive_seed(73, static_cast<std::uint64_t>(seed)));
    WorldState s;
    for (int t = 0; t < steps; ++t) {
      const MultiStepResult r = multi_step(s, Observe{}, WorldParams{}, params, rng);
      arrivals += r.arrivals.size();
      s = r.state;
    }
  }
  const double rate = static_cast<double>(arrivals) / (static_cast<double>(steps) * seeds);
  CHECK(std::abs(rate / 0.02 - 1.0) < 0.10);
}

TEST_CASE("spawned agents depart and emit on arrival") {
  MultiagentParams params;
  params.lambda_arrival = 0.2;
  params.departure_probability = 0.5;
  params.spawn_bounds = Bounds{Vec3(-5, -5, 0), Vec3(5, 5, 0)};
  params.arrival_template.emissions["arrive"] = EmissionTemplate{70.0, 2, SourceKind::impulsive};
  params.arrival_template.policy = RandomWalkPolicy{0.1, 0.0};
  RandomStream rng(74);
  WorldState s;
  std::size_t arrivals = 0;
  std::size_t departures = 0;
  std::size_t arrive_emissions = 0;
  for (int t = 0; t < 500; ++t) {
    const MultiStepResult r = multi_step(s, Observe{}, WorldParams{}, params, rng);
    arrivals += r.arrivals.size();
    departures += r.departures.size();
    for (const auto& e : r.emissions) arrive_emissions += e.kind == "arrive";
    s = r.state;
    for (const auto& agent : s.other_agents) {
      CHECK(params.spawn_bounds->contains(agent.pose.position));
    }
  }
  CHECK(arrivals > 50);
  CHECK(departures > 0);
  CHECK(arrive_emissions == arrivals);
}

TEST_CASE("constant noise-free background gives no detections") {
  std::vector<Observation> stream;
  for (int t = 0; t < 500; ++t) stream.push_back(level_obs(t, 40.0));
  CHECK(onset_detect(stream, DetectorParams{}).empty());
}

TEST_CASE("a +20 dB step is detected once, m steps after it starts") {
  DetectorParams params;
  params.k = 4;
  params.m = 3;
  RandomStream rng(75);
  std::vector<Observation> stream;
  const std::int64_t onset = 200;
  for (int t = 0; t < 400; ++t) {
    const double level = 40.0 + rng.normal() + (t >= onset ? 20.0 : 0.0);
    stream.push_back(level_obs(t, level));
  }
  const auto events = onset_detect(stream, params);
  int onsets = 0;
  for (const auto& e : events) {
    if (e.kind != DetectionKind::onset) continue;
    ++onsets;
    CHECK(e.start_step == onset);
    CHECK(e.time_step == onset + params.m - 1);
    CHECK(e.time_step - onset + 1 == params.m);
    CHECK(e.level_excess > 15.0);
  }
  CHECK(onsets == 1);
}

TEST_CASE("pure noise false-onset rate is below 1e-3 per step") {
  DetectorParams params;
  params.k = 4;
  params.m = 3;
  RandomStream rng(76);
  std::vector<Observation> stream;
  const int n = 100000;
  for (int t = 0; t < n; ++t) stream.push_back(level_obs(t, 40.0 + rng.normal()));
  std::size_t onsets = 0;
  for (const auto& e : onset_detect(stream, params)) onsets += e.kind == DetectionKind::onset;
  CHECK(static_cast<double>(onsets) / n < 1e-3);
}

TEST_CASE("detector parameter validation") {
  DetectorParams p;
  p.k = 0;
  CHECK_THROWS_AS(OnsetDetector{p}, ValidationError);
  p = DetectorParams{};
  p.m = 0;
  CHECK_THROWS_AS(OnsetDetector{p}, ValidationError);
  p = DetectorParams{};
  p.alpha = 1.5;
  CHECK_THROWS_AS(OnsetDetector{p}, ValidationError);
}

TEST_CASE("presence updates") {
  const DetectorRates rates{0.9, 0.1};
  PresenceBelief b;
  b.p_new_agent = 0.3;
  for (int i = 0; i < 10; ++i) {
    const PresenceBelief same = update_presence(b, std::nullopt, 0.0, DetectorRates{0.5, 0.5});
    CHECK(same.p_new_agent == doctest::Approx(0.3).epsilon(1e-15));
  }
  b.p_new_agent = 0.5;
  CHECK(std::abs(update_presence(b, onset_at(3), 0.0, rates).p_new_agent - 0.9) < 1e-12);

  b.p_new_agent = 0.9;
  double previous = b.p_new_agent;
  for (int i = 0; i < 50; ++i) {
    b = update_presence(b, std::nullopt, 0.0, rates);
    CHECK(b.p_new_agent < previous);
    previous = b.p_new_agent;
  }
  CHECK(previous < 1e-6);
  CHECK_THROWS_AS(update_presence(b, std::nullopt, 1.0, rates), ValidationError);
}

TEST_CASE("likelihood-ratio-one evidence leaves the hazard-adjusted prior") {
  RandomStream rng(77);
  for (int i = 0; i < 100; ++i) {
    PresenceBelief b;
    b.p_new_agent = rng.uniform();
    const double hazard = rng.uniform(0.0, 0.5);
    const double rate = rng.uniform(0.05, 0.95);
    const DetectorRates flat{rate, rate};
    const double prior = b.p_new_agent + (1 - b.p_new_agent) * hazard;
    CHECK(std::abs(update_presence(b, std::nullopt, hazard, flat).p_new_agent - prior) < 1e-12);
    CHECK(std::abs(update_presence(b, onset_at(1), hazard, flat).p_new_agent - prior) < 1e-12);
  }
}

TEST_CASE("higher hazard gives a higher posterior for the same evidence") {
  const DetectorRates rates{0.8, 0.05};
  std::vector<std::optional<DetectionEvent>> evidence;
  for (int t = 0; t < 60; ++t) {
    evidence.push_back(t % 17 == 5 ? std::optional<DetectionEvent>(onset_at(t)) : std::nullopt);
  }
  auto run = [&](double hazard) {
    PresenceBelief b;
    std::vector<double> trace;
    for (const auto& e : evidence) {
      b = update_presence(b, e, hazard, rates);
      trace.push_back(b.p_new_agent);
    }
    return trace;
  };
  const auto high = run(0.05);
  const auto low = run(0.01);
  for (std::size_t t = 0; t < high.size(); ++t) CHECK(high[t] > low[t]);
}

TEST_CASE("scoring conventions") {
  std::vector<TruthOnset> truth;
  std::vector<DetectionEvent> perfect;
  for (int i = 0; i < 10; ++i) {
    truth.push_back({20 + 30 * i, 1});
    perfect.push_back(onset_at(20 + 30 * i + 2));
  }
  const DetectionMetrics m = score_detections(perfect, truth, 5, 400);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.mean_delay == 3.0);
  CHECK(m.n_matched == 10);
  for (const auto& e : m.attributed) CHECK(e.attributed_agent == 1);

  const DetectionMetrics none = score_detections({}, truth, 5, 400);
  CHECK(none.recall == 0.0);
  CHECK(none.precision == 1.0);
  CHECK(none.zero_predictions);

  std::vector<DetectionEvent> noisy = perfect;
  noisy.push_back(onset_at(5));
  noisy.push_back(onset_at(390));
  const DetectionMetrics twelve = score_detections(noisy, truth, 5, 400);
  CHECK(std::abs(twelve.precision - 10.0 / 12.0) < 1e-15);
  CHECK(twelve.recall == 1.0);

  std::vector<DetectionEvent> late = {onset_at(500)};
  CHECK_THROWS_AS(score_detections(late, truth, 5, 400), ValidationError);
}

TEST_CASE("offset events do not count as detections") {
  std::vector<TruthOnset> truth = {{10, 2}};
  DetectionEvent off = onset_at(11);
  off.kind = DetectionKind::offset;
  const DetectionMetrics m = score_detections(std::vector<DetectionEvent>{off}, truth, 5, 100);
  CHECK(m.recall == 0.0);
  CHECK(m.n_predicted == 0);
}

TEST_CASE("calibrated rates are sensible") {
  DetectorParams params;
  RandomStream rng(78);
  const DetectorRates r = calibrate_detector(params, 1.0, 6.0, 10, 300, rng);
  CHECK(r.tpr > 0.9);
  CHECK(r.fpr < 0.1);
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("other agent validation") {
  OtherAgent a = scripted(1, 3, 70.0, 2);
  a.arrival_step = 10;
  a.departure_step = 10;
  CHECK_THROWS_AS(a.validate(), ValidationError);
  a.departure_step = 11;
  CHECK_NOTHROW(a.validate());
  a.emissions["knock"].level_ref = std::nan("");
  CHECK_THROWS_AS(a.validate(), ValidationError);
}
