#pragma once

#include "auditionlab/acoustics.hpp"
#include "auditionlab/other_agent.hpp"
#include "auditionlab/random.hpp"
#include "auditionlab/world.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace auditionlab {

struct MultiagentParams {
  double lambda_arrival = 0.0;         // Poisson arrivals per step
  double departure_probability = 0.05;  // per step, for spawned agents only
  /// Template for spawned agents. Its emission named "arrive" (when present)
  /// is emitted on arrival.
  OtherAgent arrival_template;
  std::optional<Bounds> spawn_bounds;

  void validate() const;
};

struct EmissionRecord {
  int agent_id = 0;
  int source_id = 0;
  std::int64_t onset_step = 0;  // first step the emission is audible
  std::int64_t duration = 0;
  std::string kind;
};

struct MultiStepResult {
  WorldState state;
  std::vector<EmissionRecord> emissions;
  std::vector<int> arrivals;
  std::vector<int> departures;
};

/// Simultaneous-move step. For the transition t -> t+1: departures and
/// arrivals (scheduled or Poisson) take effect at t+1; every agent present
/// at t+1 runs its policy against the state at t, and each act instantiates
/// its emission as a source active on [t+1, t+1+duration). Expired emission
/// sources are dropped, then the primary action is applied with step().
/// Draws: departures of spawned agents, Poisson count and spawn placement,
/// other agents in list order, then the primary transition. No draws are
/// made for an empty, arrival-free world.
MultiStepResult multi_step(const WorldState& world, const Action& primary_action,
                           const WorldParams& world_params, const MultiagentParams& params,
                           RandomStream& rng);

struct DetectorParams {
  double k = 4.0;       // threshold in background standard deviations
  int m = 3;            // consecutive steps to confirm
  double alpha = 0.05;  // EMA smoothing
  int warmup = 0;       // initial samples used only to seed the background; 0 -> ceil(2 / alpha)

  int effective_warmup() const;
  void validate() const;
};

enum class DetectionKind { onset, offset };

struct DetectionEvent {
  std::int64_t time_step = 0;   // step of the confirming observation
  DetectionKind kind = DetectionKind::onset;
  double level_excess = 0.0;    // dB above background at first exceedance
  std::int64_t start_step = 0;  // first step of the confirming run
  std::optional<int> attributed_agent;
};

/// Streaming level-excursion detector on the louder microphone. Background
/// mean and variance are exponential moving averages that only adapt on
/// samples at or below threshold while no onset is active.
class OnsetDetector {
 public:
  explicit OnsetDetector(DetectorParams params);

  std::optional<DetectionEvent> push(const Observation& obs);

  double background_level() const { return mean_; }
  double background_var() const { return var_; }
  bool active() const { return active_; }
  double threshold() const;

 private:
  DetectorParams params_;
  int warmup_;
  std::int64_t seen_ = 0;
  double mean_ = 0.0;
  double var_ = 0.0;
  bool active_ = false;
  int run_ = 0;
  std::int64_t run_start_ = 0;
  double run_excess_ = 0.0;
};

std::vector<DetectionEvent> onset_detect(std::span<const Observation> stream,
                                         const DetectorParams& params);

struct DetectorRates {
  double tpr = 0.9;
  double fpr = 0.01;

  void validate() const;
};

struct PresenceBelief {
  double p_new_agent = 0.0;
  double background_level = 0.0;
  double background_var = 0.0;
};

/// Bernoulli chain: p' = p + (1 - p) hazard, then Bayes with the detector's
/// rates on "onset detected" versus "nothing detected". Offset events carry
/// no presence evidence and count as nothing detected.
PresenceBelief update_presence(const PresenceBelief& belief,
                               const std::optional<DetectionEvent>& detection, double hazard,
                               const DetectorRates& rates);

/// Monte Carlo estimate of per-window detection rates on synthetic streams:
/// Gaussian background of std `sigma`, and for positive windows a step of
/// `excess_db` lasting `duration` steps after a quiet lead-in.
DetectorRates calibrate_detector(const DetectorParams& params, double sigma, double excess_db,
                                 std::int64_t duration, int trials, RandomStream& rng);

struct TruthOnset {
  std::int64_t step = 0;
  int agent_id = 0;
};

struct DetectionMetrics {
  double precision = 1.0;
  double recall = 1.0;
  double mean_delay = 0.0;    // steps, over matched onsets
  double median_delay = 0.0;
  std::size_t n_predicted = 0;
  std::size_t n_true = 0;
  std::size_t n_matched = 0;
  bool zero_predictions = false;  // precision reported as 1 by convention
  std::vector<double> delays;
  std::vector<DetectionEvent> attributed;  // onset events with attribution filled in
};

/// Matches each true onset (in time order) to the earliest unmatched onset
/// detection with truth <= time_step <= truth + tolerance. Delay counts the
/// observations consumed, time_step - truth + 1. Throws ValidationError when
/// any event or onset lies outside [0, horizon).
DetectionMetrics score_detections(std::span<const DetectionEvent> events,
                                  std::span<const TruthOnset> truth, std::int64_t tolerance,
                                  std::int64_t horizon);

}  // namespace auditionlab
