#pragma once

#include "auditionlab/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace auditionlab {

enum class Mode { simulate, localize, plan, multiagent };
enum class OutputFormat { csv, json };

std::string to_string(Mode mode);

/// Pinned metrics.csv header for each mode.
const std::vector<std::string>& metrics_header(Mode mode);

/// Header of the per-step log (episodes.csv).
inline constexpr const char* kStepHeader =
    "episode,time_step,action,observation,belief_mean,belief_mode,entropy,reward";
inline constexpr const char* kSummaryHeader = "column,n,mean,median,ci95_low,ci95_high";

struct StepRecord {
  std::int64_t time_step = 0;
  std::string action;
  std::string observation;
  std::string belief_mean;  // "x y z", empty when not applicable
  std::string belief_mode;
  double entropy = 0.0;  // nats; NaN when the mode keeps no belief
  double reward = 0.0;
};

struct EpisodeResult {
  std::size_t episode = 0;
  std::vector<double> metrics;  // aligned with metrics_header(mode), episode column included
  std::vector<StepRecord> steps;
  std::vector<std::string> notes;
  std::optional<std::string> error;
};

struct AggregateRow {
  std::string column;
  std::size_t n = 0;  // finite values only
  double mean = 0.0;
  double median = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
};

struct RunResult {
  Mode mode = Mode::simulate;
  std::uint64_t seed = 0;
  std::vector<EpisodeResult> episodes;  // ordered by episode index
  std::vector<AggregateRow> summary;
  std::vector<std::string> notes;  // run-level, e.g. calibrated detector rates
  std::size_t n_errors = 0;
};

/// Seed resolution order: explicit override, config run.seed, AUDITIONLAB_SEED, then 1.
std::uint64_t resolve_seed(const ScenarioConfig& config, std::optional<std::uint64_t> override_seed);

/// Episode i draws from RandomStream(derive_seed(seed, i)) only, so any
/// episode can be rerun in isolation. Runs config.run.jobs episodes in
/// parallel; results do not depend on the job count.
RunResult run_experiment(const ScenarioConfig& config, Mode mode, std::uint64_t seed);

/// Aggregates over episodes without an error; non-finite values are skipped.
std::vector<AggregateRow> aggregate(Mode mode, const std::vector<EpisodeResult>& episodes);

std::string metrics_csv(const RunResult& result);
std::string summary_csv(const RunResult& result);
std::string steps_csv(const RunResult& result);
nlohmann::json metrics_json(const RunResult& result);
nlohmann::json steps_json(const RunResult& result);

/// Writes metrics, summary and per-step logs plus the normalized scenario.
/// The summary is re-read from disk and checked against the rows.
void write_outputs(const RunResult& result, const ScenarioConfig& config,
                   const std::filesystem::path& dir, OutputFormat format);

/// Fails the run when more than 1% of episodes errored.
bool run_failed(const RunResult& result);

std::string format_double(double x);

}  // namespace auditionlab
