#pragma once

#include "auditionlab/acoustics.hpp"
#include "auditionlab/filters.hpp"
#include "auditionlab/multiagent.hpp"
#include "auditionlab/other_agent.hpp"
#include "auditionlab/planning.hpp"
#include "auditionlab/world.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace auditionlab {

enum class Trajectory { stationary, circle, random_walk, rotate, yaw };
enum class FilterType { grid, ekf, pf };
enum class Problem { tiger, find_the_phone, continuous_search };
enum class Solver { vi_qmdp, info_gain, hybrid, gradient_follow, random };

struct WorldConfig {
  WorldParams params;
  bool planar = true;
  double source_level_db = 70.0;
  std::optional<Vec3> source_position;  // random inside bounds when absent
  double min_source_distance = 1.0;     // from the agent start, for random placement
  Vec3 agent_start = Vec3::Zero();
  double agent_yaw_deg = 0.0;
  Trajectory trajectory = Trajectory::stationary;
  double trajectory_radius = 5.0;
  int trajectory_points = 10;
  double step_length = 0.5;
  double rotation_step_deg = 9.0;
};

struct FilterConfig {
  FilterType type = FilterType::grid;
  double resolution = 0.25;
  std::size_t n_particles = 10000;
  double jitter = 0.01;
  double process_sigma = 0.0;
  MeasurementSelect use;
  std::optional<double> ekf_prior_sigma;
};

struct PlannerConfig {
  Problem problem = Problem::tiger;
  Solver solver = Solver::vi_qmdp;
  double gamma = 0.95;
  double tol = 1e-9;
  std::size_t max_iters = 100000;
  PhoneRewards rewards;  // for tiger: step is the listen cost
  std::size_t bins = 8;
  std::optional<std::size_t> horizon;
  std::size_t grid_size = 4;
  double cell_size = 1.0;
  std::size_t max_transition_entries = 1'000'000;
  double listen_accuracy = 0.85;
  double step_size = 0.5;
  double turn_angle_deg = 90.0;
  double epsilon_db = 0.1;
  double capture_radius = 0.5;
  double min_start_distance = 5.0;
};

struct MultiagentConfig {
  std::vector<OtherAgent> agents;
  double lambda_arrival = 0.0;
  double departure_probability = 0.05;
  EmissionTemplate arrival_emission{75.0, 5, SourceKind::impulsive};
  double arrival_walk_sigma = 0.0;
  DetectorParams detector;
  double hazard = 0.01;
  std::optional<DetectorRates> rates;  // measured by calibration when absent
  std::int64_t tolerance = 10;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t episodes = 10;
  std::size_t horizon = 20;
  std::string output_path = "out";
  std::size_t jobs = 1;
};

struct ScenarioConfig {
  WorldConfig world;
  SensorModel sensor;
  FilterConfig filter;
  PlannerConfig planner;
  std::optional<MultiagentConfig> multiagent;
  RunConfig run;
};

/// Parses and validates a scenario. Unknown keys are errors. Throws
/// ConfigError with line information on parse failures and with the dotted
/// key path on validation failures.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Normalized form with every default filled in.
nlohmann::json to_json(const ScenarioConfig& config);

/// Nearest valid key by edit distance, for error messages.
std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates);

std::string to_string(Trajectory t);
std::string to_string(FilterType t);
std::string to_string(Problem p);
std::string to_string(Solver s);

}  // namespace auditionlab
