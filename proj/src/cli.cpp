#include "auditionlab/cli.hpp"

#include "auditionlab/config.hpp"
#include "auditionlab/errors.hpp"
#include "auditionlab/experiment.hpp"

#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

namespace auditionlab {

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

struct RunOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::string format = "csv";
};

void add_run_options(CLI::App& cmd, RunOptions& o) {
  cmd.add_option("--scenario", o.scenario, "Scenario file")->required();
  cmd.add_option("--seed", o.seed, "Master seed (overrides run.seed and AUDITIONLAB_SEED)");
  cmd.add_option("--episodes", o.episodes, "Episode count")->check(CLI::PositiveNumber);
  cmd.add_option("--jobs", o.jobs, "Episodes run in parallel")->check(CLI::PositiveNumber);
  cmd.add_option("--out", o.out, "Output directory (overrides run.output_path)");
  cmd.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

int run_mode(Mode mode, const RunOptions& o, std::ostream& out, std::ostream& err) {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  try {
    config = load_scenario(o.scenario);
    if (o.episodes) config.run.episodes = *o.episodes;
    if (o.jobs) config.run.jobs = *o.jobs;
    if (o.out) config.run.output_path = *o.out;
    seed = resolve_seed(config, o.seed);
    config.run.seed = seed;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  }

  RunResult result;
  try {
    result = run_experiment(config, mode, seed);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }

  try {
    const OutputFormat format = o.format == "json" ? OutputFormat::json : OutputFormat::csv;
    write_outputs(result, config, config.run.output_path, format);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }

  for (const auto& note : result.notes) out << note << "\n";
  out << to_string(mode) << ": " << result.episodes.size() << " episodes, seed " << seed << ", "
      << result.n_errors << " errors -> " << config.run.output_path << "\n";
  for (const auto& row : result.summary) {
    out << "  " << row.column << ": mean " << format_double(row.mean) << " [" <<
        format_double(row.ci95_low) << ", " << format_double(row.ci95_high) << "]\n";
  }
  if (run_failed(result)) {
    err << "error: " << result.n_errors << " of " << result.episodes.size()
        << " episodes failed; first: ";
    for (const auto& e : result.episodes) {
      if (e.error) {
        err << "episode " << e.episode << ": " << *e.error << "\n";
        break;
      }
    }
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seeded experiments for robot hearing: simulation, localization, planning and "
               "multiagent detection.",
               "auditionlab"};
  app.require_subcommand(1);

  std::map<std::string, std::pair<Mode, RunOptions>> modes = {
      {"simulate", {Mode::simulate, {}}},
      {"localize", {Mode::localize, {}}},
      {"plan", {Mode::plan, {}}},
      {"multiagent", {Mode::multiagent, {}}}};
  const std::map<std::string, std::string> descriptions = {
      {"simulate", "World rollout without a filter"},
      {"localize", "Source localization benchmark"},
      {"plan", "POMDP and search policy benchmark"},
      {"multiagent", "Onset detection benchmark"}};
  std::map<std::string, CLI::App*> commands;
  for (auto& [name, entry] : modes) {
    CLI::App* cmd = app.add_subcommand(name, descriptions.at(name));
    add_run_options(*cmd, entry.second);
    commands[name] = cmd;
  }
  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario and print its normalized form");
  validate->add_option("path", validate_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationFailure;
  }

  if (validate->parsed()) {
    try {
      const ScenarioConfig config = load_scenario(validate_path);
      out << to_json(config).dump(2) << "\n";
      return kOk;
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return kValidationFailure;
    }
  }
  for (auto& [name, entry] : modes) {
    if (commands[name]->parsed()) return run_mode(entry.first, entry.second, out, err);
  }
  return kValidationFailure;
}

}  // namespace auditionlab
