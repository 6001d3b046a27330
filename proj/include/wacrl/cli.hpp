#ifndef WACRL_CLI_HPP
#define WACRL_CLI_HPP

#include "wacrl/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace wacrl {

/// Command-line overrides. Every set field takes precedence over the config
/// file.
struct CliOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  /// Comma-separated lists.
  std::optional<std::string> eta;
  std::optional<std::string> s;
  std::optional<double> t_end;
  std::optional<double> sample_period;
  std::optional<std::filesystem::path> support_file;
  /// Nominal model file (overrides the config's "model").
  std::optional<std::filesystem::path> model;
  /// Actual plant file for learn and evaluate.
  std::optional<std::filesystem::path> actual;
  /// Actor file for evaluate.
  std::optional<std::filesystem::path> actor;
  std::optional<int> workers;
  std::optional<int> seed_count;
};

/// Fully resolved inputs of one command.
struct RunConfig {
  SmallSignalModel nominal;
  std::string model_source = "benchmark";
  CostWeights weights;
  LearnerConfig learner;
  /// Support, eta (first of the eta grid) and seed used by perturb and learn.
  UncertaintySpec uncertainty;
  ExperimentSpec experiment;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";
};

/// Reads the config file (if any), applies the overrides and validates.
/// Throws Error(Parse) with the line or field name for config problems.
RunConfig load_run_config(const CliOptions& options);
/// Builds a config from JSON text with relative paths resolved against
/// `base_dir`, then applies `options`.
RunConfig run_config_from_text(const std::string& text, const std::filesystem::path& base_dir,
                               const CliOptions& options = {});

std::vector<double> parse_double_list(const std::string& text, const char* what);
std::vector<int> parse_int_list(const std::string& text, const char* what);

// Subcommands. Each returns the process exit code; failures print a single
// "error: <category>: <message>" line to `err`.
int cmd_build_model(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_perturb(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_learn(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_evaluate(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const CliOptions& options, std::ostream& out, std::ostream& err);

/// Dispatches by subcommand name.
int run_command(const std::string& name, const CliOptions& options, std::ostream& out,
                std::ostream& err);

}  // namespace wacrl

#endif  // WACRL_CLI_HPP
