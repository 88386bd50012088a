#pragma once

// Experiment configuration: a versioned JSON document with four blocks.
//
//   {"schema": 1,
//    "model":    {"d", "params", "phi", "pi", "init"},
//    "run":      {"stop", "replicas", "seed", "workers", "construction"},
//    "analysis": {...subcommand-specific keys...},
//    "output":   {"dir"}}
//
// Unknown keys anywhere are errors. Analysis keys are checked against the
// set the subcommand understands.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bdwalk/coupling.hpp"
#include "bdwalk/walk.hpp"

namespace bdwalk {

inline constexpr int kConfigSchema = 1;

struct AnalysisSpec {
  double alpha = 0.01;
  double level = 0.95;
  // check
  std::size_t nu_psi_k_max = 50;
  std::size_t hitting_mc_runs = 0;
  std::vector<std::size_t> hitting_start{1, 2, 5};
  // simulate
  bool compare_constructions = false;
  // estimate-mu pipeline reused by lln and clt
  std::optional<std::size_t> mu_n;
  std::optional<std::size_t> mu_replicas;
  // clt, env-window
  bool jitter = true;
  std::optional<InitDistSpec> compare_init;
  // dominance-audit
  std::string mode = "pathwise";
  std::size_t table_n = 30;
  std::optional<std::size_t> table_replicas;
  std::optional<std::size_t> nu_draws;
  // env-window, ladder
  std::vector<std::size_t> ns{200, 400};
  int M = 1;
  double coverage_factor = 10.0;
  double tv_max = 0.05;
  // tails
  std::string kind = "coalescence";
  std::vector<double> m_grid;
  std::vector<long> L_grid;
  std::vector<std::size_t> overshoot_grid;  ///< default: powers of 2 below the step radius
  std::vector<double> rates{1.0};
  std::size_t max_steps = 100000;
  InitDistSpec init_b = InitDistSpec::stationary();
};

struct ExperimentConfig {
  ModelSpec model;
  StopRule stop;
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  Construction construction = Construction::Thinning;
  AnalysisSpec analysis;
  std::optional<std::string> output_dir;
  nlohmann::json raw;  ///< the parsed document, echoed into the summary
};

/// Subcommands the configuration can drive.
const std::vector<std::string>& subcommands();

/// Throws Error{ConfigError} on malformed input, unknown keys, or invalid
/// model components (the underlying validation message is kept).
ExperimentConfig parse_config(const nlohmann::json& doc, std::string_view command);
ExperimentConfig load_config(const std::string& path, std::string_view command);

nlohmann::json to_json(const InitDistSpec& init);
InitDistSpec parse_init(const nlohmann::json& j);

}  // namespace bdwalk
