#pragma once

// One pipeline per CLI subcommand. Each writes summary.json and data/*.csv
// under the output directory; the caller maps the outcome to an exit status.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "bdwalk/config.hpp"

namespace bdwalk {

struct RunOptions {
  std::filesystem::path out = "bdwalk_out";
  bool exploratory = false;
};

struct Outcome {
  nlohmann::json summary;
  bool pass = false;
  std::vector<std::string> unmet;  ///< failed preconditions
  bool refused = false;            ///< unmet preconditions outside exploratory mode
  std::string report;              ///< human-readable lines for stdout
};

/// Precondition verdicts recorded for `command` on this config.
nlohmann::json evaluate_conditions(const std::string& command, const ExperimentConfig& cfg,
                                   std::vector<std::string>& unmet);

/// Runs the experiment and writes its artifacts. Preconditions that fail
/// outside exploratory mode produce a refused outcome (summary still written).
Outcome run_experiment(const std::string& command, const ExperimentConfig& cfg,
                       const RunOptions& opt);

}  // namespace bdwalk
