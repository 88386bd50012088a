// bdwalk: one experiment per invocation.
//
//   bdwalk <subcommand> --config c.json [--out DIR] [--seed U64] [--workers N]
//                       [--replicas N] [--t T] [--n N] [--exploratory]
//
// Exit status: 0 all verdicts pass, 1 a verdict failed or the run failed,
// 2 configuration error, 3 preconditions unmet without --exploratory.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bdwalk/config.hpp"
#include "bdwalk/error.hpp"
#include "bdwalk/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::size_t> replicas;
  std::optional<double> t;
  std::optional<std::size_t> n;
  bool exploratory = false;
};

int run(const std::string& command, const Flags& f) {
  bdwalk::ExperimentConfig cfg = bdwalk::load_config(f.config, command);
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) {
    if (*f.workers < 1) throw bdwalk::Error(bdwalk::ErrorCode::ConfigError, "--workers: must be at least 1");
    cfg.workers = *f.workers;
  }
  if (f.replicas) {
    if (*f.replicas < 1) throw bdwalk::Error(bdwalk::ErrorCode::ConfigError, "--replicas: must be at least 1");
    cfg.replicas = *f.replicas;
  }
  if (f.t && f.n) throw bdwalk::Error(bdwalk::ErrorCode::ConfigError, "--t and --n are exclusive");
  if (f.t) {
    if (!(*f.t > 0.0)) throw bdwalk::Error(bdwalk::ErrorCode::ConfigError, "--t: must be positive");
    cfg.stop = bdwalk::StopRule::time(*f.t);
  }
  if (f.n) cfg.stop = bdwalk::StopRule::jumps(*f.n);
  // Overrides are echoed so the summary describes the run that happened.
  cfg.raw["overrides"] = nlohmann::json::object();
  if (f.seed) cfg.raw["overrides"]["seed"] = *f.seed;
  if (f.replicas) cfg.raw["overrides"]["replicas"] = *f.replicas;
  if (f.t) cfg.raw["overrides"]["t_end"] = *f.t;
  if (f.n) cfg.raw["overrides"]["n_jumps"] = *f.n;

  bdwalk::RunOptions opt;
  opt.exploratory = f.exploratory;
  if (f.out) {
    opt.out = *f.out;
  } else if (cfg.output_dir) {
    opt.out = *cfg.output_dir;
  }
  const bdwalk::Outcome o = bdwalk::run_experiment(command, cfg, opt);
  std::cout << o.report;
  if (o.refused) {
    std::cerr << "ConditionsUnmet: rerun with --exploratory to proceed\n";
    return 3;
  }
  std::cout << "verdict: " << (o.pass ? "pass" : "fail") << '\n';
  return o.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walk in a birth-death dynamic environment"};
  app.require_subcommand(1);
  Flags f;
  for (const auto& name : bdwalk::subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", f.config, "experiment config (JSON)")->required();
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--replicas", f.replicas, "replica count");
    sub->add_option("--t", f.t, "time horizon (replaces run.stop)");
    sub->add_option("--n", f.n, "jump count (replaces run.stop)");
    sub->add_flag("--exploratory", f.exploratory, "run even when preconditions fail");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, f);
  } catch (const bdwalk::Error& e) {
    std::cerr << e.what() << '\n';
    if (e.code() == bdwalk::ErrorCode::ConfigError) return 2;
    if (e.code() == bdwalk::ErrorCode::ConditionsUnmet) return f.exploratory ? 1 : 3;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "RuntimeFailure: " << e.what() << '\n';
    return 1;
  }
}
