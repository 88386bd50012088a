#include "bdwalk/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bdwalk/error.hpp"

namespace bdwalk {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void only_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail(where, "unknown key \"" + k + "\"");
  }
}

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) fail(where, "missing key \"" + key + "\"");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::uint64_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    fail(where, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, where));
  return out;
}

std::vector<std::size_t> counts(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of integers");
  std::vector<std::size_t> out;
  for (const auto& v : j) out.push_back(count(v, where));
  return out;
}

// Runs a model-component constructor, turning its validation error into a
// config error that keeps the original code name in the message.
template <class F>
auto validated(const std::string& where, F&& make) {
  try {
    return make();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(where, e.what());
  }
}

BDParams parse_params(const json& j) {
  only_keys(j, "model.params", {"p_table", "p_tail"});
  RawParams raw{numbers(need(j, "p_table", "model.params"), "model.params.p_table"),
                number(need(j, "p_tail", "model.params"), "model.params.p_tail")};
  return validated("model.params", [&] { return BDParams::validate(raw); });
}

RateFunction parse_phi(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "one") return RateFunction::one();
    if (s == "harmonic") return RateFunction::harmonic();
    if (s == "geometric_half") return RateFunction::geometric_half();
    fail("model.phi", "unknown preset \"" + s + "\"");
  }
  only_keys(j, "model.phi", {"table", "tail"});
  const auto table = numbers(need(j, "table", "model.phi"), "model.phi.table");
  const double tail = number(need(j, "tail", "model.phi"), "model.phi.tail");
  return validated("model.phi", [&] { return RateFunction(table, tail); });
}

JumpDistribution parse_pi(const json& j, int d) {
  if (j.is_string()) {
    if (j.get<std::string>() == "symmetric") {
      return validated("model.pi", [&] { return JumpDistribution::symmetric_unit(d); });
    }
    fail("model.pi", "unknown preset \"" + j.get<std::string>() + "\"");
  }
  if (!j.is_array()) fail("model.pi", "expected an array of {\"dx\", \"p\"} entries");
  std::vector<std::pair<Site, double>> table;
  for (const auto& e : j) {
    only_keys(e, "model.pi[]", {"dx", "p"});
    const auto dx = numbers(need(e, "dx", "model.pi[]"), "model.pi[].dx");
    if (static_cast<int>(dx.size()) != d) fail("model.pi[].dx", "length must equal d");
    Site s{0, 0, 0};
    for (int i = 0; i < d; ++i) {
      if (dx[i] != static_cast<double>(static_cast<int>(dx[i]))) fail("model.pi[].dx", "integer entries required");
      s[i] = static_cast<int>(dx[i]);
    }
    table.push_back({s, number(need(e, "p", "model.pi[]"), "model.pi[].p")});
  }
  return validated("model.pi", [&] { return JumpDistribution(d, table); });
}

StopRule parse_stop(const json& j) {
  only_keys(j, "run.stop", {"n_jumps", "t_end"});
  if (j.contains("n_jumps") == j.contains("t_end")) fail("run.stop", "give exactly one of n_jumps, t_end");
  if (j.contains("n_jumps")) return StopRule::jumps(count(j["n_jumps"], "run.stop.n_jumps"));
  const double t = number(j["t_end"], "run.stop.t_end");
  if (!(t > 0.0)) fail("run.stop.t_end", "must be positive");
  return StopRule::time(t);
}

const std::map<std::string, std::set<std::string>>& analysis_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"check", {"alpha", "level", "nu_psi_k_max", "hitting_mc_runs", "hitting_start"}},
      {"simulate", {"alpha", "level", "compare_constructions"}},
      {"estimate-mu", {"level"}},
      {"lln", {"level", "mu_n", "mu_replicas"}},
      {"clt", {"alpha", "level", "mu_n", "mu_replicas", "jitter", "compare_init"}},
      {"dominance-audit", {"alpha", "mode", "table_n", "table_replicas", "nu_draws"}},
      {"env-window", {"ns", "M", "compare_init", "coverage_factor", "tv_max"}},
      {"ladder", {"M", "level"}},
      {"tails", {"alpha", "level", "kind", "m_grid", "L_grid", "overshoot_grid", "rates", "max_steps", "init_b"}},
  };
  return keys;
}

AnalysisSpec parse_analysis(const json& j, const std::string& command) {
  AnalysisSpec a;
  const std::string w = "analysis";
  only_keys(j, w + " (" + command + ")", analysis_keys().at(command));
  if (j.contains("alpha")) a.alpha = number(j["alpha"], w + ".alpha");
  if (j.contains("level")) a.level = number(j["level"], w + ".level");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) fail(w + ".alpha", "must lie in (0, 1)");
  if (!(a.level > 0.0 && a.level < 1.0)) fail(w + ".level", "must lie in (0, 1)");
  if (j.contains("nu_psi_k_max")) a.nu_psi_k_max = count(j["nu_psi_k_max"], w + ".nu_psi_k_max");
  if (j.contains("hitting_mc_runs")) a.hitting_mc_runs = count(j["hitting_mc_runs"], w + ".hitting_mc_runs");
  if (j.contains("hitting_start")) a.hitting_start = counts(j["hitting_start"], w + ".hitting_start");
  if (j.contains("compare_constructions"))
    a.compare_constructions = boolean(j["compare_constructions"], w + ".compare_constructions");
  if (j.contains("mu_n")) a.mu_n = count(j["mu_n"], w + ".mu_n");
  if (j.contains("mu_replicas")) a.mu_replicas = count(j["mu_replicas"], w + ".mu_replicas");
  if (j.contains("jitter")) a.jitter = boolean(j["jitter"], w + ".jitter");
  if (j.contains("compare_init")) a.compare_init = parse_init(j["compare_init"]);
  if (j.contains("mode")) {
    a.mode = text(j["mode"], w + ".mode");
    if (a.mode != "pathwise" && a.mode != "first_jump") fail(w + ".mode", "pathwise or first_jump");
  }
  if (j.contains("table_n")) a.table_n = count(j["table_n"], w + ".table_n");
  if (j.contains("table_replicas")) a.table_replicas = count(j["table_replicas"], w + ".table_replicas");
  if (j.contains("nu_draws")) a.nu_draws = count(j["nu_draws"], w + ".nu_draws");
  if (j.contains("ns")) a.ns = counts(j["ns"], w + ".ns");
  if (j.contains("M")) a.M = static_cast<int>(count(j["M"], w + ".M"));
  if (j.contains("coverage_factor")) a.coverage_factor = number(j["coverage_factor"], w + ".coverage_factor");
  if (j.contains("tv_max")) a.tv_max = number(j["tv_max"], w + ".tv_max");
  if (j.contains("kind")) {
    a.kind = text(j["kind"], w + ".kind");
    if (a.kind != "coalescence" && a.kind != "overshoot" && a.kind != "interval_max") {
      fail(w + ".kind", "coalescence, overshoot or interval_max");
    }
  }
  if (j.contains("m_grid")) a.m_grid = numbers(j["m_grid"], w + ".m_grid");
  if (j.contains("L_grid")) {
    for (double v : numbers(j["L_grid"], w + ".L_grid")) a.L_grid.push_back(static_cast<long>(v));
  }
  if (j.contains("rates")) a.rates = numbers(j["rates"], w + ".rates");
  if (j.contains("overshoot_grid")) {
    a.overshoot_grid = counts(j["overshoot_grid"], w + ".overshoot_grid");
    for (std::size_t v : a.overshoot_grid)
      if (v == 0) fail(w + ".overshoot_grid", "entries must be positive");
  }
  if (j.contains("max_steps")) a.max_steps = count(j["max_steps"], w + ".max_steps");
  if (j.contains("init_b")) a.init_b = parse_init(j["init_b"]);
  return a;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"check", "simulate", "estimate-mu",
                                                 "lln",   "clt",      "dominance-audit",
                                                 "env-window", "ladder", "tails"};
  return names;
}

InitDistSpec parse_init(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "zero") return InitDistSpec::zero();
    if (s == "stationary") return InitDistSpec::stationary();
    fail("init", "expected \"zero\", \"stationary\" or a table");
  }
  only_keys(j, "init", {"table", "beta", "C"});
  const auto table = numbers(need(j, "table", "init"), "init.table");
  const double beta = number(need(j, "beta", "init"), "init.beta");
  const double C = j.contains("C") ? number(j["C"], "init.C") : 1.0;
  return validated("init", [&] { return InitDistSpec::product(table, beta, C); });
}

json to_json(const InitDistSpec& init) {
  switch (init.kind) {
    case InitKind::AllZero:
      return "zero";
    case InitKind::Stationary:
      return "stationary";
    case InitKind::ProductTable:
      return {{"table", init.table.weights}, {"beta", init.beta}, {"C", init.C}};
  }
  return nullptr;
}

ExperimentConfig parse_config(const json& doc, std::string_view command_view) {
  const std::string command(command_view);
  if (!analysis_keys().count(command)) fail("command", "unknown subcommand \"" + command + "\"");
  only_keys(doc, "config", {"schema", "model", "run", "analysis", "output"});
  const auto schema = count(need(doc, "schema", "config"), "schema");
  if (schema != kConfigSchema) fail("schema", "unsupported version " + std::to_string(schema));

  ExperimentConfig cfg;
  cfg.raw = doc;
  const json& m = need(doc, "model", "config");
  only_keys(m, "model", {"d", "params", "phi", "pi", "init"});
  cfg.model.d = static_cast<int>(count(need(m, "d", "model"), "model.d"));
  if (cfg.model.d < 1 || cfg.model.d > 3) fail("model.d", "UnsupportedDimension: d must be 1, 2 or 3");
  cfg.model.params = parse_params(need(m, "params", "model"));
  cfg.model.phi = m.contains("phi") ? parse_phi(m["phi"]) : RateFunction::one();
  cfg.model.pi = m.contains("pi") ? parse_pi(m["pi"], cfg.model.d)
                                  : JumpDistribution::symmetric_unit(cfg.model.d);
  cfg.model.init = m.contains("init") ? parse_init(m["init"]) : InitDistSpec::zero();

  const json run = doc.contains("run") ? doc["run"] : json::object();
  only_keys(run, "run", {"stop", "replicas", "seed", "workers", "construction"});
  if (run.contains("stop")) cfg.stop = parse_stop(run["stop"]);
  if (run.contains("replicas")) cfg.replicas = count(run["replicas"], "run.replicas");
  if (run.contains("seed")) cfg.seed = count(run["seed"], "run.seed");
  if (run.contains("workers")) cfg.workers = static_cast<int>(count(run["workers"], "run.workers"));
  if (run.contains("construction")) {
    const std::string c = text(run["construction"], "run.construction");
    if (c == "thinning") {
      cfg.construction = Construction::Thinning;
    } else if (c == "timechange") {
      cfg.construction = Construction::TimeChange;
    } else {
      fail("run.construction", "thinning or timechange");
    }
  }
  cfg.analysis = parse_analysis(doc.contains("analysis") ? doc["analysis"] : json::object(), command);
  if (doc.contains("output")) {
    only_keys(doc["output"], "output", {"dir"});
    if (doc["output"].contains("dir")) cfg.output_dir = text(doc["output"]["dir"], "output.dir");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, std::string_view command) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, command);
}

}  // namespace bdwalk
