// Command-line front end: simulate, sweep, locate, oracle-check.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ueloc/errors.hpp"
#include "ueloc/harness.hpp"
#include "ueloc/oracle.hpp"

namespace {

using nlohmann::json;
using namespace ueloc;

constexpr int kExitConfig = 2;
constexpr int kExitTooLarge = 3;

struct Common {
  std::string config;
  int trials = 0;
  std::string seed;
  std::string scheme;
  std::string jsonl;
  std::string out;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.trials > 0) cfg.trials = c.trials;
  if (!c.seed.empty()) cfg.base_seed = std::stoull(c.seed);
  if (!c.scheme.empty()) cfg.scheme = parse_scheme(c.scheme);
  cfg.validate();
  return cfg;
}

void emit(const Common& c, const std::vector<SweepRow>& rows, const std::vector<TrialRecord>& recs) {
  if (c.out.empty()) {
    write_csv(std::cout, rows);
  } else {
    std::ofstream f(c.out);
    if (!f) throw ConfigError("cannot write '" + c.out + "'");
    write_csv(f, rows);
  }
  if (!c.jsonl.empty()) {
    std::ofstream f(c.jsonl);
    if (!f) throw ConfigError("cannot write '" + c.jsonl + "'");
    write_jsonl(f, recs);
  }
}

Point2 point(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a point [x, y]");
  return Point2(j[0].get<double>(), j[1].get<double>());
}

std::vector<double> descending(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

json locate_file(const std::string& path, const ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("range-set file: ") + e.what());
  }
  const std::string mode = j.value("mode", "passive");
  if (mode != "passive" && mode != "active") throw ConfigError("mode must be passive or active");
  const Point2 bs = point(j.at("bs"));
  RangeSets r;
  r.d_bt = descending(j.at("d_bt").get<std::vector<double>>());
  std::vector<Point2> reported;
  for (const auto& u : j.at("ues")) {
    UeRangeSet s;
    s.ue = u.at("id").get<int>();
    if (s.ue < 0) throw ConfigError("UE ids must be non-negative");
    s.d_btu = descending(u.at("d_btu").get<std::vector<double>>());
    if (u.contains("d_ut")) {
      s.d_ut = descending(u.at("d_ut").get<std::vector<double>>());
      s.has_uplink = true;
    }
    if (static_cast<std::size_t>(s.ue) >= reported.size()) reported.resize(s.ue + 1, Point2::Zero());
    reported[s.ue] = point(u.at("reported"));
    r.ues.push_back(std::move(s));
  }
  std::sort(r.ues.begin(), r.ues.end(), [](const auto& a, const auto& b) { return a.ue < b.ue; });

  AssocSolution sol;
  if (mode == "active") {
    ActivePruneConfig pc = cfg.prune;
    pc.gamma_th = cfg.resolved_gamma_th();
    sol = localize_multi_target_active(r, bs, reported, cfg.selection, pc, cfg.gn);
  } else {
    sol = localize_multi_target(r, bs, reported, cfg.selection, cfg.gn);
  }
  json out;
  out["validated"] = sol.validated;
  out["effective_set"] = sol.effective_set;
  out["pruned"] = sol.pruned;
  out["hypotheses"] = sol.stats.hypotheses;
  json targets = json::array();
  for (const auto& t : sol.targets) {
    json tj;
    tj["target"] = t.target;
    tj["bs_range"] = r.d_bt[t.target];
    tj["localized"] = t.localized;
    if (t.localized) {
      tj["position"] = {t.position.x(), t.position.y()};
      tj["theta_norm"] = t.theta_norm;
      tj["ues"] = t.ues;
      tj["g"] = t.g;
    }
    targets.push_back(tj);
  }
  out["targets"] = targets;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UE-assisted multi-target localization: simulation and estimation"};
  app.require_subcommand(1);

  Common sim;
  auto* simulate = app.add_subcommand("simulate", "run one configuration and print a summary row");
  Common swp;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "run one configuration per axis value");
  for (auto [cmd, c] : {std::pair{simulate, &sim}, std::pair{sweep, &swp}}) {
    cmd->add_option("-c,--config", c->config, "INI configuration file");
    cmd->add_option("-t,--trials", c->trials, "override experiment.trials");
    cmd->add_option("--seed", c->seed, "override experiment.base_seed");
    cmd->add_option("--scheme", c->scheme, "override experiment.scheme");
    cmd->add_option("--jsonl", c->jsonl, "write per-trial records to this file");
    cmd->add_option("-o,--out", c->out, "write the CSV here instead of stdout");
  }
  sweep->add_option("--axis", axis, "num_ineffective | num_ue | uplink_bandwidth | scheme | bs_power")
      ->required();
  sweep->add_option("--values", values, "axis values")->required()->delimiter(',');

  std::string input;
  std::string locate_config;
  auto* locate = app.add_subcommand("locate", "localize targets from a JSON range-set file");
  locate->add_option("input", input, "range-set JSON file")->required();
  locate->add_option("-c,--config", locate_config, "INI configuration file");

  auto* check = app.add_subcommand("oracle-check", "run the brute-force reference checks");

  auto* dump = app.add_subcommand("config", "print the effective configuration");
  std::string dump_config;
  dump->add_option("-c,--config", dump_config, "INI configuration file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const ExperimentConfig cfg = resolve(sim);
      std::vector<TrialRecord> recs;
      SweepRow row;
      row.axis_value = "-";
      row.scheme = cfg.scheme;
      row.summary = run_monte_carlo(cfg, sim.jsonl.empty() ? nullptr : &recs);
      emit(sim, {row}, recs);
    } else if (*sweep) {
      const ExperimentConfig cfg = resolve(swp);
      std::vector<TrialRecord> recs;
      const auto rows = run_sweep(cfg, parse_sweep_axis(axis), values, swp.jsonl.empty() ? nullptr : &recs);
      emit(swp, rows, recs);
    } else if (*locate) {
      const ExperimentConfig cfg = locate_config.empty() ? ExperimentConfig{} : load_config(locate_config);
      std::cout << locate_file(input, cfg).dump(2) << '\n';
    } else if (*check) {
      return oracle::run_all_checks(std::cout) == 0 ? 0 : 1;
    } else if (*dump) {
      write_config(std::cout, dump_config.empty() ? ExperimentConfig{} : load_config(dump_config));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InstanceTooLargeError& e) {
    std::cerr << "instance too large: " << e.what() << '\n';
    return kExitTooLarge;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
