#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "ueloc/errors.hpp"
#include "ueloc/harness.hpp"

namespace ueloc {

namespace {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string shortest(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis_value,scheme,trials,loc_error_prob,sto_error_prob,mean_wall_time_s,mean_hypotheses\n";
  for (const auto& r : rows) {
    os << r.axis_value << ',' << to_string(r.scheme) << ',' << r.summary.trials << ','
       << fixed6(r.summary.localization_error_prob()) << ',' << fixed6(r.summary.sto_error_prob())
       << ',' << shortest(r.summary.mean_wall_time_s()) << ','
       << shortest(r.summary.mean_hypotheses()) << '\n';
  }
}

void write_jsonl(std::ostream& os, const std::vector<TrialRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j;
    j["trial_id"] = r.trial_id;
    nlohmann::json err = nlohmann::json::array();
    for (double e : r.position_error) {
      if (std::isnan(e))
        err.push_back(nullptr);
      else
        err.push_back(e);
    }
    j["position_error"] = err;
    j["error_event"] = r.error_event;
    j["sto_all_correct"] = r.sto_all_correct;
    j["wall_time_s"] = r.wall_time_s;
    j["hypothesis_count"] = r.hypothesis_count;
    j["effective_set_correct"] = r.effective_set_correct;
    j["detected_targets"] = r.detected_targets;
    j["validated"] = r.validated;
    if (!r.failure.empty()) j["failure"] = r.failure;
    os << j.dump() << '\n';
  }
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using FieldTable = std::map<std::string, std::map<std::string, Field>>;

template <class T>
Field real(T ExperimentConfig::*part, double T::*member) {
  return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*part.*member = to_double(k, v);
          },
          [=](const ExperimentConfig& c) { return shortest(c.*part.*member); }};
}

template <class T>
Field integer(T ExperimentConfig::*part, int T::*member) {
  return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
            const long long x = to_integer(k, v);
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
              throw ConfigError(k + ": out of range");
            c.*part.*member = static_cast<int>(x);
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.*part.*member); }};
}

template <class T>
Field flag(T ExperimentConfig::*part, bool T::*member) {
  return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*part.*member = to_bool(k, v);
          },
          [=](const ExperimentConfig& c) { return std::string(c.*part.*member ? "true" : "false"); }};
}

void add_ofdm(FieldTable& t, const std::string& section, OfdmConfig ExperimentConfig::*part) {
  auto& s = t[section];
  s["num_subcarriers"] = integer(part, &OfdmConfig::num_subcarriers);
  s["subcarrier_spacing"] = real(part, &OfdmConfig::subcarrier_spacing);
  s["cp_len"] = integer(part, &OfdmConfig::cp_len);
  s["tx_power"] = real(part, &OfdmConfig::tx_power);
  s["noise_power"] = real(part, &OfdmConfig::noise_power);
  s["max_paths"] = integer(part, &OfdmConfig::max_paths);
  s["max_abs_sto"] = integer(part, &OfdmConfig::max_abs_sto);
}

const FieldTable& fields() {
  static const FieldTable table = [] {
    FieldTable t;
    using E = ExperimentConfig;
    auto& sc = t["scenario"];
    sc["area_side"] = real(&E::scenario, &ScenarioConfig::area_side);
    sc["num_ue"] = integer(&E::scenario, &ScenarioConfig::num_ue);
    sc["num_targets"] = integer(&E::scenario, &ScenarioConfig::num_targets);
    sc["num_effective"] = integer(&E::scenario, &ScenarioConfig::num_effective);
    sc["gps_sigma_effective"] = real(&E::scenario, &ScenarioConfig::gps_sigma_effective);
    sc["gps_sigma_ineffective"] = real(&E::scenario, &ScenarioConfig::gps_sigma_ineffective);
    sc["rcs"] = real(&E::scenario, &ScenarioConfig::rcs);
    sc["pathloss_ref_db"] = real(&E::scenario, &ScenarioConfig::pathloss_ref_db);
    sc["pathloss_ref_dist"] = real(&E::scenario, &ScenarioConfig::pathloss_ref_dist);
    sc["pathloss_exponent"] = real(&E::scenario, &ScenarioConfig::pathloss_exponent);
    sc["speed_of_light"] = real(&E::scenario, &ScenarioConfig::speed_of_light);
    sc["min_separation"] = real(&E::scenario, &ScenarioConfig::min_separation);

    add_ofdm(t, "ofdm_dl", &E::ofdm_dl);
    add_ofdm(t, "ofdm_ul", &E::ofdm_ul);

    auto& la = t["lasso"];
    la["lambda_scale"] = real(&E::lasso, &LassoConfig::lambda_scale);
    la["tol"] = real(&E::lasso, &LassoConfig::tol);
    la["max_iter"] = integer(&E::lasso, &LassoConfig::max_iter);
    la["support_rel_threshold"] = real(&E::lasso, &LassoConfig::support_rel_threshold);
    la["noise_floor_factor"] = real(&E::lasso, &LassoConfig::noise_floor_factor);
    la["lambda"] = {[](E& c, const std::string& k, const std::string& v) {
                      if (v == "auto")
                        c.lasso.lambda.reset();
                      else
                        c.lasso.lambda = to_double(k, v);
                    },
                    [](const E& c) { return c.lasso.lambda ? shortest(*c.lasso.lambda) : "auto"; }};

    auto& gn = t["gn"];
    gn["max_iter"] = integer(&E::gn, &GNConfig::max_iter);
    gn["step_tol"] = real(&E::gn, &GNConfig::step_tol);
    gn["num_starts"] = integer(&E::gn, &GNConfig::num_starts);
    gn["damping_floor"] = real(&E::gn, &GNConfig::damping_floor);
    gn["bs_weight"] = real(&E::gn, &GNConfig::bs_weight);

    auto& se = t["selection"];
    se["theta_th"] = real(&E::selection, &SelectionConfig::theta_th);
    se["theta_bar_th"] = real(&E::selection, &SelectionConfig::theta_bar_th);
    se["min_ue_anchors"] = integer(&E::selection, &SelectionConfig::min_ue_anchors);
    se["select_ues"] = flag(&E::selection, &SelectionConfig::select_ues);
    se["recheck"] = flag(&E::selection, &SelectionConfig::recheck);
    se["wrap_check"] = flag(&E::selection, &SelectionConfig::wrap_check);
    se["prefer_more_anchors"] = flag(&E::selection, &SelectionConfig::prefer_more_anchors);
    se["max_hypotheses"] = {[](E& c, const std::string& k, const std::string& v) {
                              const long long x = to_integer(k, v);
                              if (x <= 0) throw ConfigError(k + ": must be positive");
                              c.selection.max_hypotheses = static_cast<std::size_t>(x);
                            },
                            [](const E& c) { return std::to_string(c.selection.max_hypotheses); }};

    t["prune"]["gamma_th"] = real(&E::prune, &ActivePruneConfig::gamma_th);

    auto& ex = t["experiment"];
    ex["scheme"] = {[](E& c, const std::string&, const std::string& v) { c.scheme = parse_scheme(v); },
                    [](const E& c) { return to_string(c.scheme); }};
    ex["trials"] = {[](E& c, const std::string& k, const std::string& v) {
                      const long long x = to_integer(k, v);
                      if (x < 1 || x > std::numeric_limits<int>::max())
                        throw ConfigError(k + ": out of range");
                      c.trials = static_cast<int>(x);
                    },
                    [](const E& c) { return std::to_string(c.trials); }};
    ex["base_seed"] = {[](E& c, const std::string& k, const std::string& v) {
                         std::uint64_t x = 0;
                         auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
                         if (ec != std::errc() || p != v.data() + v.size())
                           throw ConfigError(k + ": expected an unsigned integer, got '" + v + "'");
                         c.base_seed = x;
                       },
                       [](const E& c) { return std::to_string(c.base_seed); }};
    ex["error_radius"] = {[](E& c, const std::string& k, const std::string& v) {
                            c.error_radius = to_double(k, v);
                          },
                          [](const E& c) { return shortest(c.error_radius); }};
    ex["phase1_only"] = {[](E& c, const std::string& k, const std::string& v) {
                           c.phase1_only = to_bool(k, v);
                         },
                         [](const E& c) { return std::string(c.phase1_only ? "true" : "false"); }};
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig cfg;
  const FieldTable& table = fields();
  for (const auto& [section, body] : pt) {
    auto sit = table.find(section);
    if (sit == table.end()) {
      if (body.empty()) throw ConfigError("key outside any section: '" + section + "'");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      auto kit = sit->second.find(key);
      if (kit == sit->second.end())
        throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
      kit->second.set(cfg, section + "." + key, node.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  static const char* const order[] = {"scenario", "ofdm_dl",   "ofdm_ul", "lasso",
                                      "gn",       "selection", "prune",   "experiment"};
  const FieldTable& table = fields();
  bool first = true;
  for (const char* section : order) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [key, field] : table.at(section)) os << key << " = " << field.get(cfg) << '\n';
  }
}

}  // namespace ueloc
