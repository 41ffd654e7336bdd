#include "ueloc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ueloc/errors.hpp"

namespace ueloc {

void ScenarioConfig::validate() const {
  if (!(area_side > 0.0)) throw ConfigError("scenario.area_side must be positive");
  if (num_ue < 0) throw ConfigError("scenario.num_ue must be non-negative");
  if (num_targets < 0) throw ConfigError("scenario.num_targets must be non-negative");
  if (num_effective < 0 || num_effective > num_ue)
    throw ConfigError("scenario.num_effective must lie in [0, num_ue]");
  if (!(pathloss_exponent > 0.0)) throw ConfigError("scenario.pathloss_exponent must be positive");
  if (!(pathloss_ref_dist > 0.0)) throw ConfigError("scenario.pathloss_ref_dist must be positive");
  if (!(speed_of_light > 0.0)) throw ConfigError("scenario.speed_of_light must be positive");
  if (min_separation < 0.0 || min_separation * std::sqrt(2.0) >= area_side)
    throw ConfigError("scenario.min_separation out of range");
}

double dbm2_to_m2(double dbm2) { return std::pow(10.0, dbm2 / 10.0); }

namespace {

bool separated(const Scenario& s, double min_sep) {
  for (const auto& a : s.targets) {
    if ((a - s.bs).norm() < min_sep) return false;
    for (const auto& u : s.ue_true)
      if ((a - u).norm() < min_sep) return false;
  }
  return true;
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& config, const SceneConstraints& constraints,
                           std::uint64_t seed) {
  config.validate();
  if (constraints.max_abs_sto < 0) throw ConfigError("max_abs_sto must be non-negative");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, config.area_side);
  auto draw_point = [&] { return Point2(coord(rng), coord(rng)); };

  Scenario s;
  const int M = config.num_ue;
  const int K = config.num_targets;
  do {
    s.bs = draw_point();
    s.ue_true.resize(M);
    s.targets.resize(K);
    for (auto& u : s.ue_true) u = draw_point();
    for (auto& a : s.targets) a = draw_point();
  } while (!separated(s, config.min_separation));

  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  s.ue_effective.assign(M, false);
  for (int i = 0; i < config.num_effective; ++i) s.ue_effective[order[i]] = true;

  const double sd_eff = std::sqrt(dbm2_to_m2(config.gps_sigma_effective));
  const double sd_ineff = std::sqrt(dbm2_to_m2(config.gps_sigma_ineffective));
  std::normal_distribution<double> gauss(0.0, 1.0);
  s.ue_reported.resize(M);
  for (int m = 0; m < M; ++m) {
    const double sd = s.ue_effective[m] ? sd_eff : sd_ineff;
    const double dx = gauss(rng);
    const double dy = gauss(rng);
    s.ue_reported[m] = s.ue_true[m] + sd * Point2(dx, dy);
  }

  std::uniform_int_distribution<int> sto(-constraints.max_abs_sto, constraints.max_abs_sto);
  s.sto.resize(M);
  for (int m = 0; m < M; ++m) {
    const int los = constraints.sample_rate > 0.0
                        ? static_cast<int>(std::floor(constraints.sample_rate *
                                                      (s.bs - s.ue_true[m]).norm() /
                                                      config.speed_of_light))
                        : constraints.max_abs_sto;
    do {
      s.sto[m] = sto(rng);
    } while (los + s.sto[m] < 0);
  }
  return s;
}

TrueRangeTable true_ranges(const Scenario& s) {
  TrueRangeTable t;
  const int M = s.num_ue();
  const int K = s.num_targets();
  t.d_bt.resize(K);
  t.d_ut.resize(M, K);
  t.d_btu.resize(M, K);
  for (int k = 0; k < K; ++k) t.d_bt[k] = (s.bs - s.targets[k]).norm();
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) {
      t.d_ut(m, k) = (s.ue_true[m] - s.targets[k]).norm();
      t.d_btu(m, k) = t.d_bt[k] + t.d_ut(m, k);
    }
  }
  return t;
}

double path_gain(double d, const ScenarioConfig& config) {
  if (!(d > 0.0))
    throw DegenerateGeometryError("path gain requested at non-positive distance " +
                                  std::to_string(d));
  return std::pow(10.0, config.pathloss_ref_db / 10.0) *
         std::pow(d / config.pathloss_ref_dist, -config.pathloss_exponent);
}

double cascaded_gain(double d1, double d2, const ScenarioConfig& config) {
  return path_gain(d1, config) * dbm2_to_m2(config.rcs) * path_gain(d2, config);
}

}  // namespace ueloc
