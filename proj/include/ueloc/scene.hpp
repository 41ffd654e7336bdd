#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace ueloc {

using Point2 = Eigen::Vector2d;

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct ScenarioConfig {
  double area_side = 100.0;  // m
  int num_ue = 5;
  int num_targets = 2;
  int num_effective = 3;
  double gps_sigma_effective = -20.0;   // dBm^2, per-axis variance
  double gps_sigma_ineffective = 20.0;  // dBm^2
  double rcs = -10.0;                   // dBm^2
  double pathloss_ref_db = -20.0;       // beta_0
  double pathloss_ref_dist = 1.0;       // d_0, m
  double pathloss_exponent = 2.0;       // alpha
  double speed_of_light = kSpeedOfLight;
  // Scenes with any target closer than this to the BS or a UE are redrawn.
  double min_separation = 1.0;

  // Throws ConfigError.
  void validate() const;
};

// Variance in m^2 from a dBm^2 figure: 10^(x/10).
double dbm2_to_m2(double dbm2);

struct Scenario {
  Point2 bs;
  std::vector<Point2> ue_true;
  std::vector<Point2> ue_reported;  // ue_true + GPS error
  std::vector<bool> ue_effective;
  std::vector<Point2> targets;
  std::vector<int> sto;  // tau_m in downlink sample periods

  int num_ue() const { return static_cast<int>(ue_true.size()); }
  int num_targets() const { return static_cast<int>(targets.size()); }
};

// Extra placement rules supplied by the caller that owns the waveform numerology.
struct SceneConstraints {
  int max_abs_sto = 0;
  // N*df of the downlink. When positive, each tau_m is redrawn until the
  // extended LOS tap floor(N*df*|b-u_m|/c0) + tau_m is non-negative.
  double sample_rate = 0.0;
};

// Uniform placement over [0, area_side]^2, isotropic Gaussian GPS errors,
// integer STOs uniform on [-max_abs_sto, max_abs_sto]. Effective UEs are a
// uniformly random subset of size num_effective. Deterministic in seed.
Scenario generate_scenario(const ScenarioConfig& config, const SceneConstraints& constraints,
                           std::uint64_t seed);

struct TrueRangeTable {
  std::vector<double> d_bt;  // per target
  Eigen::MatrixXd d_ut;      // UE x target
  Eigen::MatrixXd d_btu;     // UE x target, d_bt + d_ut
};

TrueRangeTable true_ranges(const Scenario& s);

// beta_0 * (d/d_0)^-alpha as a linear power gain. Throws DegenerateGeometryError for d <= 0.
double path_gain(double d, const ScenarioConfig& config);

// Transmitter-target-receiver power gain: path_gain(d1) * rcs * path_gain(d2).
double cascaded_gain(double d1, double d2, const ScenarioConfig& config);

}  // namespace ueloc
