#pragma once

#include <optional>
#include <vector>

#include "ueloc/scene.hpp"
#include "ueloc/waveform.hpp"

namespace ueloc {

struct StoEstimate {
  int los_tap_observed = 0;   // minimum of the recovered downlink support
  int los_tap_predicted = 0;  // from the GPS-reported position
  int sto_hat = 0;            // observed - predicted
};

// c0 / (2 N df): round-trip range per tap, also the one-way bistatic half-bin.
double range_bin_width(const OfdmConfig& cfg, double c0 = kSpeedOfLight);

// l c0/(2 N df) + c0/(4 N df)
double range_from_monostatic_tap(int l, const OfdmConfig& cfg, double c0 = kSpeedOfLight);

// floor(N df |b - u_hat| / c0)
int predicted_los_tap(const Point2& bs, const Point2& ue_reported, const OfdmConfig& cfg,
                      double c0 = kSpeedOfLight);

// Minimum of an ascending support. Throws NoLosDetectedError on an empty support.
int detect_los_tap(const std::vector<int>& support);

StoEstimate estimate_sto(int los_observed, int los_predicted);

// (l - sto_hat) c0/(N df) + c0/(2 N df); nullopt when the corrected tap is negative.
std::optional<double> range_from_bistatic_tap(int l, int sto_hat, const OfdmConfig& cfg,
                                              double c0 = kSpeedOfLight);

// Self-sensing echo on the uplink band: l c0/(2 N_u df_u) + c0/(4 N_u df_u).
// nullopt for l = 0 (self-leakage).
std::optional<double> range_from_uplink_tap(int l, const OfdmConfig& cfg_ul,
                                            double c0 = kSpeedOfLight);

struct UtRange {
  double value = 0.0;
  bool feasible = true;  // false when value <= 0
};

UtRange ut_from_btu(double d_btu_hat, double d_bt_hat);

struct UeRangeSet {
  int ue = 0;
  StoEstimate sto;
  std::vector<double> d_btu;  // descending
  std::vector<int> btu_taps;  // STO-corrected taps, aligned with d_btu
  std::vector<double> d_ut;   // descending; filled in active mode only
  bool has_uplink = false;
};

struct RangeSets {
  std::vector<double> d_bt;  // descending
  std::vector<int> d_bt_taps;
  std::vector<UeRangeSet> ues;  // ascending UE index

  int num_targets() const { return static_cast<int>(d_bt.size()); }
  // nullptr when the UE was dropped.
  const UeRangeSet* find(int ue) const;
};

struct UeSupport {
  int ue = 0;
  std::vector<int> downlink;  // ascending support of the extended downlink channel
  StoEstimate sto;
  std::optional<std::vector<int>> uplink;  // ascending support of the self channel
};

// Builds the descending range sets. The LOS tap is removed from each downlink support;
// taps whose STO-corrected index is negative are discarded, and a UE left with no
// bistatic range is dropped.
RangeSets assemble_range_sets(const std::vector<int>& bs_support, const std::vector<UeSupport>& ues,
                              const OfdmConfig& cfg_dl, const std::optional<OfdmConfig>& cfg_ul,
                              double c0 = kSpeedOfLight);

}  // namespace ueloc
