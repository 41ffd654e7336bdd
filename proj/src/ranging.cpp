#include "ueloc/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ueloc/errors.hpp"

namespace ueloc {

double range_bin_width(const OfdmConfig& cfg, double c0) { return c0 / (2.0 * cfg.sample_rate()); }

double range_from_monostatic_tap(int l, const OfdmConfig& cfg, double c0) {
  const double w = range_bin_width(cfg, c0);
  return l * w + 0.5 * w;
}

int predicted_los_tap(const Point2& bs, const Point2& ue_reported, const OfdmConfig& cfg, double c0) {
  return static_cast<int>(std::floor(cfg.sample_rate() * (bs - ue_reported).norm() / c0));
}

int detect_los_tap(const std::vector<int>& support) {
  if (support.empty()) throw NoLosDetectedError("empty downlink support");
  return *std::min_element(support.begin(), support.end());
}

StoEstimate estimate_sto(int los_observed, int los_predicted) {
  return {los_observed, los_predicted, los_observed - los_predicted};
}

std::optional<double> range_from_bistatic_tap(int l, int sto_hat, const OfdmConfig& cfg, double c0) {
  const int corrected = l - sto_hat;
  if (corrected < 0) return std::nullopt;
  const double w = c0 / cfg.sample_rate();
  return corrected * w + 0.5 * w;
}

std::optional<double> range_from_uplink_tap(int l, const OfdmConfig& cfg_ul, double c0) {
  if (l <= 0) return std::nullopt;
  return range_from_monostatic_tap(l, cfg_ul, c0);
}

UtRange ut_from_btu(double d_btu_hat, double d_bt_hat) {
  const double v = d_btu_hat - d_bt_hat;
  return {v, v > 0.0};
}

const UeRangeSet* RangeSets::find(int ue) const {
  auto it = std::lower_bound(ues.begin(), ues.end(), ue,
                             [](const UeRangeSet& s, int id) { return s.ue < id; });
  return it != ues.end() && it->ue == ue ? &*it : nullptr;
}

namespace {

// Sorts (range, tap) pairs by descending range; equal ranges keep the earlier tap first.
void sort_descending(std::vector<double>& ranges, std::vector<int>& taps) {
  std::vector<std::size_t> order(ranges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ranges[a] != ranges[b]) return ranges[a] > ranges[b];
    return taps[a] < taps[b];
  });
  std::vector<double> r;
  std::vector<int> t;
  for (auto i : order) {
    r.push_back(ranges[i]);
    t.push_back(taps[i]);
  }
  ranges = std::move(r);
  taps = std::move(t);
}

}  // namespace

RangeSets assemble_range_sets(const std::vector<int>& bs_support, const std::vector<UeSupport>& ues,
                              const OfdmConfig& cfg_dl, const std::optional<OfdmConfig>& cfg_ul,
                              double c0) {
  RangeSets out;
  for (int l : bs_support) {
    out.d_bt.push_back(range_from_monostatic_tap(l, cfg_dl, c0));
    out.d_bt_taps.push_back(l);
  }
  sort_descending(out.d_bt, out.d_bt_taps);

  for (const auto& u : ues) {
    UeRangeSet s;
    s.ue = u.ue;
    s.sto = u.sto;
    for (int l : u.downlink) {
      if (l == u.sto.los_tap_observed) continue;
      if (auto d = range_from_bistatic_tap(l, u.sto.sto_hat, cfg_dl, c0)) {
        s.d_btu.push_back(*d);
        s.btu_taps.push_back(l - u.sto.sto_hat);
      }
    }
    if (s.d_btu.empty()) continue;
    sort_descending(s.d_btu, s.btu_taps);
    if (u.uplink && cfg_ul) {
      s.has_uplink = true;
      for (int l : *u.uplink)
        if (auto d = range_from_uplink_tap(l, *cfg_ul, c0)) s.d_ut.push_back(*d);
      std::sort(s.d_ut.begin(), s.d_ut.end(), std::greater<>());
    }
    out.ues.push_back(std::move(s));
  }
  std::sort(out.ues.begin(), out.ues.end(),
            [](const UeRangeSet& a, const UeRangeSet& b) { return a.ue < b.ue; });
  return out;
}

}  // namespace ueloc
