#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ueloc/errors.hpp"
#include "ueloc/oracle.hpp"
#include "ueloc/ranging.hpp"
#include "ueloc/sparse.hpp"

using namespace ueloc;

namespace {

constexpr double kC = 3e8;

OfdmConfig band(int n, double df) {
  OfdmConfig c;
  c.num_subcarriers = n;
  c.subcarrier_spacing = df;
  c.max_paths = std::min(400, n - 10);
  c.cp_len = c.max_paths + 20;
  return c;
}

const OfdmConfig kHand = band(1000, 1e5);  // 1e8 Hz
const OfdmConfig kUl = [] {
  OfdmConfig c = band(200, 1e5);  // 2e7 Hz
  c.max_abs_sto = 0;
  return c;
}();

}  // namespace

TEST(Ranging, MonostaticHandValues) {
  EXPECT_DOUBLE_EQ(range_from_monostatic_tap(2, kHand, kC), 3.75);
  EXPECT_DOUBLE_EQ(range_from_monostatic_tap(0, kHand, kC), 0.75);
  EXPECT_DOUBLE_EQ(range_bin_width(kHand, kC), 1.5);
}

TEST(Ranging, PredictedLosTap) {
  EXPECT_EQ(predicted_los_tap({0, 0}, {300, 400}, kHand, kC), 166);
  EXPECT_EQ(predicted_los_tap({7, 7}, {7, 7}, kHand, kC), 0);
}

TEST(Ranging, PredictedLosTapIsFloorLipschitz) {
  const Point2 bs(0, 0);
  const double w = kC / kHand.sample_rate();
  for (int i = 0; i < 200; ++i) {
    const Point2 u(150.0 + 0.37 * i, 80.0 + 0.11 * i);
    const Point2 dir = u.normalized();
    for (double f : {-0.99, -0.5, 0.3, 0.99}) {
      const int a = predicted_los_tap(bs, u, kHand, kC);
      const int b = predicted_los_tap(bs, u + f * w * dir, kHand, kC);
      EXPECT_LE(std::abs(a - b), 1);
    }
  }
}

TEST(Ranging, LosDetection) {
  EXPECT_EQ(detect_los_tap({170, 240, 311}), 170);
  EXPECT_EQ(detect_los_tap({5}), 5);
  EXPECT_THROW(detect_los_tap({}), NoLosDetectedError);
}

TEST(Ranging, StoSubtraction) {
  EXPECT_EQ(estimate_sto(170, 166).sto_hat, 4);
  EXPECT_EQ(estimate_sto(93, 93).sto_hat, 0);
  EXPECT_EQ(estimate_sto(2, 9).sto_hat, -7);
}

TEST(Ranging, BistaticHandValues) {
  EXPECT_DOUBLE_EQ(*range_from_bistatic_tap(10, 2, kHand, kC), 25.5);
  EXPECT_DOUBLE_EQ(*range_from_bistatic_tap(6, 6, kHand, kC), 1.5);
  EXPECT_FALSE(range_from_bistatic_tap(3, 4, kHand, kC).has_value());
}

TEST(Ranging, UplinkHandValues) {
  EXPECT_DOUBLE_EQ(*range_from_uplink_tap(2, kUl, kC), 18.75);
  EXPECT_FALSE(range_from_uplink_tap(0, kUl, kC).has_value());
  OfdmConfig ul20;
  ul20.num_subcarriers = 1600;
  ul20.subcarrier_spacing = 12.5e3;
  EXPECT_NEAR(range_bin_width(ul20, kC), 7.5, 1e-12);
  OfdmConfig dl;
  EXPECT_NEAR(range_bin_width(dl, kC), 0.3788, 1e-4);
  EXPECT_NEAR(range_bin_width(ul20, kC) / range_bin_width(dl, kC), 19.8, 1e-9);
}

TEST(Ranging, UtFromBtu) {
  const UtRange r = ut_from_btu(25.5, 10.0);
  EXPECT_DOUBLE_EQ(r.value, 15.5);
  EXPECT_TRUE(r.feasible);
  EXPECT_FALSE(ut_from_btu(4.0, 4.0).feasible);
  const Scenario s = [] {
    Scenario x;
    x.bs = {1.5, -3.0};
    x.ue_true = {{40.1, 7.7}};
    x.targets = {{-12.25, 19.0}};
    return x;
  }();
  const TrueRangeTable t = true_ranges(s);
  EXPECT_DOUBLE_EQ(ut_from_btu(t.d_btu(0, 0), t.d_bt[0]).value, t.d_ut(0, 0));
}

TEST(Ranging, QuantizationBoundsExhaustive) {
  const double mono = kC / (4.0 * kHand.sample_rate());
  const double bi = kC / (2.0 * kHand.sample_rate());
  for (int l : {0, 1, 17, 166, 399}) {
    EXPECT_LE(oracle::monostatic_bin_error(l, kHand, kC, 4000), mono * (1.0 + 1e-12));
    for (int tau : {-10, 0, 7})
      EXPECT_LE(oracle::bistatic_bin_error(l, tau, kHand, kC, 4000), bi * (1.0 + 1e-12));
  }
}

TEST(Assemble, BsRangesDescending) {
  const RangeSets r = assemble_range_sets({2, 7}, {}, kHand, std::nullopt, kC);
  ASSERT_EQ(r.num_targets(), 2);
  EXPECT_DOUBLE_EQ(r.d_bt[0], range_from_monostatic_tap(7, kHand, kC));
  EXPECT_DOUBLE_EQ(r.d_bt[1], range_from_monostatic_tap(2, kHand, kC));
  EXPECT_EQ(r.d_bt_taps, (std::vector<int>{7, 2}));
}

TEST(Assemble, LosExcludedAndNegativeDropped) {
  UeSupport a{0, {170, 240}, estimate_sto(170, 166), std::nullopt};
  UeSupport b{1, {12, 14}, estimate_sto(12, 5), std::nullopt};  // 14 - 7 = 7 kept
  UeSupport c{2, {3}, estimate_sto(3, 0), std::nullopt};        // nothing but the LOS
  const RangeSets r = assemble_range_sets({}, {c, a, b}, kHand, std::nullopt, kC);
  ASSERT_EQ(r.ues.size(), 2u);
  EXPECT_EQ(r.ues[0].ue, 0);
  EXPECT_EQ(r.ues[0].d_btu.size(), 1u);
  EXPECT_DOUBLE_EQ(r.ues[0].d_btu[0], *range_from_bistatic_tap(240, 4, kHand, kC));
  EXPECT_EQ(r.ues[1].btu_taps, std::vector<int>{7});
  EXPECT_EQ(r.find(2), nullptr);
  EXPECT_NE(r.find(1), nullptr);
}

TEST(Assemble, DescendingRetrieval) {
  UeSupport u{4, {50, 90, 61, 300, 75}, estimate_sto(50, 52), std::vector<int>{0, 9, 3, 5}};
  const RangeSets r = assemble_range_sets({}, {u}, kHand, kUl, kC);
  const UeRangeSet& s = r.ues.at(0);
  ASSERT_EQ(s.d_btu.size(), 4u);
  std::vector<double> sorted = s.d_btu;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t b = 0; b < sorted.size(); ++b) EXPECT_EQ(s.d_btu[b], sorted[b]);
  EXPECT_EQ(s.btu_taps.front(), 302);
  EXPECT_TRUE(s.has_uplink);
  EXPECT_EQ(s.d_ut.size(), 3u);
  EXPECT_DOUBLE_EQ(s.d_ut.front(), *range_from_uplink_tap(9, kUl, kC));
}

namespace {

// Noiseless Phase I for one scene: waveform synthesis, LASSO, STO, range sets.
struct NoiselessPhaseOne {
  RangeSets ranges;
  std::vector<StoEstimate> sto;
};

NoiselessPhaseOne run_noiseless(const Scenario& s, const ScenarioConfig& sc, const OfdmConfig& dl) {
  const SubcarrierSet rows = full_band(dl.num_subcarriers);
  static const LassoDesign bs_design = LassoDesign::dft(rows, dl.max_paths, dl.num_subcarriers);
  static const LassoDesign ue_design =
      LassoDesign::dft(rows, dl.extended_len(), dl.num_subcarriers);
  LassoConfig lc;
  lc.lambda_scale = 1e-9;
  lc.support_rel_threshold = 1e-9;
  const PathPhases ph = draw_path_phases(s.num_ue(), s.num_targets(), 3);
  const Eigen::VectorXcd pilot = qpsk_pilot(dl.num_subcarriers, 4);
  NoiselessPhaseOne out;
  const TapChannel bch = build_monostatic_channel(s, sc, ph.monostatic, dl);
  const auto bsup =
      solve_lasso(bs_design, strip_pilot(synthesize_rx(pilot, dl.tx_power, bch, dl, rows, 1)),
                  std::sqrt(dl.tx_power), lc)
          .support;
  std::vector<UeSupport> ues;
  for (int m = 0; m < s.num_ue(); ++m) {
    const TapChannel ch = build_downlink_channel(s, m, sc, ph.downlink[m], dl);
    UeSupport u;
    u.ue = m;
    u.downlink = solve_lasso(ue_design, strip_pilot(synthesize_rx(pilot, dl.tx_power, ch, dl, rows, 1)),
                             std::sqrt(dl.tx_power), lc)
                     .support;
    u.sto = estimate_sto(detect_los_tap(u.downlink),
                         predicted_los_tap(s.bs, s.ue_reported[m], dl, sc.speed_of_light));
    out.sto.push_back(u.sto);
    ues.push_back(u);
  }
  out.ranges = assemble_range_sets(bsup, ues, dl, std::nullopt, sc.speed_of_light);
  return out;
}

}  // namespace

TEST(StoExactness, NoiselessEffectiveUes) {
  ScenarioConfig sc;
  sc.num_ue = 4;
  sc.num_effective = 4;
  sc.num_targets = 2;
  OfdmConfig dl;
  dl.noise_power = 0.0;
  const double c0 = sc.speed_of_light;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Scenario s = generate_scenario(sc, {dl.max_abs_sto, dl.sample_rate()}, seed);
    const NoiselessPhaseOne p1 = run_noiseless(s, sc, dl);
    const TrueRangeTable truth = true_ranges(s);
    for (int m = 0; m < s.num_ue(); ++m) {
      const int truth_tap = predicted_los_tap(s.bs, s.ue_true[m], dl, c0);
      EXPECT_EQ(p1.sto[m].los_tap_observed, truth_tap + s.sto[m]);
      if (p1.sto[m].los_tap_predicted != truth_tap) continue;
      ++checked;
      EXPECT_EQ(p1.sto[m].sto_hat, s.sto[m]);
      const UeRangeSet* set = p1.ranges.find(m);
      ASSERT_NE(set, nullptr);
      for (double d : set->d_btu) {
        double best = 1e300;
        for (int k = 0; k < s.num_targets(); ++k) best = std::min(best, std::abs(d - truth.d_btu(m, k)));
        EXPECT_LE(best, c0 / (2.0 * dl.sample_rate()) * (1.0 + 1e-12));
      }
    }
  }
  EXPECT_GT(checked, 70);
}

TEST(StoExactness, PlantedTargetsGiveFullSets) {
  ScenarioConfig sc;
  sc.num_ue = 3;
  sc.num_effective = 3;
  sc.num_targets = 3;
  sc.gps_sigma_effective = -60.0;
  OfdmConfig dl;
  dl.noise_power = 0.0;
  int scenes = 0;
  for (std::uint64_t seed = 0; scenes < 10 && seed < 200; ++seed) {
    const Scenario s = generate_scenario(sc, {dl.max_abs_sto, dl.sample_rate()}, seed);
    const RangeSets q = oracle::quantized_ranges(s, dl, nullptr, sc.speed_of_light);
    // Only scenes whose taps are all distinct and clear of the LOS tap.
    bool distinct = q.num_targets() == 3;
    for (const auto& u : q.ues) distinct = distinct && u.d_btu.size() == 3;
    if (!distinct || static_cast<int>(q.ues.size()) != 3) continue;
    ++scenes;
    const NoiselessPhaseOne p1 = run_noiseless(s, sc, dl);
    EXPECT_EQ(p1.ranges.d_bt, q.d_bt);
    ASSERT_EQ(p1.ranges.ues.size(), 3u);
    for (int m = 0; m < 3; ++m) EXPECT_EQ(p1.ranges.ues[m].d_btu, q.ues[m].d_btu);
  }
  EXPECT_EQ(scenes, 10);
}
