// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// UELOC_THREADS controls the Monte Carlo worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "ueloc/assoc.hpp"
#include "ueloc/harness.hpp"
#include "ueloc/locate.hpp"
#include "ueloc/oracle.hpp"
#include "ueloc/ranging.hpp"
#include "ueloc/scene.hpp"
#include "ueloc/sparse.hpp"
#include "ueloc/waveform.hpp"

using namespace ueloc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

// Standard error of a difference between two independent binomial estimates.
double se_diff(const MetricsSummary& a, const MetricsSummary& b) {
  return std::hypot(a.localization_error_se(), b.localization_error_se());
}

ExperimentConfig quiet(ExperimentConfig cfg) {
  cfg.ofdm_dl.noise_power = 1e-30;
  cfg.ofdm_ul.noise_power = 1e-30;
  return cfg;
}

MetricsSummary run(const ExperimentConfig& cfg, Scheme scheme, int trials,
                   std::vector<TrialRecord>* recs = nullptr) {
  ExperimentConfig c = cfg;
  c.scheme = scheme;
  c.trials = trials;
  return run_monte_carlo(c, recs);
}

// 1. STO recovery on noiseless scenes.
Outcome sto_exactness() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = quiet(ExperimentConfig{});
  const ExperimentContext ctx(cfg);
  long eligible = 0;
  long exact = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const Scenario s = trial_scenario(cfg, t);
    const PhaseOneOutput p1 = run_phase_one(ctx, s, cfg.base_seed ^ t, {});
    for (int m = 0; m < s.num_ue(); ++m) {
      if (!p1.sto[m] || p1.sto[m]->los_tap_predicted != p1.true_los_tap[m]) continue;
      ++eligible;
      if (p1.sto[m]->sto_hat == s.sto[m]) ++exact;
    }
  }
  const double frac = eligible ? static_cast<double>(exact) / eligible : 0.0;
  const double dt = seconds_since(t0);
  return {eligible > 0 && frac >= 0.99 && dt < 60.0,
          std::to_string(exact) + "/" + std::to_string(eligible) + " UEs exact (" + fmt(frac) +
              "), " + fmt(dt, 3) + " s"};
}

// 2. STO error probability grows with the UE count; more BS power does not hurt.
Outcome sto_trend() {
  ExperimentConfig base;
  base.phase1_only = true;
  const std::vector<int> ms{2, 4, 6, 8};
  std::vector<std::vector<MetricsSummary>> curves;
  for (double power : {15.0, 20.0}) {
    std::vector<MetricsSummary> curve;
    for (int m : ms) {
      ExperimentConfig c = base;
      c.ofdm_dl.tx_power = power;
      c.scenario.num_ue = m;
      c.scenario.num_effective = m;
      curve.push_back(run(c, Scheme::proposed_passive, 1000));
    }
    curves.push_back(curve);
  }
  bool ok = true;
  std::string detail;
  for (std::size_t p = 0; p < curves.size(); ++p) {
    const auto& c = curves[p];
    int inversions = 0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      const double drop = c[i].sto_error_prob() - c[i + 1].sto_error_prob();
      if (drop > 0.0) {
        ++inversions;
        if (drop > std::hypot(c[i].sto_error_se(), c[i + 1].sto_error_se())) ok = false;
      }
    }
    if (inversions > 1) ok = false;
    detail += (p == 0 ? "15W:" : " 20W:");
    for (const auto& s : c) detail += " " + fmt(s.sto_error_prob(), 3);
  }
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto& a = curves[0][i];
    const auto& b = curves[1][i];
    if (b.sto_error_prob() > a.sto_error_prob() + std::hypot(a.sto_error_se(), b.sto_error_se()))
      ok = false;
  }
  return {ok, detail};
}

// 3. Worst-case range error inside every tap bin. Errors are differences of ranges up
// to about 150 m, so the comparison allows rounding at the scale of the range itself.
Outcome quantization_bound() {
  const OfdmConfig dl;
  const double c0 = kSpeedOfLight;
  const double eps = std::numeric_limits<double>::epsilon();
  const double mono_bound = c0 / (4.0 * dl.sample_rate());
  const double bi_bound = c0 / (2.0 * dl.sample_rate());
  double mono = 0.0;
  double bi = 0.0;
  double excess_ulps = 0.0;  // worst (error - bound) in units of eps * range
  for (int l = 0; l < dl.max_paths; ++l) {
    const double e_mono = oracle::monostatic_bin_error(l, dl, c0, 64);
    mono = std::max(mono, e_mono);
    excess_ulps = std::max(excess_ulps, (e_mono - mono_bound) / (eps * (l + 1) * 2.0 * mono_bound));
    for (int tau = -dl.max_abs_sto; tau <= dl.max_abs_sto; ++tau) {
      const double e_bi = oracle::bistatic_bin_error(l, tau, dl, c0, 64);
      bi = std::max(bi, e_bi);
      excess_ulps = std::max(excess_ulps, (e_bi - bi_bound) / (eps * (l + 1) * 2.0 * bi_bound));
    }
  }
  return {excess_ulps <= 4.0,
          "monostatic " + fmt(mono, 9) + " vs " + fmt(mono_bound, 9) + ", bistatic " + fmt(bi, 9) +
              " vs " + fmt(bi_bound, 9) + ", worst excess " + fmt(excess_ulps, 3) + " ulp of the range"};
}

// 4. LASSO optimality and support on single-tap instances.
Outcome lasso_correctness() {
  std::mt19937_64 rng(404);
  const int N = 256;
  const int L = 16;
  std::uniform_int_distribution<int> tap(0, L - 1);
  std::uniform_real_distribution<double> amp(0.1, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.141592653589793);
  int good = 0;
  double worst_kkt = 0.0;
  for (int i = 0; i < 100; ++i) {
    SubcarrierSet all(N);
    std::iota(all.begin(), all.end(), 1);
    std::shuffle(all.begin(), all.end(), rng);
    SubcarrierSet rows(all.begin(), all.begin() + 48);
    std::sort(rows.begin(), rows.end());
    const LassoDesign d = LassoDesign::dft(rows, L, N);
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(L);
    const int l = tap(rng);
    h[l] = std::polar(amp(rng), phase(rng));
    const SparseEstimate est = solve_lasso(d, d.apply(h), 1.0, LassoConfig{});
    worst_kkt = std::max(worst_kkt, est.kkt_residual / est.lambda);
    if (est.kkt_residual <= 1e-6 * est.lambda && est.support == std::vector<int>{l}) ++good;
  }
  double worst_cf = 0.0;
  const Eigen::MatrixXcd q = dft_dictionary(full_band(L), L, L) / 4.0;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXcd mf(L);
    for (int j = 0; j < L; ++j) mf[j] = {u(rng), u(rng)};
    LassoConfig cfg;
    cfg.lambda = 0.3;
    const SparseEstimate est = solve_lasso(q, q * mf, 1.0, cfg);
    for (int j = 0; j < L; ++j)
      worst_cf = std::max(worst_cf, std::abs(est.coeffs[j] - soft_threshold(mf[j], 0.3)));
  }
  return {good == 100 && worst_cf <= 1e-8,
          std::to_string(good) + "/100 exact support with KKT ok (worst KKT/lambda " + fmt(worst_kkt, 3) +
              "), closed-form deviation " + fmt(worst_cf, 3)};
}

// 5. Gauss-Newton on exact geometries; analytic Jacobian.
Outcome gauss_newton() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0, 100);
  std::uniform_int_distribution<int> count(2, 4);
  int good = 0;
  int total = 0;
  while (total < 500) {
    LocalizationProblem p;
    p.bs = {u(rng), u(rng)};
    const Point2 a(u(rng), u(rng));
    const int n = count(rng);
    std::vector<Point2> anchors{p.bs};
    for (int m = 0; m < n; ++m) anchors.emplace_back(u(rng), u(rng));
    // Non-collinear anchors, target away from every anchor.
    Eigen::MatrixX2d centred(anchors.size(), 2);
    Point2 mean = Point2::Zero();
    for (const auto& x : anchors) mean += x / static_cast<double>(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) centred.row(i) = (anchors[i] - mean).transpose();
    Eigen::JacobiSVD<Eigen::MatrixX2d> svd(centred);
    bool near = false;
    for (const auto& x : anchors) near = near || (x - a).norm() < 1.0;
    if (svd.singularValues()[1] < 1.0 || near) continue;
    ++total;
    p.bs_range = (p.bs - a).norm();
    for (int m = 0; m < n; ++m)
      p.ue_anchors.push_back({m, anchors[m + 1], p.bs_range + (anchors[m + 1] - a).norm()});
    if ((gauss_newton_solve(p, GNConfig{}).position - a).norm() < 1e-6) ++good;
  }
  int jac_ok = 0;
  for (int i = 0; i < 100; ++i) {
    LocalizationProblem p;
    p.bs = {u(rng), u(rng)};
    p.bs_range = u(rng) * 0.5 + 1.0;
    for (int m = 0; m < 3; ++m) p.ue_anchors.push_back({m, {u(rng), u(rng)}, p.bs_range + u(rng)});
    const Point2 a(u(rng), u(rng));
    const Eigen::MatrixX2d j = residual_jacobian(a, p);
    if ((j - oracle::numeric_jacobian(a, p)).norm() <= 1e-5 * std::max(1.0, j.norm())) ++jac_ok;
  }
  return {good >= 495 && jac_ok == 100,
          std::to_string(good) + "/500 within 1e-6 m, Jacobian " + std::to_string(jac_ok) + "/100"};
}

// 6. Single target with ineffective UEs: selection against all-UE anchoring.
Outcome single_target() {
  const auto t0 = Clock::now();
  ExperimentConfig base = quiet(ExperimentConfig{});
  base.scenario.num_targets = 1;
  base.scenario.num_effective = 4;
  bool ok = true;
  std::string detail;
  for (int ineff = 1; ineff <= 5; ++ineff) {
    const ExperimentConfig c = apply_axis(base, SweepAxis::num_ineffective, std::to_string(ineff));
    const MetricsSummary prop = run(c, Scheme::proposed_passive, 500);
    const MetricsSummary bis = run(c, Scheme::bench_IS, 500);
    const double p = prop.localization_error_prob();
    const double b = bis.localization_error_prob();
    if (p > 0.05) ok = false;
    if (ineff >= 2 && !(b >= 5.0 * p && b > p)) ok = false;
    detail += " " + std::to_string(ineff) + ":" + fmt(p, 3) + "/" + fmt(b, 3);
  }
  const double dt = seconds_since(t0);
  if (dt >= 600.0) ok = false;
  return {ok, "ineffective:proposed/bench_IS" + detail + ", " + fmt(dt, 3) + " s"};
}

struct MultiTargetRuns {
  MetricsSummary iv, passive, iii, ii, i;
  MetricsSummary active20, active100;
  std::vector<TrialRecord> rec_passive, rec_active20, rec_active100;
};

MultiTargetRuns multi_target_runs() {
  MultiTargetRuns r;
  const ExperimentConfig base;
  r.iv = run(base, Scheme::bench_IV, 1000);
  r.passive = run(base, Scheme::proposed_passive, 1000, &r.rec_passive);
  r.iii = run(base, Scheme::bench_III, 1000);
  r.ii = run(base, Scheme::bench_II, 1000);
  r.i = run(base, Scheme::bench_I, 1000);
  r.active20 = run(apply_axis(base, SweepAxis::uplink_bandwidth, "20e6"), Scheme::proposed_active, 1000,
                   &r.rec_active20);
  r.active100 = run(apply_axis(base, SweepAxis::uplink_bandwidth, "100e6"), Scheme::proposed_active,
                    1000, &r.rec_active100);
  return r;
}

// 7. Multi-target benchmark ordering.
Outcome multi_target_ordering(const MultiTargetRuns& r) {
  auto le = [](const MetricsSummary& a, const MetricsSummary& b) {
    return a.localization_error_prob() <= b.localization_error_prob() + se_diff(a, b);
  };
  const double p = r.passive.localization_error_prob();
  const double b1 = r.i.localization_error_prob();
  const bool gap = b1 + r.i.localization_error_se() >= 5.0 * (p - r.passive.localization_error_se());
  const bool ok = le(r.iv, r.passive) && le(r.passive, r.iii) && le(r.iii, r.ii) && gap;
  return {ok, "IV " + fmt(r.iv.localization_error_prob(), 3) + ", proposed " + fmt(p, 3) + ", III " +
                  fmt(r.iii.localization_error_prob(), 3) + ", II " + fmt(r.ii.localization_error_prob(), 3) +
                  ", I " + fmt(b1, 3) + " (I/proposed " + fmt(p > 0 ? b1 / p : INFINITY, 3) + ")"};
}

double wall_se(const std::vector<TrialRecord>& recs) {
  if (recs.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& t : recs) mean += t.wall_time_s / static_cast<double>(recs.size());
  double var = 0.0;
  for (const auto& t : recs) var += (t.wall_time_s - mean) * (t.wall_time_s - mean);
  var /= static_cast<double>(recs.size() - 1);
  return std::sqrt(var / static_cast<double>(recs.size()));
}

// 8. Active against passive on paired seeds; uplink bandwidth.
Outcome active_mode(const MultiTargetRuns& r) {
  const MetricsSummary& pa = r.passive;
  const MetricsSummary& a20 = r.active20;
  const MetricsSummary& a100 = r.active100;
  bool ok = a20.localization_error_prob() <= pa.localization_error_prob();
  ok = ok && a20.mean_wall_time_s() <= 0.8 * pa.mean_wall_time_s();
  ok = ok && a20.mean_hypotheses() < pa.mean_hypotheses();
  ok = ok && a100.localization_error_prob() <= a20.localization_error_prob() + se_diff(a100, a20);
  ok = ok && a100.mean_wall_time_s() <=
                 a20.mean_wall_time_s() + std::hypot(wall_se(r.rec_active20), wall_se(r.rec_active100));
  return {ok, "error passive " + fmt(pa.localization_error_prob(), 3) + ", active20 " +
                  fmt(a20.localization_error_prob(), 3) + ", active100 " +
                  fmt(a100.localization_error_prob(), 3) + "; time ms " +
                  fmt(1e3 * pa.mean_wall_time_s(), 3) + "/" + fmt(1e3 * a20.mean_wall_time_s(), 3) + "/" +
                  fmt(1e3 * a100.mean_wall_time_s(), 3) + "; hypotheses " + fmt(pa.mean_hypotheses(), 4) +
                  "/" + fmt(a20.mean_hypotheses(), 4) + "/" + fmt(a100.mean_hypotheses(), 4)};
}

// 9. Selection solve count, hypothesis counting, greedy completion against exhaustive.
Outcome combinatorics() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0, 100);
  std::normal_distribution<double> gps(0, 10);
  SelectionConfig sel;
  sel.theta_th = 1e-9;
  int bound_violations = 0;
  int runs = 0;
  for (int M = 3; M <= 8; ++M)
    for (int i = 0; i < 50; ++i) {
      const Point2 bs(u(rng), u(rng));
      const Point2 a(u(rng), u(rng));
      std::vector<UeAnchor> pool;
      for (int m = 0; m < M; ++m) {
        const Point2 x(u(rng), u(rng));
        pool.push_back({m, x + Point2(gps(rng), gps(rng)), (bs - a).norm() + (x - a).norm()});
      }
      const SelectionResult r = select_ues_single_target(bs, (bs - a).norm(), pool, sel, GNConfig{});
      ++runs;
      if (r.subset_solves > (M - 2) * (M + 3) / 2) ++bound_violations;
    }

  bool counts_ok = true;
  for (int K = 1; K <= 4; ++K)
    for (int n = 1; n <= 5; ++n) {
      std::vector<std::vector<int>> choices(n, feasible_indices(K, {}));
      const std::size_t expect = static_cast<std::size_t>(std::llround(std::pow(K, n)));
      if (count_hypotheses(choices) != expect || enumerate_hypotheses(choices).size() != expect)
        counts_ok = false;
      std::vector<std::vector<int>> forbidden(n);
      std::size_t prev = expect;
      std::uniform_int_distribution<int> ue(0, n - 1);
      std::uniform_int_distribution<int> idx(0, K - 1);
      for (int step = 0; step < 2 * n * K; ++step) {
        const int m = ue(rng);
        forbidden[m].push_back(idx(rng));
        for (int j = 0; j < n; ++j) choices[j] = feasible_indices(K, forbidden[j]);
        const std::size_t c = count_hypotheses(choices);
        if (c > prev || enumerate_hypotheses(choices).size() != c) counts_ok = false;
        prev = c;
      }
    }

  const OfdmConfig dl;
  const SceneConstraints sc{dl.max_abs_sto, dl.sample_rate()};
  int scenes = 0;
  int matches = 0;
  for (std::uint64_t seed = 0; scenes < 200; ++seed) {
    ScenarioConfig cfg;
    cfg.num_targets = 2 + static_cast<int>(seed % 2);
    cfg.num_ue = 2 + static_cast<int>((seed / 2) % 3);
    cfg.num_effective = cfg.num_ue;
    cfg.gps_sigma_effective = -300.0;
    const Scenario s = generate_scenario(cfg, sc, seed);
    const RangeSets q = oracle::quantized_ranges(s, dl, nullptr, kSpeedOfLight);
    if (q.num_targets() != cfg.num_targets || static_cast<int>(q.ues.size()) != cfg.num_ue) continue;
    bool full = true;
    for (const auto& set : q.ues) full = full && static_cast<int>(set.d_btu.size()) >= cfg.num_targets;
    if (!full) continue;
    ++scenes;
    std::vector<int> targets(cfg.num_targets);
    std::iota(targets.begin(), targets.end(), 0);
    std::vector<int> ues(cfg.num_ue);
    std::iota(ues.begin(), ues.end(), 0);
    const auto greedy = solve_p6(q, s.bs, s.ue_reported, targets, ues, {}, SelectionConfig{}, GNConfig{});
    const oracle::JointAssignment best =
        oracle::exhaustive_assignment(q, s.bs, s.ue_reported, targets, ues, {}, GNConfig{});
    bool same = true;
    double total = 0.0;
    for (const auto& f : greedy) {
      total += f.theta_norm;
      same = same && f.localized && f.ues == ues && f.g == best.g.at(f.target);
    }
    if (same || std::abs(total - best.total) <= 1e-9 * std::max(1.0, best.total)) ++matches;
  }
  const bool ok = bound_violations == 0 && counts_ok && matches >= 190;
  return {ok, "solve-count violations " + std::to_string(bound_violations) + "/" + std::to_string(runs) +
                  ", counting " + (counts_ok ? "ok" : "wrong") + ", greedy = exhaustive " +
                  std::to_string(matches) + "/200"};
}

// 10. Range identities and active pruning safety.
Outcome identities_and_prune() {
  ScenarioConfig cfg;
  const OfdmConfig dl;
  const OfdmConfig ul = default_uplink_config();
  const SceneConstraints sc{dl.max_abs_sto, dl.sample_rate()};
  double worst_identity = 0.0;
  int pruned_effective = 0;
  int effective_seen = 0;
  int merged = 0;
  const double gamma_th = default_gamma_th(dl, ul);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Scenario s = generate_scenario(cfg, sc, seed);
    const TrueRangeTable t = true_ranges(s);
    for (int m = 0; m < s.num_ue(); ++m)
      for (int k = 0; k < s.num_targets(); ++k) {
        const double direct = (s.bs - s.targets[k]).norm() + (s.ue_true[m] - s.targets[k]).norm();
        const double scale = std::max(1.0, direct);
        worst_identity = std::max(worst_identity, std::abs(t.d_btu(m, k) - direct) / scale);
        worst_identity = std::max(
            worst_identity, std::abs(ut_from_btu(t.d_btu(m, k), t.d_bt[k]).value - t.d_ut(m, k)) / scale);
      }
    const RangeSets q = oracle::quantized_ranges(s, dl, &ul, kSpeedOfLight);
    const PruneResult p = active_prune(q, ActivePruneConfig{gamma_th});
    const std::size_t k_all = static_cast<std::size_t>(s.num_targets());
    for (int m = 0; m < s.num_ue(); ++m) {
      const UeRangeSet* u = q.find(m);
      if (!s.ue_effective[m] || !u) continue;
      // Quantization-exact: every echo resolved in its own bin on both bands.
      if (q.d_bt.size() != k_all || u->d_btu.size() != k_all || u->d_ut.size() != k_all) {
        ++merged;
        continue;
      }
      ++effective_seen;
      if (std::find(p.removed.begin(), p.removed.end(), m) != p.removed.end()) ++pruned_effective;
    }
  }
  const bool ok = worst_identity <= 4.0 * std::numeric_limits<double>::epsilon() && pruned_effective == 0;
  return {ok, "worst relative identity error " + fmt(worst_identity, 3) + ", effective UEs pruned " +
                  std::to_string(pruned_effective) + "/" + std::to_string(effective_seen) +
                  " quantization-exact (" + std::to_string(merged) + " with merged echoes skipped, gamma_th " + fmt(gamma_th, 5) + " m)"};
}

}  // namespace

int main() {
  std::cout << "worker threads: " << worker_threads() << std::endl;
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail << " ["
              << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  };
  report(1, "sto-exactness", sto_exactness);
  report(2, "sto-trend", sto_trend);
  report(3, "quantization-bound", quantization_bound);
  report(4, "lasso", lasso_correctness);
  report(5, "gauss-newton", gauss_newton);
  report(6, "single-target", single_target);
  MultiTargetRuns runs;
  bool have_runs = true;
  try {
    runs = multi_target_runs();
  } catch (const std::exception& e) {
    have_runs = false;
    std::cout << "multi-target runs failed: " << e.what() << std::endl;
  }
  report(7, "multi-target-ordering", [&] {
    return have_runs ? multi_target_ordering(runs) : Outcome{false, "no runs"};
  });
  report(8, "active-mode", [&] { return have_runs ? active_mode(runs) : Outcome{false, "no runs"}; });
  report(9, "combinatorics", combinatorics);
  report(10, "identities-and-prune", identities_and_prune);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
