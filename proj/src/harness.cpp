#include "ueloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "ueloc/errors.hpp"
#include "ueloc/rng.hpp"

namespace ueloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent streams derived from the trial seed.
enum Stream : std::uint64_t {
  kScene = 1,
  kPhases = 2,
  kBsPilot = 3,
  kBsNoise = 4,
  kDlPilot = 5,
  kDlNoise = 6,
  kUlPilot = 7,
  kUlNoise = 8,
};

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::proposed_passive: return "proposed_passive";
    case Scheme::proposed_active: return "proposed_active";
    case Scheme::bench_IS: return "bench_IS";
    case Scheme::bench_I: return "bench_I";
    case Scheme::bench_II: return "bench_II";
    case Scheme::bench_III: return "bench_III";
    case Scheme::bench_IV: return "bench_IV";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::proposed_passive, Scheme::proposed_active, Scheme::bench_IS,
                   Scheme::bench_I, Scheme::bench_II, Scheme::bench_III, Scheme::bench_IV})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown scheme '" + name + "'");
}

OfdmConfig default_uplink_config() {
  OfdmConfig c;
  c.num_subcarriers = 1600;
  c.subcarrier_spacing = 12.5e3;
  c.cp_len = 144;
  c.tx_power = 2.0;
  c.noise_power = 1e-13;
  c.max_paths = 128;
  c.max_abs_sto = 0;
  return c;
}

LassoConfig default_harness_lasso() {
  LassoConfig c;
  c.lambda_scale = 1e-8;
  c.support_rel_threshold = 1e-8;
  c.noise_floor_factor = 5.0;
  return c;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  ofdm_dl.validate();
  ofdm_ul.validate();
  lasso.validate();
  gn.validate();
  selection.validate();
  prune.validate();
  if (trials < 1) throw ConfigError("experiment.trials must be at least 1");
  if (!(error_radius > 0.0)) throw ConfigError("experiment.error_radius must be positive");
  if (scheme == Scheme::proposed_active && scenario.num_ue > 0 &&
      ofdm_ul.num_subcarriers / scenario.num_ue < ofdm_ul.extended_len())
    throw ConfigError("uplink comb too sparse: N_u / M must be at least L_u + eps_max");
}

double ExperimentConfig::resolved_gamma_th() const {
  return prune.gamma_th > 0.0 ? prune.gamma_th
                              : default_gamma_th(ofdm_dl, ofdm_ul, scenario.speed_of_light);
}

ExperimentContext::ExperimentContext(ExperimentConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      bs_design_(LassoDesign::dft(full_band(cfg_.ofdm_dl.num_subcarriers), cfg_.ofdm_dl.max_paths,
                                  cfg_.ofdm_dl.num_subcarriers)),
      ue_design_(LassoDesign::dft(full_band(cfg_.ofdm_dl.num_subcarriers),
                                  cfg_.ofdm_dl.extended_len(), cfg_.ofdm_dl.num_subcarriers)) {
  if (cfg_.scheme == Scheme::proposed_active) {
    const int M = cfg_.scenario.num_ue;
    const int N = cfg_.ofdm_ul.num_subcarriers;
    for (int m = 0; m < M; ++m) {
      ul_rows_.push_back(uplink_comb(m, M, N));
      ul_designs_.push_back(LassoDesign::dft(ul_rows_.back(), cfg_.ofdm_ul.extended_len(), N));
    }
  }
}

const LassoDesign& ExperimentContext::uplink_design(int ue) const {
  if (ue < 0 || static_cast<std::size_t>(ue) >= ul_designs_.size())
    throw DimensionMismatchError("no uplink design for UE " + std::to_string(ue));
  return ul_designs_[ue];
}

const SubcarrierSet& ExperimentContext::uplink_rows(int ue) const {
  if (ue < 0 || static_cast<std::size_t>(ue) >= ul_rows_.size())
    throw DimensionMismatchError("no uplink rows for UE " + std::to_string(ue));
  return ul_rows_[ue];
}

Scenario trial_scenario(const ExperimentConfig& cfg, std::uint64_t trial_id) {
  const std::uint64_t seed = cfg.base_seed ^ trial_id;
  SceneConstraints sc;
  sc.max_abs_sto = cfg.ofdm_dl.max_abs_sto;
  sc.sample_rate = cfg.ofdm_dl.sample_rate();
  return generate_scenario(cfg.scenario, sc, derive_seed(seed, kScene));
}

PhaseOneOutput run_phase_one(const ExperimentContext& ctx, const Scenario& s, std::uint64_t seed,
                             const PhaseOneOptions& opt) {
  const ExperimentConfig& cfg = ctx.config();
  const OfdmConfig& dl = cfg.ofdm_dl;
  const OfdmConfig& ul = cfg.ofdm_ul;
  const double c0 = cfg.scenario.speed_of_light;
  const int M = s.num_ue();
  const PathPhases phases = draw_path_phases(M, s.num_targets(), derive_seed(seed, kPhases));
  const double dl_sigma = std::sqrt(dl.noise_power);

  PhaseOneOutput out;
  const SubcarrierSet dl_rows = full_band(dl.num_subcarriers);
  {
    const TapChannel ch = build_monostatic_channel(s, cfg.scenario, phases.monostatic, dl);
    const RxVector rx = synthesize_rx(qpsk_pilot(dl.num_subcarriers, derive_seed(seed, kBsPilot)),
                                      dl.tx_power, ch, dl, dl_rows, derive_seed(seed, kBsNoise));
    out.bs_support =
        solve_lasso(ctx.bs_design(), strip_pilot(rx), std::sqrt(dl.tx_power), cfg.lasso, dl_sigma)
            .support;
  }

  std::vector<UeSupport> supports;
  out.sto.resize(M);
  out.true_los_tap.resize(M);
  for (int m = 0; m < M; ++m) {
    out.true_los_tap[m] = predicted_los_tap(s.bs, s.ue_true[m], dl, c0);
    const TapChannel ch = build_downlink_channel(s, m, cfg.scenario, phases.downlink[m], dl);
    const RxVector rx =
        synthesize_rx(qpsk_pilot(dl.num_subcarriers, derive_seed(seed, kDlPilot, m)), dl.tx_power,
                      ch, dl, dl_rows, derive_seed(seed, kDlNoise, m));
    UeSupport u;
    u.ue = m;
    u.downlink =
        solve_lasso(ctx.ue_design(), strip_pilot(rx), std::sqrt(dl.tx_power), cfg.lasso, dl_sigma)
            .support;
    int los = 0;
    try {
      los = detect_los_tap(u.downlink);
    } catch (const NoLosDetectedError&) {
      continue;
    }
    u.sto = estimate_sto(los, predicted_los_tap(s.bs, s.ue_reported[m], dl, c0));
    if (opt.zero_sto) u.sto.sto_hat = 0;
    out.sto[m] = u.sto;

    if (opt.with_uplink) {
      const SubcarrierSet& rows = ctx.uplink_rows(m);
      const TapChannel uch = build_uplink_self_channel(s, m, cfg.scenario, phases.uplink[m], ul);
      const RxVector urx =
          synthesize_rx(qpsk_pilot(static_cast<int>(rows.size()), derive_seed(seed, kUlPilot, m)),
                        ul.tx_power, uch, ul, rows, derive_seed(seed, kUlNoise, m));
      u.uplink = solve_lasso(ctx.uplink_design(m), strip_pilot(urx), std::sqrt(ul.tx_power),
                             cfg.lasso, std::sqrt(ul.noise_power))
                     .support;
    }
    supports.push_back(std::move(u));
  }
  out.ranges = assemble_range_sets(out.bs_support, supports, dl,
                                   opt.with_uplink ? std::optional<OfdmConfig>(ul) : std::nullopt, c0);
  return out;
}

int TrialRecord::error_count() const {
  return static_cast<int>(std::count(error_event.begin(), error_event.end(), true));
}

std::vector<double> match_targets(const std::vector<Point2>& truth,
                                  const std::vector<Point2>& estimates, double error_radius) {
  const std::size_t K = truth.size();
  const std::size_t E = estimates.size();
  std::vector<double> best(K, kNaN);
  if (K == 0 || E == 0) return best;
  const std::size_t n = std::max(K, E);
  if (n > 9) {
    // Greedy nearest pairing for sizes where the exhaustive search is too slow.
    std::vector<bool> used(E, false);
    for (std::size_t t = 0; t < K; ++t) {
      double dmin = std::numeric_limits<double>::infinity();
      std::size_t arg = E;
      for (std::size_t e = 0; e < E; ++e) {
        if (used[e]) continue;
        const double d = (truth[t] - estimates[e]).norm();
        if (d < dmin) {
          dmin = d;
          arg = e;
        }
      }
      if (arg < E) {
        used[arg] = true;
        best[t] = dmin;
      }
    }
    return best;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best_errors = K + 1;
  double best_sum = std::numeric_limits<double>::infinity();
  do {
    std::size_t errors = 0;
    double sum = 0.0;
    for (std::size_t t = 0; t < K; ++t) {
      if (perm[t] >= E) {
        ++errors;
        continue;
      }
      const double d = (truth[t] - estimates[perm[t]]).norm();
      if (d > error_radius) ++errors;
      sum += d;
    }
    if (errors < best_errors || (errors == best_errors && sum < best_sum)) {
      best_errors = errors;
      best_sum = sum;
      for (std::size_t t = 0; t < K; ++t)
        best[t] = perm[t] < E ? (truth[t] - estimates[perm[t]]).norm() : kNaN;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

AssocSolution oracle_association(const Scenario& s, const PhaseOneOutput& p1,
                                 const ExperimentConfig& cfg) {
  const TrueRangeTable truth = true_ranges(s);
  const RangeSets& r = p1.ranges;
  AssocSolution sol;
  // A true range with no estimate within one bin was not resolved (merged with the LOS
  // tap or another echo); that UE sits out for the target.
  const double tol = cfg.scenario.speed_of_light / cfg.ofdm_dl.sample_rate();
  for (const auto& set : r.ues)
    if (s.ue_effective[set.ue]) sol.effective_set.push_back(set.ue);
  for (int k = 0; k < r.num_targets(); ++k) {
    int t = 0;
    for (int j = 1; j < s.num_targets(); ++j)
      if (std::abs(truth.d_bt[j] - r.d_bt[k]) < std::abs(truth.d_bt[t] - r.d_bt[k])) t = j;
    std::vector<int> ues;
    std::vector<int> g;
    if (s.num_targets() > 0) {
      for (int ue : sol.effective_set) {
        const UeRangeSet& set = *r.find(ue);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < set.d_btu.size(); ++i)
          if (std::abs(set.d_btu[i] - truth.d_btu(ue, t)) <
              std::abs(set.d_btu[arg] - truth.d_btu(ue, t)))
            arg = i;
        if (set.d_btu.empty() || std::abs(set.d_btu[arg] - truth.d_btu(ue, t)) > tol) continue;
        ues.push_back(ue);
        g.push_back(static_cast<int>(arg));
      }
    }
    if (ues.size() >= 2) {
      sol.targets.push_back(localize_fixed(r, s.bs, s.ue_reported, k, ues, g, cfg.gn));
      sol.stats.gn_solves += 1;
    } else {
      sol.targets.emplace_back().target = k;
    }
  }
  return sol;
}

TrialRecord run_trial(const ExperimentContext& ctx, std::uint64_t trial_id) {
  const ExperimentConfig& cfg = ctx.config();
  const std::uint64_t seed = cfg.base_seed ^ trial_id;
  TrialRecord rec;
  rec.trial_id = trial_id;
  const int K = cfg.scenario.num_targets;
  rec.position_error.assign(K, kNaN);
  rec.error_event.assign(K, !cfg.phase1_only);

  Scenario s;
  PhaseOneOutput p1;
  try {
    s = trial_scenario(cfg, trial_id);
    PhaseOneOptions opt;
    opt.with_uplink = cfg.scheme == Scheme::proposed_active && !cfg.phase1_only;
    opt.zero_sto = cfg.scheme == Scheme::bench_I;
    p1 = run_phase_one(ctx, s, seed, opt);
  } catch (const InstanceTooLargeError&) {
    throw;
  } catch (const Error& e) {
    rec.failure = e.what();
    rec.sto_all_correct = false;
    return rec;
  }

  for (int m = 0; m < s.num_ue(); ++m) {
    if (!s.ue_effective[m]) continue;
    if (!p1.sto[m] || p1.sto[m]->sto_hat != s.sto[m]) rec.sto_all_correct = false;
  }
  rec.detected_targets = p1.ranges.num_targets();
  if (cfg.phase1_only) return rec;

  SelectionConfig sel = cfg.selection;
  if (cfg.scheme == Scheme::bench_IS || cfg.scheme == Scheme::bench_II) sel.select_ues = false;
  if (cfg.scheme == Scheme::bench_III) sel.recheck = false;

  AssocSolution sol;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (cfg.scheme) {
      case Scheme::bench_IV:
        sol = oracle_association(s, p1, cfg);
        break;
      case Scheme::proposed_active: {
        ActivePruneConfig pc = cfg.prune;
        pc.gamma_th = cfg.resolved_gamma_th();
        sol = localize_multi_target_active(p1.ranges, s.bs, s.ue_reported, sel, pc, cfg.gn);
        break;
      }
      default:
        sol = localize_multi_target(p1.ranges, s.bs, s.ue_reported, sel, cfg.gn);
        break;
    }
  } catch (const InstanceTooLargeError&) {
    throw;
  } catch (const Error& e) {
    rec.failure = e.what();
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.hypothesis_count = sol.stats.hypotheses;
  rec.validated = sol.validated;

  std::vector<Point2> estimates;
  for (const auto& f : sol.targets)
    if (f.localized) estimates.push_back(f.position);
  rec.position_error = match_targets(s.targets, estimates, cfg.error_radius);
  for (int k = 0; k < K; ++k)
    rec.error_event[k] = std::isnan(rec.position_error[k]) || rec.position_error[k] > cfg.error_radius;

  std::set<int> truly;
  for (const auto& set : p1.ranges.ues)
    if (s.ue_effective[set.ue]) truly.insert(set.ue);
  rec.effective_set_correct =
      std::set<int>(sol.effective_set.begin(), sol.effective_set.end()) == truly;
  return rec;
}

TrialRecord run_trial(const ExperimentConfig& cfg, std::uint64_t trial_id) {
  return run_trial(ExperimentContext(cfg), trial_id);
}

double MetricsSummary::localization_error_prob() const {
  return target_slots ? static_cast<double>(error_events) / static_cast<double>(target_slots) : 0.0;
}

double MetricsSummary::sto_error_prob() const {
  return trials ? static_cast<double>(sto_failures) / static_cast<double>(trials) : 0.0;
}

double MetricsSummary::mean_wall_time_s() const {
  return trials ? total_wall_time_s / static_cast<double>(trials) : 0.0;
}

double MetricsSummary::mean_hypotheses() const {
  return trials ? total_hypotheses / static_cast<double>(trials) : 0.0;
}

double MetricsSummary::localization_error_se() const {
  if (!target_slots) return 0.0;
  const double p = localization_error_prob();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(target_slots));
}

double MetricsSummary::sto_error_se() const {
  if (!trials) return 0.0;
  const double p = sto_error_prob();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

void MetricsSummary::add(const TrialRecord& r) {
  ++trials;
  target_slots += r.error_event.size();
  error_events += static_cast<std::uint64_t>(r.error_count());
  sto_failures += r.sto_all_correct ? 0 : 1;
  total_wall_time_s += r.wall_time_s;
  total_hypotheses += static_cast<double>(r.hypothesis_count);
}

void MetricsSummary::merge(const MetricsSummary& o) {
  trials += o.trials;
  target_slots += o.target_slots;
  error_events += o.error_events;
  sto_failures += o.sto_failures;
  total_wall_time_s += o.total_wall_time_s;
  total_hypotheses += o.total_hypotheses;
}

int worker_threads() {
  if (const char* env = std::getenv("UELOC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

MetricsSummary run_monte_carlo(const ExperimentConfig& cfg, std::vector<TrialRecord>* records,
                               std::uint64_t first_trial, std::optional<int> count) {
  const ExperimentContext ctx(cfg);
  const int n = count.value_or(cfg.trials);
  std::vector<TrialRecord> recs(static_cast<std::size_t>(std::max(n, 0)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        recs[i] = run_trial(ctx, first_trial + static_cast<std::uint64_t>(i));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = std::min(worker_threads(), std::max(n, 1));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  MetricsSummary sum;
  for (const auto& r : recs) sum.add(r);
  if (records) records->insert(records->end(), recs.begin(), recs.end());
  return sum;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::num_ineffective: return "num_ineffective";
    case SweepAxis::num_ue: return "num_ue";
    case SweepAxis::uplink_bandwidth: return "uplink_bandwidth";
    case SweepAxis::scheme: return "scheme";
    case SweepAxis::bs_power: return "bs_power";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::num_ineffective, SweepAxis::num_ue, SweepAxis::uplink_bandwidth,
                      SweepAxis::scheme, SweepAxis::bs_power})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

namespace {

double parse_double(const std::string& what, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number: '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw ConfigError(what + ": not a number: '" + v + "'");
  return x;
}

long long parse_int(const std::string& what, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not an integer: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(what + ": not an integer: '" + v + "'");
  return x;
}

int parse_count(const std::string& what, const std::string& v) {
  const long long x = parse_int(what, v);
  if (x < 0 || x > std::numeric_limits<int>::max()) throw ConfigError(what + ": out of range");
  return static_cast<int>(x);
}

}  // namespace

ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, const std::string& value) {
  ExperimentConfig c = cfg;
  switch (axis) {
    case SweepAxis::num_ineffective:
      c.scenario.num_ue = c.scenario.num_effective + parse_count("num_ineffective", value);
      break;
    case SweepAxis::num_ue: {
      const int ineffective = cfg.scenario.num_ue - cfg.scenario.num_effective;
      c.scenario.num_ue = parse_count("num_ue", value);
      c.scenario.num_effective = c.scenario.num_ue - ineffective;
      if (c.scenario.num_effective < 0)
        throw ConfigError("num_ue smaller than the ineffective UE count");
      break;
    }
    case SweepAxis::uplink_bandwidth: {
      const double bw = parse_double("uplink_bandwidth", value);
      if (!(bw > 0.0)) throw ConfigError("uplink_bandwidth must be positive");
      c.ofdm_ul.subcarrier_spacing = bw / c.ofdm_ul.num_subcarriers;
      break;
    }
    case SweepAxis::scheme:
      c.scheme = parse_scheme(value);
      break;
    case SweepAxis::bs_power:
      c.ofdm_dl.tx_power = parse_double("bs_power", value);
      break;
  }
  c.validate();
  return c;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                                const std::vector<std::string>& values,
                                std::vector<TrialRecord>* records) {
  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    const ExperimentConfig c = apply_axis(cfg, axis, v);
    SweepRow row;
    row.axis_value = v;
    row.scheme = c.scheme;
    row.summary = run_monte_carlo(c, records);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ueloc
