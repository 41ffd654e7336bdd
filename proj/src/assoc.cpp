#include "ueloc/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ueloc/errors.hpp"

namespace ueloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void SelectionConfig::validate() const {
  if (!(theta_th > 0.0)) throw ConfigError("selection.theta_th must be positive");
  if (!(theta_bar_th > 0.0)) throw ConfigError("selection.theta_bar_th must be positive");
  if (min_ue_anchors < 2) throw ConfigError("selection.min_ue_anchors must be at least 2");
  if (max_hypotheses == 0) throw ConfigError("selection.max_hypotheses must be positive");
}

void ActivePruneConfig::validate() const {
  if (gamma_th < 0.0 || !std::isfinite(gamma_th))
    throw ConfigError("prune.gamma_th must be non-negative (0 selects the default)");
}

double default_gamma_th(const OfdmConfig& dl, const OfdmConfig& ul, double c0) {
  return c0 / (2.0 * dl.sample_rate()) + c0 / (2.0 * ul.sample_rate());
}

SelectionResult select_ues_single_target(const Point2& bs, double bs_range,
                                         const std::vector<UeAnchor>& pool,
                                         const SelectionConfig& cfg, const GNConfig& gn) {
  const int min_ues = cfg.min_ue_anchors;
  if (static_cast<int>(pool.size()) < min_ues + 1)
    throw UnderDeterminedError("UE selection needs at least min_ue_anchors + 1 UEs");

  LocalizationProblem prob;
  prob.bs = bs;
  prob.bs_range = bs_range;
  prob.bs_weight = gn.bs_weight;

  auto solve = [&](const std::vector<int>& pos) {
    prob.ue_anchors.clear();
    for (int i : pos) prob.ue_anchors.push_back(pool[i]);
    return gauss_newton_solve(prob, gn);
  };

  SelectionResult out;
  // Pool positions ordered by UE id so that ties resolve to the smallest id.
  std::vector<int> current(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) current[i] = static_cast<int>(i);
  std::stable_sort(current.begin(), current.end(),
                   [&](int a, int b) { return pool[a].ue < pool[b].ue; });

  LocalizationResult cur_fix = solve(current);
  out.total_solves = 1;

  while (static_cast<int>(current.size()) > min_ues) {
    int best_drop = -1;
    LocalizationResult best_fix;
    for (std::size_t j = 0; j < current.size(); ++j) {
      std::vector<int> trial;
      trial.reserve(current.size() - 1);
      for (std::size_t t = 0; t < current.size(); ++t)
        if (t != j) trial.push_back(current[t]);
      LocalizationResult r = solve(trial);
      ++out.subset_solves;
      if (best_drop < 0 || r.theta_norm < best_fix.theta_norm) {
        best_drop = static_cast<int>(j);
        best_fix = r;
      }
    }
    if (std::abs(best_fix.theta_norm - cur_fix.theta_norm) <= cfg.theta_th) break;
    out.removed.push_back(pool[current[best_drop]].ue);
    current.erase(current.begin() + best_drop);
    cur_fix = best_fix;
  }
  out.total_solves += out.subset_solves;
  out.fix = cur_fix;
  out.selected_pos = current;
  for (int i : current) out.selected.push_back(pool[i].ue);
  return out;
}

std::vector<int> feasible_indices(int set_size, const std::vector<int>& forbidden,
                                  const std::vector<int>* allowed) {
  std::vector<int> out;
  for (int g = 0; g < set_size; ++g) {
    if (std::find(forbidden.begin(), forbidden.end(), g) != forbidden.end()) continue;
    if (allowed && std::find(allowed->begin(), allowed->end(), g) == allowed->end()) continue;
    out.push_back(g);
  }
  return out;
}

std::size_t count_hypotheses(const std::vector<std::vector<int>>& choices) {
  std::size_t n = 1;
  for (const auto& c : choices) {
    if (c.empty()) return 0;
    if (n > std::numeric_limits<std::size_t>::max() / c.size())
      return std::numeric_limits<std::size_t>::max();
    n *= c.size();
  }
  return n;
}

std::vector<std::vector<int>> enumerate_hypotheses(const std::vector<std::vector<int>>& choices,
                                                   std::size_t limit) {
  const std::size_t n = count_hypotheses(choices);
  if (n > limit)
    throw InstanceTooLargeError("hypothesis count " + std::to_string(n) + " exceeds limit " +
                                std::to_string(limit));
  std::vector<std::vector<int>> out;
  if (n == 0) return out;
  out.reserve(n);
  std::vector<std::size_t> digit(choices.size(), 0);
  for (std::size_t h = 0; h < n; ++h) {
    std::vector<int> hyp(choices.size());
    for (std::size_t i = 0; i < choices.size(); ++i) hyp[i] = choices[i][digit[i]];
    out.push_back(std::move(hyp));
    for (std::size_t i = choices.size(); i-- > 0;) {
      if (++digit[i] < choices[i].size()) break;
      digit[i] = 0;
    }
  }
  return out;
}

namespace {

struct Evaluation {
  bool ok = false;
  double theta_norm = kInf;
  LocalizationResult fix;
  std::vector<int> ues;  // anchors kept, ascending
  std::vector<int> g;
};

class Phase2 {
 public:
  Phase2(const RangeSets& ranges, const Point2& bs, const std::vector<Point2>& reported,
         const SelectionConfig& cfg, const GNConfig& gn, AssocStats& stats)
      : ranges_(ranges), bs_(bs), reported_(reported), cfg_(cfg), gn_(gn), stats_(stats) {}

  const UeRangeSet& set(int ue) const {
    const UeRangeSet* s = ranges_.find(ue);
    if (!s) throw DimensionMismatchError("UE " + std::to_string(ue) + " has no range set");
    return *s;
  }

  // Per-UE choices for target k; UEs with nothing left are dropped.
  void choices_for(int k, const std::vector<int>& ues, const std::map<int, std::vector<int>>& forbidden,
                   const std::map<int, std::vector<std::vector<int>>>* allowed,
                   std::vector<int>& kept, std::vector<std::vector<int>>& choices) const {
    kept.clear();
    choices.clear();
    static const std::vector<int> none;
    for (int ue : ues) {
      const auto f = forbidden.find(ue);
      const std::vector<int>* allow = nullptr;
      if (allowed) {
        auto a = allowed->find(ue);
        if (a != allowed->end()) {
          if (static_cast<std::size_t>(k) >= a->second.size()) continue;
          allow = &a->second[k];
        }
      }
      auto c = feasible_indices(static_cast<int>(set(ue).d_btu.size()),
                                f == forbidden.end() ? none : f->second, allow);
      if (c.empty()) continue;
      kept.push_back(ue);
      choices.push_back(std::move(c));
    }
  }

  std::vector<UeAnchor> anchors(const std::vector<int>& ues, const std::vector<int>& g) const {
    std::vector<UeAnchor> a;
    for (std::size_t i = 0; i < ues.size(); ++i)
      a.push_back({ues[i], reported_.at(ues[i]), set(ues[i]).d_btu[g[i]]});
    return a;
  }

  Evaluation evaluate(int k, const std::vector<int>& ues, const std::vector<int>& g, bool select) {
    Evaluation ev;
    if (ues.size() < 2) return ev;
    const double d_bt = ranges_.d_bt[k];
    std::vector<UeAnchor> a = anchors(ues, g);
    if (select && cfg_.select_ues && static_cast<int>(a.size()) > cfg_.min_ue_anchors) {
      SelectionResult s = select_ues_single_target(bs_, d_bt, a, cfg_, gn_);
      stats_.gn_solves += s.total_solves;
      ev.fix = s.fix;
      for (int p : s.selected_pos) {
        ev.ues.push_back(ues[p]);
        ev.g.push_back(g[p]);
      }
    } else {
      LocalizationProblem prob{bs_, d_bt, a, gn_.bs_weight};
      ev.fix = gauss_newton_solve(prob, gn_);
      ++stats_.gn_solves;
      ev.ues = ues;
      ev.g = g;
    }
    ev.ok = true;
    ev.theta_norm = ev.fix.theta_norm;
    return ev;
  }

  // Exhaustive search over the hypotheses of target k; lowest theta_bar, first in
  // lexicographic order on ties. With prefer_more_anchors, the candidates within theta_th
  // of the lowest theta_bar are ranked by anchor count first.
  Evaluation search(int k, const std::vector<int>& ues, const std::map<int, std::vector<int>>& forbidden,
                    const std::map<int, std::vector<std::vector<int>>>* allowed, bool select) {
    std::vector<int> kept;
    std::vector<std::vector<int>> choices;
    choices_for(k, ues, forbidden, allowed, kept, choices);
    Evaluation best;
    if (kept.size() < 2) return best;
    const auto hyps = enumerate_hypotheses(choices, cfg_.max_hypotheses);
    stats_.hypotheses += hyps.size();
    std::vector<Evaluation> evs;
    evs.reserve(hyps.size());
    for (const auto& h : hyps) {
      Evaluation ev = evaluate(k, kept, h, select);
      if (!ev.ok) continue;
      if (!best.ok || ev.theta_norm < best.theta_norm) best = ev;
      if (cfg_.prefer_more_anchors) evs.push_back(std::move(ev));
    }
    if (!cfg_.prefer_more_anchors || !best.ok) return best;
    // Within theta_th of the minimum, the fit with more anchors wins.
    const double cut = best.theta_norm + cfg_.theta_th;
    const Evaluation* pick = nullptr;
    for (const auto& ev : evs) {
      if (ev.theta_norm > cut) continue;
      if (!pick || ev.ues.size() > pick->ues.size() ||
          (ev.ues.size() == pick->ues.size() && ev.theta_norm < pick->theta_norm))
        pick = &ev;
    }
    return *pick;
  }

  TargetFix to_fix(int k, const Evaluation& ev) const {
    TargetFix f;
    f.target = k;
    if (!ev.ok) return f;
    f.localized = true;
    f.position = ev.fix.position;
    f.theta_norm = ev.theta_norm;
    std::vector<std::size_t> order(ev.ues.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ev.ues[a] < ev.ues[b]; });
    for (auto i : order) {
      f.ues.push_back(ev.ues[i]);
      f.g.push_back(ev.g[i]);
    }
    return f;
  }

 private:
  const RangeSets& ranges_;
  const Point2& bs_;
  const std::vector<Point2>& reported_;
  const SelectionConfig& cfg_;
  const GNConfig& gn_;
  AssocStats& stats_;
};

std::vector<int> resolve_pool(const RangeSets& ranges, const PoolConstraints& c) {
  std::vector<int> pool;
  if (c.pool.empty()) {
    for (const auto& s : ranges.ues) pool.push_back(s.ue);
  } else {
    for (int ue : c.pool)
      if (ranges.find(ue)) pool.push_back(ue);
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  return pool;
}

}  // namespace

TargetFix localize_fixed(const RangeSets& ranges, const Point2& bs,
                         const std::vector<Point2>& ue_reported, int target,
                         const std::vector<int>& ues, const std::vector<int>& g,
                         const GNConfig& gn) {
  if (ues.size() != g.size()) throw DimensionMismatchError("association length mismatch");
  AssocStats stats;
  SelectionConfig cfg;
  Phase2 p(ranges, bs, ue_reported, cfg, gn, stats);
  return p.to_fix(target, p.evaluate(target, ues, g, false));
}

std::vector<TargetFix> solve_p6(const RangeSets& ranges, const Point2& bs,
                                const std::vector<Point2>& ue_reported,
                                const std::vector<int>& remaining,
                                const std::vector<int>& effective_set,
                                std::map<int, std::vector<int>> forbidden,
                                const SelectionConfig& cfg, const GNConfig& gn, AssocStats* stats,
                                const std::map<int, std::vector<std::vector<int>>>* allowed) {
  AssocStats local;
  AssocStats& st = stats ? *stats : local;
  Phase2 p(ranges, bs, ue_reported, cfg, gn, st);
  std::vector<TargetFix> out;
  for (int k : remaining) {
    Evaluation ev = p.search(k, effective_set, forbidden, allowed, false);
    TargetFix f = p.to_fix(k, ev);
    for (std::size_t i = 0; i < f.ues.size(); ++i) forbidden[f.ues[i]].push_back(f.g[i]);
    out.push_back(std::move(f));
  }
  return out;
}

AssocSolution localize_multi_target(const RangeSets& ranges, const Point2& bs,
                                    const std::vector<Point2>& ue_reported,
                                    const SelectionConfig& cfg, const GNConfig& gn,
                                    const PoolConstraints& constraints) {
  cfg.validate();
  AssocSolution sol;
  const int K = ranges.num_targets();
  for (int k = 0; k < K; ++k) sol.targets.emplace_back().target = k;
  const std::vector<int> pool = resolve_pool(ranges, constraints);
  const auto* allowed = constraints.allowed.empty() ? nullptr : &constraints.allowed;
  Phase2 p(ranges, bs, ue_reported, cfg, gn, sol.stats);
  const std::map<int, std::vector<int>> no_forbidden;

  if (K == 0) return sol;
  if (pool.size() < 2) {
    sol.validated = false;
    return sol;
  }

  if (K == 1) {
    Evaluation ev = p.search(0, pool, no_forbidden, allowed, true);
    sol.targets[0] = p.to_fix(0, ev);
    sol.effective_set = sol.targets[0].ues;
    sol.validated = ev.ok;
    sol.anchor_step = ev.ok ? 0 : -1;
    return sol;
  }

  struct Step {
    int k = -1;
    int next = -1;
    Evaluation first;
    Evaluation second;
  };
  auto total = [](const Step& s) { return s.first.theta_norm + s.second.theta_norm; };
  std::optional<Step> accepted;
  std::optional<Step> fallback;
  const int steps = cfg.recheck && cfg.wrap_check ? K : K - 1;
  for (int k = 0; k < steps; ++k) {
    Step s;
    s.k = k;
    s.next = (k + 1) % K;
    s.first = p.search(k, pool, no_forbidden, allowed, true);
    if (!s.first.ok) continue;
    std::map<int, std::vector<int>> forbid;
    for (std::size_t i = 0; i < s.first.ues.size(); ++i) forbid[s.first.ues[i]].push_back(s.first.g[i]);
    s.second = p.search(s.next, s.first.ues, forbid, allowed, false);
    if (!cfg.recheck || (s.second.ok && s.second.theta_norm <= cfg.theta_bar_th)) {
      accepted = std::move(s);
      break;
    }
    const bool better =
        !fallback || total(s) < total(*fallback) ||
        (total(s) == total(*fallback) && s.first.theta_norm < fallback->first.theta_norm);
    if (better) fallback = std::move(s);
  }

  if (!accepted && !fallback) {
    sol.validated = false;
    return sol;
  }
  sol.validated = accepted.has_value();
  const Step& step = accepted ? *accepted : *fallback;
  sol.anchor_step = step.k;
  sol.check_target = step.next;
  sol.targets[step.k] = p.to_fix(step.k, step.first);
  sol.targets[step.next] = p.to_fix(step.next, step.second);
  sol.effective_set = sol.targets[step.k].ues;

  std::map<int, std::vector<int>> forbidden;
  for (int k : {step.k, step.next}) {
    const TargetFix& f = sol.targets[k];
    for (std::size_t i = 0; i < f.ues.size(); ++i) forbidden[f.ues[i]].push_back(f.g[i]);
  }
  std::vector<int> remaining;
  for (int k = 0; k < K; ++k)
    if (k != step.k && k != step.next) remaining.push_back(k);
  auto rest = solve_p6(ranges, bs, ue_reported, remaining, sol.effective_set, std::move(forbidden),
                       cfg, gn, &sol.stats, allowed);
  for (auto& f : rest) sol.targets[f.target] = std::move(f);
  return sol;
}

double gamma_residue(double d_btu, double d_bt, double d_ut) { return std::abs(d_btu - d_bt - d_ut); }

PruneResult active_prune(const RangeSets& ranges, const ActivePruneConfig& cfg) {
  if (!(cfg.gamma_th > 0.0)) throw ConfigError("prune.gamma_th must be resolved to a positive value");
  PruneResult out;
  const int K = ranges.num_targets();
  out.gamma_min.resize(static_cast<Eigen::Index>(ranges.ues.size()), K);
  for (std::size_t r = 0; r < ranges.ues.size(); ++r) {
    const UeRangeSet& s = ranges.ues[r];
    if (!s.has_uplink)
      throw DimensionMismatchError("UE " + std::to_string(s.ue) + " has no uplink range set");
    out.ues.push_back(s.ue);
    std::vector<std::vector<int>> allowed(K);
    bool removed = false;
    for (int k = 0; k < K; ++k) {
      double gmin = kInf;
      for (std::size_t g = 0; g < s.d_btu.size(); ++g) {
        bool ok = false;
        for (double d_ut : s.d_ut) {
          const double gamma = gamma_residue(s.d_btu[g], ranges.d_bt[k], d_ut);
          gmin = std::min(gmin, gamma);
          ok = ok || gamma <= cfg.gamma_th;
        }
        if (ok) allowed[k].push_back(static_cast<int>(g));
      }
      out.gamma_min(static_cast<Eigen::Index>(r), k) = gmin;
      if (gmin > cfg.gamma_th) removed = true;
    }
    (removed ? out.removed : out.kept).push_back(s.ue);
    out.allowed_g[s.ue] = std::move(allowed);
  }
  return out;
}

AssocSolution localize_multi_target_active(const RangeSets& ranges, const Point2& bs,
                                           const std::vector<Point2>& ue_reported,
                                           const SelectionConfig& sel,
                                           const ActivePruneConfig& prune, const GNConfig& gn) {
  PruneResult pr = active_prune(ranges, prune);
  PoolConstraints c;
  c.pool = pr.kept;
  for (int ue : pr.kept) c.allowed[ue] = pr.allowed_g[ue];
  if (c.pool.empty()) {
    AssocSolution sol;
    for (int k = 0; k < ranges.num_targets(); ++k) sol.targets.emplace_back().target = k;
    sol.validated = false;
    sol.pruned = pr.removed;
    return sol;
  }
  AssocSolution sol = localize_multi_target(ranges, bs, ue_reported, sel, gn, c);
  sol.pruned = pr.removed;
  return sol;
}

}  // namespace ueloc
