#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "ueloc/locate.hpp"
#include "ueloc/ranging.hpp"
#include "ueloc/waveform.hpp"

namespace ueloc {

struct SelectionConfig {
  double theta_th = 0.1;      // m^2, stop threshold on the change of theta_bar
  double theta_bar_th = 1.0;  // m^2, accept threshold of the second-target check
  int min_ue_anchors = 2;
  bool select_ues = true;  // false: every UE of the pool is used as an anchor
  bool recheck = true;     // false: the first step is accepted without the check
  // When every step k -> k+1 fails its check, one more step uses the last target for the
  // set and the first target for the check.
  bool wrap_check = true;
  // Hypothesis fits within theta_th of the best one are ranked by anchor count first.
  bool prefer_more_anchors = true;
  std::size_t max_hypotheses = 1'000'000;

  void validate() const;
};

struct ActivePruneConfig {
  double gamma_th = 0.0;  // m; non-positive means default_gamma_th()

  void validate() const;
};

// One quantization budget per band: c0/(2 N_d df_d) + c0/(2 N_u df_u).
double default_gamma_th(const OfdmConfig& dl, const OfdmConfig& ul, double c0 = kSpeedOfLight);

struct SelectionResult {
  std::vector<int> selected;  // UE ids, ascending
  std::vector<int> removed;   // UE ids in removal order
  std::vector<int> selected_pos;  // positions of the selected anchors in the input pool
  LocalizationResult fix;
  int subset_solves = 0;  // solves over the candidate subsets
  int total_solves = 0;   // subset solves plus the initial full-pool solve
};

// Greedy removal of the UE whose exclusion gives the smallest normalized residual.
// Stops when the change of theta_bar is at most theta_th (keeping the set before that
// removal) or when min_ue_anchors UEs remain. Ties go to the smallest UE id.
// Throws UnderDeterminedError for pools smaller than min_ue_anchors + 1.
SelectionResult select_ues_single_target(const Point2& bs, double bs_range,
                                         const std::vector<UeAnchor>& pool,
                                         const SelectionConfig& cfg, const GNConfig& gn);

// Permitted association indices for one UE and target: {0..set_size-1} minus forbidden,
// intersected with allowed when given. Ascending.
std::vector<int> feasible_indices(int set_size, const std::vector<int>& forbidden,
                                  const std::vector<int>* allowed = nullptr);

// Product of the choice-set sizes, saturating at SIZE_MAX.
std::size_t count_hypotheses(const std::vector<std::vector<int>>& choices);

// Cartesian product in lexicographic order, first UE most significant. Any empty choice
// set gives an empty list. Throws InstanceTooLargeError above `limit` hypotheses.
std::vector<std::vector<int>> enumerate_hypotheses(const std::vector<std::vector<int>>& choices,
                                                   std::size_t limit = 1'000'000);

struct TargetFix {
  int target = 0;  // index into RangeSets::d_bt (descending BS range)
  bool localized = false;
  Point2 position = Point2::Zero();
  double theta_norm = std::numeric_limits<double>::infinity();
  std::vector<int> ues;  // anchor UE ids, ascending
  std::vector<int> g;    // aligned with ues: 0-based index into that UE's d_btu
};

struct AssocStats {
  std::size_t hypotheses = 0;
  std::size_t gn_solves = 0;
};

struct AssocSolution {
  std::vector<int> effective_set;
  std::vector<TargetFix> targets;  // one per BS range
  bool validated = true;
  int anchor_step = -1;  // k* of the accepted (or fallback) step, -1 if none
  int check_target = -1;  // target localized by the check of that step
  std::vector<int> pruned;  // active mode: UEs removed before association
  AssocStats stats;
};

struct PoolConstraints {
  std::vector<int> pool;  // UE ids; empty means every UE in the range sets
  // allowed[ue][k]: permitted g for that UE at target k. Absent UEs are unconstrained.
  std::map<int, std::vector<std::vector<int>>> allowed;
};

// Direct solve with a fixed association; no selection.
TargetFix localize_fixed(const RangeSets& ranges, const Point2& bs,
                         const std::vector<Point2>& ue_reported, int target,
                         const std::vector<int>& ues, const std::vector<int>& g,
                         const GNConfig& gn);

// Multi-target association with ineffective-UE removal. A single BS range goes through
// the single-target route (hypotheses over each UE's index, selection per hypothesis).
AssocSolution localize_multi_target(const RangeSets& ranges, const Point2& bs,
                                    const std::vector<Point2>& ue_reported,
                                    const SelectionConfig& cfg, const GNConfig& gn,
                                    const PoolConstraints& constraints = {});

// Greedy completion for the targets left after the anchor step: in the given order each
// target exhausts its feasible hypotheses over `effective_set`, commits the minimum
// theta_bar and forbids the used indices for later targets.
std::vector<TargetFix> solve_p6(const RangeSets& ranges, const Point2& bs,
                                const std::vector<Point2>& ue_reported,
                                const std::vector<int>& remaining,
                                const std::vector<int>& effective_set,
                                std::map<int, std::vector<int>> forbidden,
                                const SelectionConfig& cfg, const GNConfig& gn,
                                AssocStats* stats = nullptr,
                                const std::map<int, std::vector<std::vector<int>>>* allowed = nullptr);

struct PruneResult {
  std::vector<int> ues;      // UEs examined, ascending
  std::vector<int> removed;  // gamma_min above threshold for some target
  std::vector<int> kept;
  Eigen::MatrixXd gamma_min;  // rows follow `ues`, columns follow d_bt
  std::map<int, std::vector<std::vector<int>>> allowed_g;  // ue -> per target
};

// gamma(g, e) = |d_btu(g) - d_bt(k) - d_ut(e)|. Throws DimensionMismatchError when a UE
// lacks uplink ranges.
double gamma_residue(double d_btu, double d_bt, double d_ut);
PruneResult active_prune(const RangeSets& ranges, const ActivePruneConfig& cfg);

AssocSolution localize_multi_target_active(const RangeSets& ranges, const Point2& bs,
                                           const std::vector<Point2>& ue_reported,
                                           const SelectionConfig& sel,
                                           const ActivePruneConfig& prune, const GNConfig& gn);

}  // namespace ueloc
