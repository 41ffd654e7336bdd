#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ueloc/assoc.hpp"
#include "ueloc/locate.hpp"
#include "ueloc/ranging.hpp"
#include "ueloc/scene.hpp"
#include "ueloc/sparse.hpp"
#include "ueloc/waveform.hpp"

namespace ueloc {

enum class Scheme {
  proposed_passive,
  proposed_active,
  bench_IS,   // single target, every UE is an anchor
  bench_I,    // no STO compensation
  bench_II,   // multi target, every UE is an anchor
  bench_III,  // no second-target recheck
  bench_IV,   // ground-truth association and effective set
};

std::string to_string(Scheme s);
// Throws ConfigError for unknown names.
Scheme parse_scheme(const std::string& name);

// Uplink numerology: 1600 sub-carriers at 12.5 kHz (20 MHz), 2 W per UE.
OfdmConfig default_uplink_config();

// LASSO settings for UE channels, whose echo taps sit 60-120 dB below the LOS tap:
// lambda is driven by the noise floor rather than by the matched-filter peak.
LassoConfig default_harness_lasso();

struct ExperimentConfig {
  ScenarioConfig scenario;
  OfdmConfig ofdm_dl;
  OfdmConfig ofdm_ul = default_uplink_config();
  LassoConfig lasso = default_harness_lasso();
  GNConfig gn;
  SelectionConfig selection;
  ActivePruneConfig prune;  // gamma_th = 0 resolves to default_gamma_th()
  Scheme scheme = Scheme::proposed_passive;
  int trials = 1000;
  std::uint64_t base_seed = 1;
  double error_radius = 1.0;  // m
  bool phase1_only = false;   // skip localization; only STO statistics are meaningful

  // Throws ConfigError.
  void validate() const;
  double resolved_gamma_th() const;
};

// Designs shared by every trial of one configuration.
class ExperimentContext {
 public:
  explicit ExperimentContext(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const LassoDesign& bs_design() const { return bs_design_; }
  const LassoDesign& ue_design() const { return ue_design_; }
  // Comb design of UE `ue`; only built for active-mode schemes.
  const LassoDesign& uplink_design(int ue) const;
  const SubcarrierSet& uplink_rows(int ue) const;

 private:
  ExperimentConfig cfg_;
  LassoDesign bs_design_;
  LassoDesign ue_design_;
  std::vector<SubcarrierSet> ul_rows_;
  std::vector<LassoDesign> ul_designs_;
};

struct PhaseOneOutput {
  RangeSets ranges;
  std::vector<std::optional<StoEstimate>> sto;  // per UE; nullopt when no LOS was found
  std::vector<int> true_los_tap;                // floor(N df |b - u_m| / c0)
  std::vector<int> bs_support;
};

struct PhaseOneOptions {
  bool with_uplink = false;
  bool zero_sto = false;  // skip STO compensation
};

// Scene -> waveform -> sparse recovery -> range sets for one trial.
PhaseOneOutput run_phase_one(const ExperimentContext& ctx, const Scenario& s, std::uint64_t seed,
                             const PhaseOneOptions& opt);

// Scene of one trial, as drawn by run_trial.
Scenario trial_scenario(const ExperimentConfig& cfg, std::uint64_t trial_id);

struct TrialRecord {
  std::uint64_t trial_id = 0;
  std::vector<double> position_error;  // per true target; NaN when unmatched
  std::vector<bool> error_event;       // per true target
  bool sto_all_correct = true;         // every truly effective UE has tau_hat = tau
  double wall_time_s = 0.0;            // Phase II only
  std::size_t hypothesis_count = 0;
  bool effective_set_correct = false;
  int detected_targets = 0;  // |D^BT|
  bool validated = false;
  std::string failure;  // pipeline error message, empty on success

  int error_count() const;
};

// Optimal one-to-one matching of true targets to estimates (fewest error events, then
// smallest total distance). Returns per-target distance, NaN when unmatched.
std::vector<double> match_targets(const std::vector<Point2>& truth,
                                  const std::vector<Point2>& estimates, double error_radius);

// Ground-truth association for Benchmark IV.
AssocSolution oracle_association(const Scenario& s, const PhaseOneOutput& p1,
                                 const ExperimentConfig& cfg);

TrialRecord run_trial(const ExperimentContext& ctx, std::uint64_t trial_id);
TrialRecord run_trial(const ExperimentConfig& cfg, std::uint64_t trial_id);

struct MetricsSummary {
  std::uint64_t trials = 0;
  std::uint64_t target_slots = 0;  // K per trial, summed
  std::uint64_t error_events = 0;
  std::uint64_t sto_failures = 0;
  double total_wall_time_s = 0.0;
  double total_hypotheses = 0.0;

  double localization_error_prob() const;
  double sto_error_prob() const;
  double mean_wall_time_s() const;
  double mean_hypotheses() const;
  // Standard error of the two probabilities under a binomial model.
  double localization_error_se() const;
  double sto_error_se() const;

  void add(const TrialRecord& r);
  void merge(const MetricsSummary& other);
};

// UELOC_THREADS if set and positive, else the hardware concurrency (at least 1).
int worker_threads();

// Trials [first, first + count); records are returned in trial order when requested.
MetricsSummary run_monte_carlo(const ExperimentConfig& cfg, std::vector<TrialRecord>* records = nullptr,
                               std::uint64_t first_trial = 0, std::optional<int> count = {});

enum class SweepAxis { num_ineffective, num_ue, uplink_bandwidth, scheme, bs_power };

std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepRow {
  std::string axis_value;
  Scheme scheme = Scheme::proposed_passive;
  MetricsSummary summary;
};

// Applies one axis value to a copy of cfg. num_ineffective keeps num_effective fixed;
// num_ue keeps the ineffective count fixed; uplink_bandwidth is in Hz; bs_power in W.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, const std::string& value);

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                                const std::vector<std::string>& values,
                                std::vector<TrialRecord>* records = nullptr);

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_jsonl(std::ostream& os, const std::vector<TrialRecord>& records);

// INI-style text with sections scenario, ofdm_dl, ofdm_ul, lasso, gn, selection, prune,
// experiment. Unknown sections or keys throw ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
void write_config(std::ostream& os, const ExperimentConfig& cfg);

}  // namespace ueloc
