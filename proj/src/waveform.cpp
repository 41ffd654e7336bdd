#include "ueloc/waveform.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <unsupported/Eigen/FFT>

#include "ueloc/errors.hpp"

namespace ueloc {

void OfdmConfig::validate() const {
  if (num_subcarriers <= 0) throw ConfigError("ofdm.num_subcarriers must be positive");
  if (!(subcarrier_spacing > 0.0)) throw ConfigError("ofdm.subcarrier_spacing must be positive");
  if (max_paths <= 0) throw ConfigError("ofdm.max_paths must be positive");
  if (max_abs_sto < 0) throw ConfigError("ofdm.max_abs_sto must be non-negative");
  if (cp_len <= max_paths + max_abs_sto)
    throw ConfigError("ofdm.cp_len must exceed max_paths + max_abs_sto");
  if (num_subcarriers < max_paths + max_abs_sto)
    throw ConfigError("ofdm.num_subcarriers must be at least max_paths + max_abs_sto");
  if (tx_power < 0.0) throw ConfigError("ofdm.tx_power must be non-negative");
  if (noise_power < 0.0) throw ConfigError("ofdm.noise_power must be non-negative");
}

SubcarrierSet full_band(int num_subcarriers) {
  SubcarrierSet rows(num_subcarriers);
  for (int n = 0; n < num_subcarriers; ++n) rows[n] = n + 1;
  return rows;
}

SubcarrierSet uplink_comb(int ue, int num_ue, int num_subcarriers) {
  SubcarrierSet rows;
  for (int n = ue + 1; n <= num_subcarriers; n += num_ue) rows.push_back(n);
  return rows;
}

Eigen::MatrixXcd dft_dictionary(const SubcarrierSet& rows, int num_cols, int N) {
  Eigen::MatrixXcd g(static_cast<Eigen::Index>(rows.size()), num_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 1 || rows[r] > N)
      throw DimensionMismatchError("sub-carrier index outside [1, N]");
    // Reduce the exponent modulo N before forming the angle to keep it small.
    for (int l = 0; l < num_cols; ++l) {
      const long long e = (static_cast<long long>(rows[r] - 1) * l) % N;
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(e) / N;
      g(static_cast<Eigen::Index>(r), l) = std::polar(1.0, ang);
    }
  }
  return g;
}

namespace {

Eigen::FFT<double>& local_fft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    return f;
  }();
  return fft;
}

}  // namespace

Eigen::VectorXcd dft_apply(const SubcarrierSet& rows, int N, const Eigen::VectorXcd& taps) {
  if (taps.size() > N) throw DimensionMismatchError("more taps than sub-carriers");
  std::vector<cd> in(N, cd{0.0, 0.0});
  std::vector<cd> out;
  for (Eigen::Index l = 0; l < taps.size(); ++l) in[l] = taps[l];
  local_fft().fwd(out, in);
  Eigen::VectorXcd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 1 || rows[r] > N)
      throw DimensionMismatchError("sub-carrier index outside [1, N]");
    y[static_cast<Eigen::Index>(r)] = out[rows[r] - 1];
  }
  return y;
}

Eigen::VectorXcd dft_adjoint(const SubcarrierSet& rows, int num_cols, int N,
                             const Eigen::VectorXcd& y) {
  if (static_cast<std::size_t>(y.size()) != rows.size())
    throw DimensionMismatchError("observation length does not match the row set");
  if (num_cols > N) throw DimensionMismatchError("more columns than sub-carriers");
  std::vector<cd> in(N, cd{0.0, 0.0});
  std::vector<cd> out;
  for (std::size_t r = 0; r < rows.size(); ++r) in[rows[r] - 1] += y[static_cast<Eigen::Index>(r)];
  local_fft().inv(out, in);
  Eigen::VectorXcd h(num_cols);
  for (int l = 0; l < num_cols; ++l) h[l] = out[l];
  return h;
}

std::vector<int> TapChannel::nonzero_taps() const {
  std::vector<int> idx;
  for (Eigen::Index l = 0; l < taps.size(); ++l)
    if (taps[l] != cd{0.0, 0.0}) idx.push_back(static_cast<int>(l));
  return idx;
}

PathPhases draw_path_phases(int num_ue, int num_targets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  PathPhases p;
  p.monostatic.resize(num_targets);
  for (auto& v : p.monostatic) v = phase(rng);
  p.downlink.assign(num_ue, std::vector<double>(num_targets + 1));
  p.uplink.assign(num_ue, std::vector<double>(num_targets + 1));
  for (auto& row : p.downlink)
    for (auto& v : row) v = phase(rng);
  for (auto& row : p.uplink)
    for (auto& v : row) v = phase(rng);
  return p;
}

namespace {

int delay_bin(double sample_rate, double c0, double path_len) {
  return static_cast<int>(std::floor(sample_rate * path_len / c0));
}

void add_tap(TapChannel& ch, int index, double power_gain, double phase, const char* what) {
  if (index < 0 || index >= ch.taps.size())
    throw PathOverflowError(std::string(what) + " tap " + std::to_string(index) +
                            " outside [0, " + std::to_string(ch.taps.size()) + ")");
  ch.taps[index] += std::polar(std::sqrt(power_gain), phase);
}

void check_phases(std::span<const double> phases, std::size_t need) {
  if (phases.size() < need) throw DimensionMismatchError("too few path phases");
}

}  // namespace

TapChannel build_monostatic_channel(const Scenario& s, const ScenarioConfig& scfg,
                                    std::span<const double> phases, const OfdmConfig& cfg) {
  check_phases(phases, s.targets.size());
  TapChannel ch;
  ch.kind = ChannelKind::monostatic_bs;
  ch.taps = Eigen::VectorXcd::Zero(cfg.max_paths);
  const double fs = cfg.sample_rate();
  const double c0 = scfg.speed_of_light;
  for (int k = 0; k < s.num_targets(); ++k) {
    const double d = (s.bs - s.targets[k]).norm();
    add_tap(ch, delay_bin(fs, c0, 2.0 * d), cascaded_gain(d, d, scfg), phases[k], "monostatic");
  }
  return ch;
}

TapChannel build_downlink_channel(const Scenario& s, int ue, const ScenarioConfig& scfg,
                                  std::span<const double> phases, const OfdmConfig& cfg) {
  check_phases(phases, s.targets.size() + 1);
  const int tau = s.sto.at(ue);
  if (std::abs(tau) > cfg.max_abs_sto)
    throw AssumptionViolationError("|tau_m| exceeds the configured maximum STO");
  TapChannel ch;
  ch.kind = ChannelKind::downlink_extended;
  ch.taps = Eigen::VectorXcd::Zero(cfg.extended_len());
  const double fs = cfg.sample_rate();
  const double c0 = scfg.speed_of_light;
  const Point2& u = s.ue_true[ue];

  const double d_los = (s.bs - u).norm();
  const int l_los = delay_bin(fs, c0, d_los);
  if (l_los + tau < 0)
    throw AssumptionViolationError("l_m + tau_m < 0 for UE " + std::to_string(ue));
  if (l_los >= cfg.max_paths) throw PathOverflowError("LOS delay exceeds max_paths");
  add_tap(ch, l_los + tau, path_gain(d_los, scfg), phases[0], "downlink LOS");

  for (int k = 0; k < s.num_targets(); ++k) {
    const double d1 = (s.bs - s.targets[k]).norm();
    const double d2 = (u - s.targets[k]).norm();
    const int l = delay_bin(fs, c0, d1 + d2);
    if (l >= cfg.max_paths) throw PathOverflowError("bistatic delay exceeds max_paths");
    add_tap(ch, l + tau, cascaded_gain(d1, d2, scfg), phases[k + 1], "downlink echo");
  }
  return ch;
}

TapChannel build_uplink_self_channel(const Scenario& s, int ue, const ScenarioConfig& scfg,
                                     std::span<const double> phases, const OfdmConfig& cfg_ul) {
  check_phases(phases, s.targets.size() + 1);
  TapChannel ch;
  ch.kind = ChannelKind::uplink_self_extended;
  ch.taps = Eigen::VectorXcd::Zero(cfg_ul.extended_len());
  const double fs = cfg_ul.sample_rate();
  const double c0 = scfg.speed_of_light;
  const Point2& u = s.ue_true[ue];
  add_tap(ch, 0, path_gain(scfg.pathloss_ref_dist, scfg), phases[0], "self-leakage");
  for (int k = 0; k < s.num_targets(); ++k) {
    const double d = (u - s.targets[k]).norm();
    const int l = delay_bin(fs, c0, 2.0 * d);
    if (l >= cfg_ul.max_paths) throw PathOverflowError("uplink echo delay exceeds max_paths");
    add_tap(ch, l, cascaded_gain(d, d, scfg), phases[k + 1], "uplink echo");
  }
  return ch;
}

Eigen::VectorXcd qpsk_pilot(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> quad(0, 3);
  Eigen::VectorXcd p(size);
  for (int n = 0; n < size; ++n)
    p[n] = std::polar(1.0, std::numbers::pi / 4.0 + std::numbers::pi / 2.0 * quad(rng));
  return p;
}

RxVector synthesize_rx(const Eigen::VectorXcd& pilot, double power, const TapChannel& channel,
                       const OfdmConfig& cfg, const SubcarrierSet& rows, std::uint64_t seed) {
  if (static_cast<std::size_t>(pilot.size()) != rows.size())
    throw DimensionMismatchError("pilot length does not match the sub-carrier set");
  RxVector rx;
  rx.rows = rows;
  rx.pilot = pilot;
  rx.samples = std::sqrt(power) * pilot.cwiseProduct(dft_apply(rows, cfg.num_subcarriers, channel.taps));
  if (cfg.noise_power > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_power / 2.0));
    for (Eigen::Index n = 0; n < rx.samples.size(); ++n) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      rx.samples[n] += cd{re, im};
    }
  }
  return rx;
}

Eigen::VectorXcd strip_pilot(const RxVector& rx) {
  return rx.pilot.conjugate().cwiseProduct(rx.samples);
}

}  // namespace ueloc
