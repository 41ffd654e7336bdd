#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ueloc/scene.hpp"

namespace ueloc {

using cd = std::complex<double>;

struct OfdmConfig {
  int num_subcarriers = 3300;         // N
  double subcarrier_spacing = 120e3;  // df, Hz
  int cp_len = 420;                   // Q, samples
  double tx_power = 20.0;             // W
  double noise_power = 1e-11;         // W per sub-carrier sample
  int max_paths = 400;                // L
  int max_abs_sto = 10;               // tau_max (downlink) / eps_max (uplink)

  double sample_rate() const { return num_subcarriers * subcarrier_spacing; }
  int extended_len() const { return max_paths + max_abs_sto; }
  // Throws ConfigError.
  void validate() const;
};

// 1-based sub-carrier indices within one band.
using SubcarrierSet = std::vector<int>;

SubcarrierSet full_band(int num_subcarriers);

// Interleaved comb of the uplink band assigned to `ue`: ue+1, ue+1+M, ue+1+2M, ...
SubcarrierSet uplink_comb(int ue, int num_ue, int num_subcarriers);

// G(n, l) = exp(-j 2 pi (n-1)(l-1) / N) for 1-based row sub-carrier n and column l.
Eigen::MatrixXcd dft_dictionary(const SubcarrierSet& rows, int num_cols, int N);

// FFT-backed products with the dictionary above; results match dft_dictionary(...) * h
// and dft_dictionary(...).adjoint() * y.
Eigen::VectorXcd dft_apply(const SubcarrierSet& rows, int N, const Eigen::VectorXcd& taps);
Eigen::VectorXcd dft_adjoint(const SubcarrierSet& rows, int num_cols, int N,
                             const Eigen::VectorXcd& y);

enum class ChannelKind { monostatic_bs, downlink_extended, uplink_self_extended };

struct TapChannel {
  Eigen::VectorXcd taps;
  ChannelKind kind = ChannelKind::monostatic_bs;

  std::vector<int> nonzero_taps() const;
};

// Uniform phases on [0, 2pi) for every physical path of one trial.
struct PathPhases {
  std::vector<double> monostatic;              // K
  std::vector<std::vector<double>> downlink;   // M x (K+1); [0] is the LOS path
  std::vector<std::vector<double>> uplink;     // M x (K+1); [0] is the self-leakage
};

PathPhases draw_path_phases(int num_ue, int num_targets, std::uint64_t seed);

// BS -> target -> BS taps at floor(N df 2 d_bt / c0). Length L.
TapChannel build_monostatic_channel(const Scenario& s, const ScenarioConfig& scfg,
                                    std::span<const double> phases, const OfdmConfig& cfg);

// Quasi-synchronous BS -> UE channel: LOS at l_m + tau_m, target k at
// floor(N df d_btu / c0) + tau_m. Length L + tau_max.
TapChannel build_downlink_channel(const Scenario& s, int ue, const ScenarioConfig& scfg,
                                  std::span<const double> phases, const OfdmConfig& cfg);

// UE -> target -> same UE on the uplink band. Self-leakage at tap 0, echoes at
// floor(N_u df_u 2 d_ut / c0). No STO (own clock). Length L_u + eps_max.
TapChannel build_uplink_self_channel(const Scenario& s, int ue, const ScenarioConfig& scfg,
                                     std::span<const double> phases, const OfdmConfig& cfg_ul);

struct RxVector {
  Eigen::VectorXcd samples;
  Eigen::VectorXcd pilot;
  SubcarrierSet rows;
};

// Unit-modulus QPSK pilot.
Eigen::VectorXcd qpsk_pilot(int size, std::uint64_t seed);

// samples = sqrt(power) diag(pilot) G taps + CN(0, noise_power) per sample.
RxVector synthesize_rx(const Eigen::VectorXcd& pilot, double power, const TapChannel& channel,
                       const OfdmConfig& cfg, const SubcarrierSet& rows, std::uint64_t seed);

// conj(pilot) .* samples; the pilot is unit modulus so this leaves the noise law unchanged.
Eigen::VectorXcd strip_pilot(const RxVector& rx);

}  // namespace ueloc
