#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ueloc/waveform.hpp"

namespace ueloc {

struct LassoConfig {
  // lambda = max(lambda_scale * ||A^H y||_inf, noise_floor_factor * sigma * max_col_norm(A)).
  double lambda_scale = 0.05;
  double tol = 1e-8;
  int max_iter = 5000;
  double support_rel_threshold = 0.1;
  // Multiplier on the per-coefficient noise standard deviation of A^H y; 0 disables.
  double noise_floor_factor = 0.0;
  // Fixed lambda, overriding both rules above.
  std::optional<double> lambda;

  void validate() const;
};

struct SparseEstimate {
  Eigen::VectorXcd coeffs;
  std::vector<int> support;  // ascending
  double objective = 0.0;
  double lambda = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // objective after each iteration
};

// Design matrix A = scale * D for a fixed dictionary D, with D^H D and ||D||_2^2 cached
// so that repeated solves against the same dictionary only pay for D^H y.
class LassoDesign {
 public:
  explicit LassoDesign(Eigen::MatrixXcd dictionary);
  // DFT dictionary over the given sub-carriers; products go through the FFT and the Gram
  // matrix is built from its Toeplitz generator.
  static LassoDesign dft(SubcarrierSet rows, int num_cols, int N);

  Eigen::Index rows() const { return num_rows_; }
  Eigen::Index cols() const { return num_cols_; }
  const Eigen::MatrixXcd& gram() const { return gram_; }
  double spectral_norm_sq() const { return spectral_norm_sq_; }
  double max_col_norm() const { return max_col_norm_; }
  bool gram_is_scaled_identity() const { return gram_diag_only_; }

  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& y) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& h) const;

 private:
  LassoDesign() = default;
  void finish_setup();

  Eigen::Index num_rows_ = 0;
  Eigen::Index num_cols_ = 0;
  std::optional<Eigen::MatrixXcd> dense_;
  SubcarrierSet dft_rows_;
  int dft_n_ = 0;
  Eigen::MatrixXcd gram_;
  double spectral_norm_sq_ = 0.0;
  double max_col_norm_ = 0.0;
  bool gram_diag_only_ = false;
};

// Minimizes 0.5 ||y - scale D h||^2 + lambda ||h||_1 by proximal gradient with complex
// soft-thresholding. noise_sigma is the per-sample noise standard deviation of y.
SparseEstimate solve_lasso(const LassoDesign& design, const Eigen::VectorXcd& y, double scale,
                           const LassoConfig& cfg, double noise_sigma = 0.0);

SparseEstimate solve_lasso(const Eigen::MatrixXcd& dictionary, const Eigen::VectorXcd& y,
                           double scale, const LassoConfig& cfg, double noise_sigma = 0.0);

// Indices with |c| >= rel_threshold * max|c| (and |c| > 0), ascending.
std::vector<int> extract_support(const Eigen::VectorXcd& coeffs, double rel_threshold);

// z * max(0, 1 - t/|z|)
cd soft_threshold(cd z, double t);

double lasso_objective(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                       const Eigen::VectorXcd& h, double lambda);

// Largest violation of the complex LASSO optimality conditions for design A.
double lasso_kkt_residual(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                          const Eigen::VectorXcd& h, double lambda);

}  // namespace ueloc
