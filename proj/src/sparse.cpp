#include "ueloc/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "ueloc/errors.hpp"

namespace ueloc {

void LassoConfig::validate() const {
  if (!(lambda_scale > 0.0 && lambda_scale < 1.0))
    throw ConfigError("lasso.lambda_scale must lie in (0, 1)");
  if (!(tol > 0.0)) throw ConfigError("lasso.tol must be positive");
  if (max_iter <= 0) throw ConfigError("lasso.max_iter must be positive");
  if (!(support_rel_threshold > 0.0 && support_rel_threshold < 1.0))
    throw ConfigError("lasso.support_rel_threshold must lie in (0, 1)");
  if (noise_floor_factor < 0.0) throw ConfigError("lasso.noise_floor_factor must be non-negative");
  if (lambda && !(*lambda > 0.0)) throw ConfigError("lasso.lambda must be positive");
}

LassoDesign::LassoDesign(Eigen::MatrixXcd dictionary) {
  num_rows_ = dictionary.rows();
  num_cols_ = dictionary.cols();
  gram_ = dictionary.adjoint() * dictionary;
  dense_ = std::move(dictionary);
  finish_setup();
}

LassoDesign LassoDesign::dft(SubcarrierSet rows, int num_cols, int N) {
  if (num_cols > N) throw DimensionMismatchError("more columns than sub-carriers");
  LassoDesign d;
  d.num_rows_ = static_cast<Eigen::Index>(rows.size());
  d.num_cols_ = num_cols;
  d.dft_n_ = N;

  // Gram(l, l') = c(l - l'), c(d) = sum_n exp(+j 2 pi (n-1) d / N).
  std::vector<cd> indicator(N, cd{0.0, 0.0});
  for (int n : rows) {
    if (n < 1 || n > N) throw DimensionMismatchError("sub-carrier index outside [1, N]");
    indicator[n - 1] += 1.0;
  }
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cd> c;
  fft.inv(c, indicator);
  d.gram_.resize(num_cols, num_cols);
  for (int l = 0; l < num_cols; ++l) {
    for (int lp = 0; lp < num_cols; ++lp) {
      const int diff = l - lp;
      d.gram_(l, lp) = diff >= 0 ? c[diff] : std::conj(c[-diff]);
    }
  }
  d.dft_rows_ = std::move(rows);
  d.finish_setup();
  return d;
}

void LassoDesign::finish_setup() {
  const Eigen::Index L = num_cols_;
  double max_diag = 0.0;
  double trace = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    max_diag = std::max(max_diag, gram_(l, l).real());
    trace += gram_(l, l).real();
  }
  max_col_norm_ = std::sqrt(max_diag);

  double max_off = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index lp = 0; lp < L; ++lp)
      if (l != lp) max_off = std::max(max_off, std::abs(gram_(l, lp)));
  double min_diag = max_diag;
  for (Eigen::Index l = 0; l < L; ++l) min_diag = std::min(min_diag, gram_(l, l).real());
  gram_diag_only_ = L > 0 && max_off <= 1e-9 * max_diag && (max_diag - min_diag) <= 1e-9 * max_diag;

  if (L == 0) {
    spectral_norm_sq_ = 0.0;
    return;
  }
  if (gram_diag_only_) {
    spectral_norm_sq_ = max_diag;
    return;
  }
  // Power iteration on the Hermitian PSD Gram matrix; capped by the Frobenius bound.
  Eigen::VectorXcd v(L);
  for (Eigen::Index l = 0; l < L; ++l) v[l] = cd{1.0 + 0.01 * static_cast<double>(l % 7), 0.0};
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXcd w = gram_ * v;
    const double next = v.dot(w).real();
    const double nrm = w.norm();
    if (nrm == 0.0) break;
    v = w / nrm;
    if (it > 0 && std::abs(next - est) <= 1e-13 * std::abs(next)) {
      est = next;
      break;
    }
    est = next;
  }
  spectral_norm_sq_ = std::min(std::max(est, max_diag), trace);
}

Eigen::VectorXcd LassoDesign::adjoint(const Eigen::VectorXcd& y) const {
  if (y.size() != num_rows_) throw DimensionMismatchError("observation length does not match design rows");
  if (dense_) return dense_->adjoint() * y;
  return dft_adjoint(dft_rows_, static_cast<int>(num_cols_), dft_n_, y);
}

Eigen::VectorXcd LassoDesign::apply(const Eigen::VectorXcd& h) const {
  if (h.size() != num_cols_) throw DimensionMismatchError("coefficient length does not match design columns");
  if (dense_) return *dense_ * h;
  return dft_apply(dft_rows_, dft_n_, h);
}

cd soft_threshold(cd z, double t) {
  const double mag = std::abs(z);
  if (mag <= t) return cd{0.0, 0.0};
  return z * (1.0 - t / mag);
}

namespace {

// Optimality residual given g = A^H (y - A h).
double kkt_from_gradient(const Eigen::VectorXcd& h, const Eigen::VectorXcd& g, double lambda) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double mag = std::abs(h[i]);
    const double v = mag > 0.0 ? std::abs(g[i] - lambda * h[i] / mag)
                               : std::max(0.0, std::abs(g[i]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

SparseEstimate solve_lasso(const LassoDesign& design, const Eigen::VectorXcd& y, double scale,
                           const LassoConfig& cfg, double noise_sigma) {
  cfg.validate();
  if (!(scale > 0.0)) throw DimensionMismatchError("design scale must be positive");
  const Eigen::Index L = design.cols();

  const Eigen::VectorXcd b = scale * design.adjoint(y);  // A^H y
  const double yy = y.squaredNorm();
  const double s2 = scale * scale;
  const double lip = s2 * design.spectral_norm_sq();

  SparseEstimate est;
  est.coeffs = Eigen::VectorXcd::Zero(L);
  const double b_inf = L > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
  double lambda = cfg.lambda ? *cfg.lambda : cfg.lambda_scale * b_inf;
  if (!cfg.lambda && cfg.noise_floor_factor > 0.0)
    lambda = std::max(lambda, cfg.noise_floor_factor * noise_sigma * scale * design.max_col_norm());
  est.lambda = lambda;
  est.objective = 0.5 * yy;
  if (b_inf == 0.0 || lip == 0.0) {
    // h = 0 satisfies the optimality conditions exactly.
    est.iterations = 0;
    est.kkt_residual = 0.0;
    return est;
  }

  const bool diag = design.gram_is_scaled_identity();
  const double diag_value = s2 * design.gram()(0, 0).real();
  auto gram_times = [&](const Eigen::VectorXcd& h) -> Eigen::VectorXcd {
    if (diag) return diag_value * h;
    return s2 * (design.gram() * h);
  };
  auto objective = [&](const Eigen::VectorXcd& h, const Eigen::VectorXcd& qh) {
    const double fit = 0.5 * (yy - 2.0 * h.dot(b).real() + h.dot(qh).real());
    return std::max(fit, 0.0) + lambda * h.cwiseAbs().sum();
  };

  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(L);
  Eigen::VectorXcd qh = Eigen::VectorXcd::Zero(L);
  double obj = est.objective;
  const double step = 1.0 / lip;
  const double shrink = lambda * step;
  // The gradient carries rounding at the scale of A^H y; a tolerance below that is
  // unreachable when lambda is tiny.
  const double kkt_target =
      std::max(cfg.tol * lambda, 64.0 * std::numeric_limits<double>::epsilon() * b_inf);
  est.converged = false;
  int it = 0;
  double kkt = 0.0;
  for (;; ++it) {
    const Eigen::VectorXcd g = b - qh;
    kkt = kkt_from_gradient(h, g, lambda);
    if (kkt <= kkt_target) {
      est.converged = true;
      break;
    }
    if (it >= cfg.max_iter) break;
    Eigen::VectorXcd next(L);
    for (Eigen::Index i = 0; i < L; ++i) next[i] = soft_threshold(h[i] + step * g[i], shrink);
    Eigen::VectorXcd qnext = gram_times(next);
    const double obj_next = objective(next, qnext);
    est.objective_trace.push_back(obj_next);
    h = std::move(next);
    qh = std::move(qnext);
    obj = obj_next;
  }
  est.iterations = it;
  est.coeffs = h;
  est.objective = obj;
  est.kkt_residual = kkt;
  est.support = extract_support(h, cfg.support_rel_threshold);
  return est;
}

SparseEstimate solve_lasso(const Eigen::MatrixXcd& dictionary, const Eigen::VectorXcd& y,
                           double scale, const LassoConfig& cfg, double noise_sigma) {
  if (dictionary.rows() != y.size())
    throw DimensionMismatchError("dictionary rows do not match observation length");
  return solve_lasso(LassoDesign(dictionary), y, scale, cfg, noise_sigma);
}

std::vector<int> extract_support(const Eigen::VectorXcd& coeffs, double rel_threshold) {
  std::vector<int> support;
  if (coeffs.size() == 0) return support;
  const double peak = coeffs.cwiseAbs().maxCoeff();
  if (peak == 0.0) return support;
  const double cut = rel_threshold * peak;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const double mag = std::abs(coeffs[i]);
    if (mag > 0.0 && mag >= cut) support.push_back(static_cast<int>(i));
  }
  return support;
}

double lasso_objective(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                       const Eigen::VectorXcd& h, double lambda) {
  return 0.5 * (y - A * h).squaredNorm() + lambda * h.cwiseAbs().sum();
}

double lasso_kkt_residual(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                          const Eigen::VectorXcd& h, double lambda) {
  const Eigen::VectorXcd g = A.adjoint() * (y - A * h);
  return kkt_from_gradient(h, g, lambda);
}

}  // namespace ueloc
