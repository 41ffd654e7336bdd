#include "ueloc/locate.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "ueloc/errors.hpp"

namespace ueloc {

namespace {

constexpr double kMinAnchorDistance = 1e-9;

}  // namespace

void GNConfig::validate() const {
  if (max_iter <= 0) throw ConfigError("gn.max_iter must be positive");
  if (!(step_tol > 0.0)) throw ConfigError("gn.step_tol must be positive");
  if (num_starts <= 0) throw ConfigError("gn.num_starts must be positive");
  if (!(damping_floor > 0.0)) throw ConfigError("gn.damping_floor must be positive");
  if (!(bs_weight > 1.0)) throw ConfigError("gn.bs_weight must exceed 1");
}

Eigen::VectorXd residuals(const Point2& a, const LocalizationProblem& p) {
  Eigen::VectorXd r(1 + static_cast<Eigen::Index>(p.ue_anchors.size()));
  r[0] = std::sqrt(p.bs_weight) * ((p.bs - a).norm() - p.bs_range);
  for (std::size_t m = 0; m < p.ue_anchors.size(); ++m) {
    const auto& u = p.ue_anchors[m];
    r[static_cast<Eigen::Index>(m) + 1] = (u.position - a).norm() - (u.btu_range - p.bs_range);
  }
  return r;
}

double objective(const Point2& a, const LocalizationProblem& p) { return residuals(a, p).squaredNorm(); }

Eigen::MatrixX2d residual_jacobian(const Point2& a, const LocalizationProblem& p) {
  Eigen::MatrixX2d J(1 + static_cast<Eigen::Index>(p.ue_anchors.size()), 2);
  auto row = [&](const Point2& anchor) -> Eigen::RowVector2d {
    const Point2 diff = a - anchor;
    return (diff / std::max(diff.norm(), kMinAnchorDistance)).transpose();
  };
  J.row(0) = std::sqrt(p.bs_weight) * row(p.bs);
  for (std::size_t m = 0; m < p.ue_anchors.size(); ++m)
    J.row(static_cast<Eigen::Index>(m) + 1) = row(p.ue_anchors[m].position);
  return J;
}

double normalized_residual(double theta, int num_ue_anchors) { return theta / (num_ue_anchors + 1); }

LocalizationResult gauss_newton_from(const LocalizationProblem& p, const GNConfig& cfg,
                                     const Point2& start) {
  LocalizationResult res;
  Point2 a = start;
  Eigen::VectorXd r = residuals(a, p);
  double obj = r.squaredNorm();
  int it = 0;
  bool converged = false;
  while (it < cfg.max_iter) {
    if (obj == 0.0) {
      converged = true;
      break;
    }
    const Eigen::MatrixX2d J = residual_jacobian(a, p);
    const Eigen::Matrix2d H = J.transpose() * J;
    const Eigen::Vector2d g = J.transpose() * r;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(H, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues()[1];
    const double lmin = eig.eigenvalues()[0];
    const bool near_singular = lmax <= 0.0 || lmin <= 1e-10 * lmax;
    const double mu_base = std::max(cfg.damping_floor, cfg.damping_floor * lmax);
    double mu = near_singular ? mu_base : 0.0;

    bool accepted = false;
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    Eigen::VectorXd r_next;
    double obj_next = obj;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::Matrix2d A = H + mu * Eigen::Matrix2d::Identity();
      step = -A.ldlt().solve(g);
      if (step.allFinite()) {
        r_next = residuals(a + step, p);
        obj_next = r_next.squaredNorm();
        if (obj_next <= obj) {
          accepted = true;
          break;
        }
      }
      mu = mu == 0.0 ? std::max(mu_base, 1e-6 * lmax) : 10.0 * mu;
    }
    if (!accepted) {
      // No descent direction left at this resolution: a stationary point.
      converged = true;
      break;
    }
    a += step;
    r = std::move(r_next);
    obj = obj_next;
    ++it;
    if (step.norm() < cfg.step_tol) {
      converged = true;
      break;
    }
  }
  res.position = a;
  res.theta = obj;
  res.theta_norm = normalized_residual(obj, static_cast<int>(p.ue_anchors.size()));
  res.iterations = it;
  res.converged = converged;
  return res;
}

LocalizationResult gauss_newton_solve(const LocalizationProblem& p, const GNConfig& cfg) {
  if (p.ue_anchors.size() < 2)
    throw UnderDeterminedError("at least two UE anchors are required for a 2D fix");
  LocalizationResult best;
  bool have = false;
  for (int s = 0; s < cfg.num_starts; ++s) {
    const double ang = 2.0 * std::numbers::pi * s / cfg.num_starts;
    const Point2 start = p.bs + p.bs_range * Point2(std::cos(ang), std::sin(ang));
    LocalizationResult r = gauss_newton_from(p, cfg, start);
    if (!have || r.theta < best.theta) {
      best = r;
      have = true;
    }
  }
  return best;
}

}  // namespace ueloc
