#pragma once

#include <vector>

#include <Eigen/Core>

#include "ueloc/scene.hpp"

namespace ueloc {

struct UeAnchor {
  int ue = 0;
  Point2 position;  // GPS-reported
  double btu_range = 0.0;
};

struct LocalizationProblem {
  Point2 bs;
  double bs_range = 0.0;
  std::vector<UeAnchor> ue_anchors;
  double bs_weight = 10.0;  // v
};

struct GNConfig {
  int max_iter = 50;
  double step_tol = 1e-6;  // m
  int num_starts = 8;
  double damping_floor = 1e-9;
  double bs_weight = 10.0;  // v used when problems are built from range sets

  void validate() const;
};

struct LocalizationResult {
  Point2 position = Point2::Zero();
  double theta = 0.0;
  double theta_norm = 0.0;  // theta / (anchors + 1)
  int iterations = 0;
  bool converged = false;
};

// v f_0(a) + sum_m f_m(a), with f_0 = (|b-a| - d_bt)^2 and
// f_m = (|u_m-a| - (d_btu_m - d_bt))^2.
double objective(const Point2& a, const LocalizationProblem& p);

// Stacked residuals [sqrt(v) r_0, r_1, ..., r_M] whose squared norm is objective().
Eigen::VectorXd residuals(const Point2& a, const LocalizationProblem& p);

// Jacobian of residuals() with respect to a; anchor distances below 1e-9 m are clamped.
Eigen::MatrixX2d residual_jacobian(const Point2& a, const LocalizationProblem& p);

// Multi-start damped Gauss-Newton. Starts sit on the circle of radius bs_range around
// the BS at uniform angles; the lowest objective wins, ties to the lowest start.
// Throws UnderDeterminedError with fewer than two UE anchors.
LocalizationResult gauss_newton_solve(const LocalizationProblem& p, const GNConfig& cfg);

// Single run from a given start point.
LocalizationResult gauss_newton_from(const LocalizationProblem& p, const GNConfig& cfg,
                                     const Point2& start);

double normalized_residual(double theta, int num_ue_anchors);

}  // namespace ueloc
