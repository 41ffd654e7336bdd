#pragma once

// Slow reference implementations used to cross-check the production solvers.

#include <map>
#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "ueloc/assoc.hpp"
#include "ueloc/locate.hpp"
#include "ueloc/ranging.hpp"
#include "ueloc/scene.hpp"
#include "ueloc/waveform.hpp"

namespace ueloc::oracle {

// Cyclic coordinate descent on 0.5||y - A h||^2 + lambda ||h||_1, each coordinate
// minimized exactly. Stops when a full sweep changes no coordinate by more than tol.
Eigen::VectorXcd lasso_coordinate_descent(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                                          double lambda, double tol = 1e-14,
                                          int max_sweeps = 200000);

// Central finite-difference Jacobian of locate::residuals.
Eigen::MatrixX2d numeric_jacobian(const Point2& a, const LocalizationProblem& p, double h = 1e-6);

// Coarse-to-fine grid minimization of the localization objective over a square
// centred on the BS with half-width `half_width`.
Point2 grid_minimize(const LocalizationProblem& p, double half_width, int grid = 201, int levels = 12);

// Largest |d_hat - d| over `samples` + 1 evenly spaced distances covering monostatic
// tap l (endpoints included, the upper one approached from below).
double monostatic_bin_error(int l, const OfdmConfig& cfg, double c0, int samples);
// Same for a bistatic path with STO tau recovered exactly.
double bistatic_bin_error(int l, int tau, const OfdmConfig& cfg, double c0, int samples);

struct JointAssignment {
  double total = 0.0;  // sum of theta_bar over the targets
  std::map<int, std::vector<int>> g;  // target -> g aligned with the UE list
  std::map<int, Point2> positions;
};

// Minimum-total assignment over every combination of per-target hypotheses that keeps
// each UE's indices distinct across targets and avoids the forbidden ones.
JointAssignment exhaustive_assignment(const RangeSets& ranges, const Point2& bs,
                                      const std::vector<Point2>& ue_reported,
                                      const std::vector<int>& targets, const std::vector<int>& ues,
                                      const std::map<int, std::vector<int>>& forbidden,
                                      const GNConfig& gn);

// Range sets straight from geometry: every tap quantized with floor and inverted with the
// bin-centre formulas, STO recovered exactly, no sparse recovery. Colliding taps merge.
RangeSets quantized_ranges(const Scenario& s, const OfdmConfig& dl, const OfdmConfig* ul,
                           double c0);

// Runs every oracle on fixed instances, prints one line per check and returns the
// number of failures.
int run_all_checks(std::ostream& os);

}  // namespace ueloc::oracle
