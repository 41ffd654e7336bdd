#include "ueloc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "ueloc/errors.hpp"
#include "ueloc/sparse.hpp"

namespace ueloc::oracle {

Eigen::VectorXcd lasso_coordinate_descent(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& y,
                                          double lambda, double tol, int max_sweeps) {
  const Eigen::Index L = A.cols();
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(L);
  Eigen::VectorXcd r = y;
  Eigen::VectorXd norms = A.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < L; ++i) {
      if (norms[i] == 0.0) continue;
      const cd z = A.col(i).dot(r) + norms[i] * h[i];
      const double mag = std::abs(z);
      const cd next = mag <= lambda ? cd{0.0, 0.0} : z * (1.0 - lambda / mag) / norms[i];
      const cd delta = next - h[i];
      if (delta != cd{0.0, 0.0}) {
        r -= A.col(i) * delta;
        h[i] = next;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change <= tol * (1.0 + h.cwiseAbs().maxCoeff())) break;
  }
  return h;
}

Eigen::MatrixX2d numeric_jacobian(const Point2& a, const LocalizationProblem& p, double h) {
  const Eigen::Index rows = 1 + static_cast<Eigen::Index>(p.ue_anchors.size());
  Eigen::MatrixX2d J(rows, 2);
  for (int c = 0; c < 2; ++c) {
    Point2 up = a;
    Point2 dn = a;
    up[c] += h;
    dn[c] -= h;
    J.col(c) = (residuals(up, p) - residuals(dn, p)) / (2.0 * h);
  }
  return J;
}

Point2 grid_minimize(const LocalizationProblem& p, double half_width, int grid, int levels) {
  Point2 centre = p.bs;
  double w = half_width;
  Point2 best = centre;
  double best_obj = objective(best, p);
  for (int lv = 0; lv < levels; ++lv) {
    const double step = 2.0 * w / (grid - 1);
    const Point2 c = centre;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        const Point2 a(c.x() - w + i * step, c.y() - w + j * step);
        const double f = objective(a, p);
        if (f < best_obj) {
          best_obj = f;
          best = a;
        }
      }
    }
    centre = best;
    w = 2.0 * step;
  }
  return best;
}

namespace {

template <class Quantize>
double bin_error(double lo, double hi, int samples, Quantize q) {
  double worst = 0.0;
  for (int j = 0; j <= samples; ++j) {
    double d = lo + (hi - lo) * j / samples;
    if (j == samples) d = std::nextafter(hi, lo);
    worst = std::max(worst, std::abs(q(d) - d));
  }
  return worst;
}

}  // namespace

double monostatic_bin_error(int l, const OfdmConfig& cfg, double c0, int samples) {
  const double w = c0 / (2.0 * cfg.sample_rate());
  return bin_error(l * w, (l + 1) * w, samples, [&](double d) {
    const int tap = static_cast<int>(std::floor(cfg.sample_rate() * 2.0 * d / c0));
    return range_from_monostatic_tap(tap, cfg, c0);
  });
}

double bistatic_bin_error(int l, int tau, const OfdmConfig& cfg, double c0, int samples) {
  const double w = c0 / cfg.sample_rate();
  return bin_error(l * w, (l + 1) * w, samples, [&](double d) {
    const int observed = static_cast<int>(std::floor(cfg.sample_rate() * d / c0)) + tau;
    return *range_from_bistatic_tap(observed, tau, cfg, c0);
  });
}

JointAssignment exhaustive_assignment(const RangeSets& ranges, const Point2& bs,
                                      const std::vector<Point2>& ue_reported,
                                      const std::vector<int>& targets, const std::vector<int>& ues,
                                      const std::map<int, std::vector<int>>& forbidden,
                                      const GNConfig& gn) {
  const std::size_t T = targets.size();
  // Per UE: every injective map from the targets to its permitted indices.
  std::vector<std::vector<std::vector<int>>> maps;
  for (int ue : ues) {
    const UeRangeSet* set = ranges.find(ue);
    if (!set) throw DimensionMismatchError("UE without range set");
    std::vector<int> avail;
    for (int g = 0; g < static_cast<int>(set->d_btu.size()); ++g) {
      auto f = forbidden.find(ue);
      if (f != forbidden.end() && std::find(f->second.begin(), f->second.end(), g) != f->second.end())
        continue;
      avail.push_back(g);
    }
    if (avail.size() < T) throw DimensionMismatchError("UE has fewer permitted indices than targets");
    std::vector<std::vector<int>> m;
    std::vector<int> cur;
    std::vector<bool> used(avail.size(), false);
    std::function<void()> rec = [&] {
      if (cur.size() == T) {
        m.push_back(cur);
        return;
      }
      for (std::size_t i = 0; i < avail.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        cur.push_back(avail[i]);
        rec();
        cur.pop_back();
        used[i] = false;
      }
    };
    rec();
    maps.push_back(std::move(m));
  }

  std::map<std::pair<int, std::vector<int>>, LocalizationResult> cache;
  auto theta = [&](int t, const std::vector<int>& g) -> const LocalizationResult& {
    auto key = std::make_pair(targets[t], g);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    LocalizationProblem p;
    p.bs = bs;
    p.bs_range = ranges.d_bt[targets[t]];
    p.bs_weight = gn.bs_weight;
    for (std::size_t i = 0; i < ues.size(); ++i)
      p.ue_anchors.push_back({ues[i], ue_reported[ues[i]], ranges.find(ues[i])->d_btu[g[i]]});
    return cache.emplace(key, gauss_newton_solve(p, gn)).first->second;
  };

  JointAssignment best;
  best.total = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> digit(ues.size(), 0);
  while (true) {
    double total = 0.0;
    std::vector<std::vector<int>> per_target(T, std::vector<int>(ues.size()));
    for (std::size_t i = 0; i < ues.size(); ++i)
      for (std::size_t t = 0; t < T; ++t) per_target[t][i] = maps[i][digit[i]][t];
    for (std::size_t t = 0; t < T; ++t) total += theta(static_cast<int>(t), per_target[t]).theta_norm;
    if (total < best.total) {
      best.total = total;
      best.g.clear();
      best.positions.clear();
      for (std::size_t t = 0; t < T; ++t) {
        best.g[targets[t]] = per_target[t];
        best.positions[targets[t]] = theta(static_cast<int>(t), per_target[t]).position;
      }
    }
    std::size_t i = ues.size();
    while (i-- > 0) {
      if (++digit[i] < maps[i].size()) break;
      digit[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return best;
}

RangeSets quantized_ranges(const Scenario& s, const OfdmConfig& dl, const OfdmConfig* ul, double c0) {
  const double rate = dl.sample_rate();
  std::set<int> bs_taps;
  for (const auto& a : s.targets)
    bs_taps.insert(static_cast<int>(std::floor(rate * 2.0 * (s.bs - a).norm() / c0)));
  std::vector<UeSupport> ues;
  for (int m = 0; m < s.num_ue(); ++m) {
    const int los = static_cast<int>(std::floor(rate * (s.bs - s.ue_true[m]).norm() / c0));
    const int tau = s.sto[m];
    std::set<int> taps{los + tau};
    for (const auto& a : s.targets) {
      const double d = (s.bs - a).norm() + (s.ue_true[m] - a).norm();
      taps.insert(static_cast<int>(std::floor(rate * d / c0)) + tau);
    }
    UeSupport u;
    u.ue = m;
    u.downlink.assign(taps.begin(), taps.end());
    u.sto = estimate_sto(los + tau, los);
    if (ul) {
      std::set<int> up{0};
      for (const auto& a : s.targets)
        up.insert(static_cast<int>(std::floor(ul->sample_rate() * 2.0 * (s.ue_true[m] - a).norm() / c0)));
      u.uplink = std::vector<int>(up.begin(), up.end());
    }
    ues.push_back(std::move(u));
  }
  return assemble_range_sets(std::vector<int>(bs_taps.begin(), bs_taps.end()), ues, dl,
                             ul ? std::optional<OfdmConfig>(*ul) : std::nullopt, c0);
}

namespace {

void report(std::ostream& os, bool ok, const std::string& name, const std::string& detail, int& failures) {
  os << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
  if (!ok) ++failures;
}

}  // namespace

int run_all_checks(std::ostream& os) {
  int failures = 0;
  std::ostringstream d;
  auto detail = [&] {
    std::string s = d.str();
    d.str("");
    return s;
  };
  d << std::setprecision(6);

  {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd A(16, 8);
    Eigen::VectorXcd y(16);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = cd{g(rng), g(rng)};
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = cd{g(rng), g(rng)};
    const double lambda = 0.1 * (A.adjoint() * y).cwiseAbs().maxCoeff();
    LassoConfig cfg;
    cfg.lambda = lambda;
    cfg.tol = 1e-12;
    cfg.max_iter = 200000;
    const SparseEstimate est = solve_lasso(A, y, 1.0, cfg);
    const Eigen::VectorXcd ref = lasso_coordinate_descent(A, y, lambda);
    const double f_ref = lasso_objective(A, y, ref, lambda);
    const double f_est = lasso_objective(A, y, est.coeffs, lambda);
    const double rel = std::abs(f_est - f_ref) / f_ref;
    d << "objective " << f_est << " vs coordinate descent " << f_ref << " rel " << rel;
    report(os, rel <= 1e-6, "lasso_random_16x8", detail(), failures);
  }
  {
    const Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(8, 8);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(8);
    y[3] = 3.0;
    LassoConfig cfg;
    cfg.lambda = 1.0;
    const SparseEstimate est = solve_lasso(A, y, 1.0, cfg);
    const double err = std::abs(est.coeffs[3] - cd{2.0, 0.0}) + est.coeffs.cwiseAbs().sum() - std::abs(est.coeffs[3]);
    d << "coefficient " << est.coeffs[3].real() << " error " << err;
    report(os, err <= 1e-8, "lasso_orthonormal_soft_threshold", detail(), failures);
  }
  {
    LocalizationProblem p;
    p.bs = Point2(0, 0);
    p.bs_range = 5.0;
    p.ue_anchors = {{1, Point2(10, 0), 5.0 + std::sqrt(65.0)}, {2, Point2(0, 10), 5.0 + std::sqrt(45.0)}};
    const LocalizationResult r = gauss_newton_solve(p, GNConfig{});
    const Point2 grid = grid_minimize(p, 20.0);
    const double err = (r.position - Point2(3, 4)).norm();
    d << "gauss-newton error " << err << " m, grid oracle error " << (grid - Point2(3, 4)).norm() << " m";
    report(os, err < 1e-6 && (grid - Point2(3, 4)).norm() < 1e-6, "gauss_newton_exact_geometry", detail(),
           failures);
  }
  {
    OfdmConfig dl;
    const double c0 = kSpeedOfLight;
    double mono = 0.0;
    double bi = 0.0;
    for (int l = 0; l < 50; ++l) {
      mono = std::max(mono, monostatic_bin_error(l, dl, c0, 4000));
      bi = std::max(bi, bistatic_bin_error(l, 3, dl, c0, 4000));
    }
    const double mono_bound = c0 / (4.0 * dl.sample_rate());
    const double bi_bound = c0 / (2.0 * dl.sample_rate());
    d << "monostatic " << mono << " <= " << mono_bound << ", bistatic " << bi << " <= " << bi_bound;
    report(os, mono <= mono_bound * (1 + 1e-12) && bi <= bi_bound * (1 + 1e-12), "range_quantization_bounds",
           detail(), failures);
  }
  {
    ScenarioConfig sc;
    sc.num_ue = 4;
    sc.num_effective = 4;
    sc.num_targets = 3;
    OfdmConfig dl;
    dl.noise_power = 0.0;
    SelectionConfig sel;
    GNConfig gn;
    int tried = 0;
    int agree = 0;
    for (std::uint64_t seed = 1; tried < 20 && seed < 1000; ++seed) {
      SceneConstraints cons{dl.max_abs_sto, dl.sample_rate() / sc.speed_of_light};
      const Scenario s = generate_scenario(sc, cons, seed);
      const RangeSets r = quantized_ranges(s, dl, nullptr, sc.speed_of_light);
      if (r.num_targets() != 3 || r.ues.size() != 4) continue;
      bool full = true;
      for (const auto& u : r.ues) full = full && u.d_btu.size() == 3;
      if (!full) continue;
      ++tried;
      const std::vector<int> ues{0, 1, 2, 3};
      const auto greedy = solve_p6(r, s.bs, s.ue_reported, {0, 1, 2}, ues, {}, sel, gn);
      const JointAssignment ex = exhaustive_assignment(r, s.bs, s.ue_reported, {0, 1, 2}, ues, {}, gn);
      bool same = true;
      for (const auto& f : greedy) same = same && f.localized && f.g == ex.g.at(f.target);
      agree += same ? 1 : 0;
    }
    d << agree << "/" << tried << " scenes match the exhaustive assignment";
    report(os, tried > 0 && agree >= 0.95 * tried, "p6_greedy_vs_exhaustive", detail(), failures);
  }
  return failures;
}

}  // namespace ueloc::oracle
