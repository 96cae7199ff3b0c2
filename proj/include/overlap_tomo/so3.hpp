#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/config.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/linalg.hpp"
#include "overlap_tomo/random.hpp"

namespace overlap_tomo {

/// One point of the SO(3) orbit of a state: the rotation, its partial
/// overlaps and the resulting overlap.
struct OrbitPoint {
  WignerAngles angles;
  PartialOverlaps t{0.0, 0.0};
  double q = 0.0;
};

/// Eigenbases that permute the eigenvectors. The entries follow the sign
/// convention under which the rotated matrices stay real.
enum class Permutation { P13, P12, P23 };

inline const char* to_string(Permutation p) {
  switch (p) {
    case Permutation::P13: return "P13";
    case Permutation::P12: return "P12";
    case Permutation::P23: return "P23";
  }
  return "?";
}

inline UnitaryMatrix permutation_matrix(Permutation p) {
  ComplexMatrix3 m = ComplexMatrix3::Zero();
  switch (p) {
    case Permutation::P13:
      m(0, 2) = 1.0; m(1, 1) = -1.0; m(2, 0) = 1.0;
      break;
    case Permutation::P12:
      m(0, 1) = 1.0; m(1, 0) = 1.0; m(2, 2) = -1.0;
      break;
    case Permutation::P23:
      m(0, 0) = -1.0; m(1, 2) = 1.0; m(2, 1) = 1.0;
      break;
  }
  return UnitaryMatrix(m);
}

namespace detail {

/// Partial overlaps of the rotated eigenbasis U^dagger D U.
inline std::array<double, 2> so3_partials(const ComplexMatrix3& u, const Spectrum& s, double alpha, double beta,
                                          double gamma) {
  const ComplexMatrix3 rotated = u.adjoint() * wigner_d_matrix(alpha, beta, gamma) * u;
  std::array<double, 2> t{};
  for (int k = 0; k < 2; ++k) {
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) acc += s.values()[j] * std::norm(rotated(j, k));
    t[k] = std::clamp(acc, 0.0, 1.0);
  }
  return t;
}

}  // namespace detail

/// Partial overlaps and overlap for the rotation D(angles) acting on the
/// state U diag(s) U^dagger.
inline OrbitPoint so3_partial_overlaps(const UnitaryMatrix& u, const Spectrum& s, const WignerAngles& angles) {
  const auto t = detail::so3_partials(u.matrix(), s, angles.alpha(), angles.beta(), angles.gamma());
  return {angles, PartialOverlaps(t[0], t[1]), overlap_from_partials(s, t[0], t[1])};
}

/// Closed-form orbit of a permutation eigenbasis; only beta matters.
inline OrbitPoint permutation_curve(Permutation p, const Spectrum& s, double beta) {
  if (!std::isfinite(beta)) throw std::invalid_argument("permutation_curve: beta must be finite");
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  const double c = std::cos(beta);
  const double c2 = c * c;
  const double s2 = 1.0 - c2;
  double t1 = 0.0, t2 = 0.0;
  switch (p) {
    case Permutation::P13:
      t1 = 0.5 * l2 * s2 + 0.25 * (l1 + l3) * (1.0 + c2) + 0.5 * (l1 - l3) * c;
      t2 = l2 * c2 + 0.5 * (l1 + l3) * s2;
      break;
    case Permutation::P12:
      t1 = -0.5 * (1.0 - 3.0 * l1) * c2 + 0.5 * (1.0 - l1);
      t2 = 0.25 * (1.0 - 3.0 * l1) * c2 + 0.5 * (1.0 - l1 - 2.0 * l3) * c + 0.25 * (1.0 + l1);
      break;
    case Permutation::P23:
      t1 = 0.25 * (1.0 - 3.0 * l3) * c2 - 0.5 * (1.0 - l3 - 2.0 * l1) * c + 0.25 * (1.0 + l3);
      t2 = 0.25 * (1.0 - 3.0 * l3) * c2 + 0.5 * (1.0 - l3 - 2.0 * l1) * c + 0.25 * (1.0 + l3);
      break;
  }
  t1 = std::clamp(t1, 0.0, 1.0);
  t2 = std::clamp(t2, 0.0, 1.0);
  const auto angles = WignerAngles::canonical(0.0, beta, 0.0);
  return {angles, PartialOverlaps(t1, t2), overlap_from_partials(s, t1, t2)};
}

/// Minimum over beta of the overlap along the P12 or P23 orbit.
///
/// Along both orbits q = A cos^2 + B cos + C. The stationary point
/// cos = -B / 2A is used when it lies in [-1, 1]; otherwise the minimum sits
/// at beta = pi.
inline double permutation_min(Permutation p, const Spectrum& s) {
  if (p == Permutation::P13) return support_limits(s).q_min;
  const double lk = p == Permutation::P12 ? s.lambda1() : s.lambda3();
  const double lo = p == Permutation::P12 ? s.lambda3() : s.lambda1();
  const double den = (1.0 - 3.0 * lk) * (1.0 - 3.0 * lk);
  if (den < kTolerances.permutation_denominator)
    throw DegenerateDenominator(std::string(to_string(p)) + ": (1 - 3 lambda)^2 vanishes");
  const double lin = 1.0 - lk - 2.0 * lo;
  const double a = 0.25 * den;
  const double b = 0.5 * lin * lin;
  const double c = 0.25 * (1.0 - lk) * (1.0 + 3.0 * lk);
  const double stationary = -b / (2.0 * a);
  if (stationary < -1.0) return a - b + c;
  return c - b * b / (4.0 * a);
}

// ---------------------------------------------------------------------------
// Numerical search over SO(3)
// ---------------------------------------------------------------------------

/// How random Euler angles are drawn. Uniform draws all three angles
/// uniformly (not the invariant measure); Haar weights beta by sin(beta).
enum class AngleSampling { Uniform, Haar };

inline WignerAngles random_angles(SeededRandomSource& rng, AngleSampling mode) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double alpha = rng.uniform(0.0, two_pi);
  const double beta = mode == AngleSampling::Haar ? std::acos(std::clamp(rng.uniform(-1.0, 1.0), -1.0, 1.0))
                                                  : rng.uniform(0.0, std::numbers::pi);
  const double gamma = rng.uniform(0.0, two_pi);
  return {alpha, beta, gamma};
}

struct So3SearchOptions {
  std::size_t budget = 10'000;
  std::size_t seeds = 5;
  int max_iterations = 200;
  double angle_tolerance = 1e-10;
  double initial_step = 0.05;
  AngleSampling sampling = AngleSampling::Uniform;
};

namespace detail {

/// Nelder-Mead on R^3 with standard coefficients.
template <typename F>
std::pair<std::array<double, 3>, double> nelder_mead(F&& f, std::array<double, 3> x0, double step, int max_iter,
                                                    double tol) {
  using Point = std::array<double, 3>;
  std::array<Point, 4> p;
  std::array<double, 4> v{};
  p[0] = x0;
  for (int i = 0; i < 3; ++i) {
    p[i + 1] = x0;
    p[i + 1][i] += step;
  }
  for (int i = 0; i < 4; ++i) v[i] = f(p[i]);

  auto combine = [](const Point& a, const Point& b, double w) {
    Point r;
    for (int k = 0; k < 3; ++k) r[k] = a[k] + w * (b[k] - a[k]);
    return r;
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    std::array<int, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::array<Point, 4> ps;
    std::array<double, 4> vs{};
    for (int i = 0; i < 4; ++i) {
      ps[i] = p[order[i]];
      vs[i] = v[order[i]];
    }
    p = ps;
    v = vs;

    double size = 0.0;
    for (int i = 1; i < 4; ++i)
      for (int k = 0; k < 3; ++k) size = std::max(size, std::abs(p[i][k] - p[0][k]));
    if (size < tol) break;

    Point centroid{};
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) centroid[k] += p[i][k] / 3.0;

    const Point xr = combine(centroid, p[3], -1.0);
    const double fr = f(xr);
    if (fr < v[0]) {
      const Point xe = combine(centroid, p[3], -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        p[3] = xe; v[3] = fe;
      } else {
        p[3] = xr; v[3] = fr;
      }
      continue;
    }
    if (fr < v[2]) {
      p[3] = xr; v[3] = fr;
      continue;
    }
    const bool outside = fr < v[3];
    const Point xc = outside ? combine(centroid, xr, 0.5) : combine(centroid, p[3], 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : v[3])) {
      p[3] = xc; v[3] = fc;
      continue;
    }
    for (int i = 1; i < 4; ++i) {
      p[i] = combine(p[0], p[i], 0.5);
      v[i] = f(p[i]);
    }
  }
  const auto best = std::min_element(v.begin(), v.end()) - v.begin();
  return {p[best], v[best]};
}

}  // namespace detail

/// Minimum overlap over SO(3) for the eigenbasis `u`: random search over
/// `budget` angle triples, then simplex refinement from the best few.
inline OrbitPoint minimize_over_so3_point(const UnitaryMatrix& u, const Spectrum& s, SeededRandomSource& rng,
                                          const So3SearchOptions& opt = {}) {
  if (opt.budget < 1000) throw std::invalid_argument("minimize_over_so3: budget must be at least 1000");
  const ComplexMatrix3& m = u.matrix();
  auto q_at = [&](double a, double b, double g) {
    const auto t = detail::so3_partials(m, s, a, b, g);
    return overlap_from_partials(s, t[0], t[1]);
  };

  struct Candidate {
    double q;
    std::array<double, 3> x;
  };
  const std::size_t keep = std::max<std::size_t>(1, opt.seeds);
  std::vector<Candidate> best;
  best.reserve(keep + 1);
  for (std::size_t i = 0; i < opt.budget; ++i) {
    const auto a = random_angles(rng, opt.sampling);
    const double q = q_at(a.alpha(), a.beta(), a.gamma());
    if (best.size() < keep || q < best.back().q) {
      best.push_back({q, {a.alpha(), a.beta(), a.gamma()}});
      std::sort(best.begin(), best.end(), [](const Candidate& x, const Candidate& y) { return x.q < y.q; });
      if (best.size() > keep) best.pop_back();
    }
  }

  Candidate winner = best.front();
  auto objective = [&](const std::array<double, 3>& x) { return q_at(x[0], x[1], x[2]); };
  for (const auto& c : best) {
    const auto [x, q] = detail::nelder_mead(objective, c.x, opt.initial_step, opt.max_iterations,
                                            opt.angle_tolerance);
    if (q < winner.q) winner = {q, x};
  }
  const auto angles = WignerAngles::canonical(winner.x[0], winner.x[1], winner.x[2]);
  return so3_partial_overlaps(u, s, angles);
}

inline double minimize_over_so3(const UnitaryMatrix& u, const Spectrum& s, std::size_t budget,
                                SeededRandomSource& rng, AngleSampling sampling = AngleSampling::Uniform) {
  So3SearchOptions opt;
  opt.budget = budget;
  opt.sampling = sampling;
  return minimize_over_so3_point(u, s, rng, opt).q;
}

// ---------------------------------------------------------------------------
// Worst-case overlap
// ---------------------------------------------------------------------------

enum class Attaining { P12, P23, Tie };

inline const char* to_string(Attaining a) {
  switch (a) {
    case Attaining::P12: return "P12";
    case Attaining::P23: return "P23";
    case Attaining::Tie: return "tie";
  }
  return "?";
}

struct MaximinReport {
  double q_min_w = 0.0;  ///< SO(3) minimum of the worst-case eigenbasis, equal to q_wc
  double q_min = 0.0;    ///< unrestricted minimum
  double q_wc = 0.0;
  double delta_q_min = 0.0;
  double q12 = 0.0;
  double q23 = 0.0;
  Attaining attaining = Attaining::Tie;
};

/// Worst-case SO(3) minimum over eigenbases, taken over the two permutation
/// eigenbases that are conjectured to be extremal.
inline MaximinReport maximin_overlap(const Spectrum& s) {
  MaximinReport r;
  r.q_min = support_limits(s).q_min;
  r.q12 = permutation_min(Permutation::P12, s);
  r.q23 = permutation_min(Permutation::P23, s);
  r.q_wc = std::max(r.q12, r.q23);
  r.q_min_w = r.q_wc;
  r.delta_q_min = r.q_wc - r.q_min;
  if (std::abs(r.q12 - r.q23) <= kTolerances.maximin_tie)
    r.attaining = Attaining::Tie;
  else
    r.attaining = r.q12 > r.q23 ? Attaining::P12 : Attaining::P23;
  return r;
}

struct GridCell {
  double lambda1 = 0.0;
  double lambda3 = 0.0;
  std::optional<double> delta_q_min;  ///< empty for unphysical cells
  std::optional<Attaining> attaining;
};

/// delta_q_min on the (lambda1, lambda3) grid with nodes i / (resolution - 1).
/// Cells that are not ascending spectra stay empty; the maximally mixed
/// cell is assigned 0.
inline std::vector<GridCell> delta_qmin_grid(std::size_t resolution) {
  if (resolution < 16) throw std::invalid_argument("delta_qmin_grid: resolution must be at least 16");
  constexpr double tol = 1e-12;
  const double step = 1.0 / static_cast<double>(resolution - 1);
  std::vector<GridCell> cells;
  cells.reserve(resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      GridCell cell;
      cell.lambda1 = static_cast<double>(i) * step;
      cell.lambda3 = static_cast<double>(j) * step;
      const double l1 = cell.lambda1, l3 = cell.lambda3;
      const double l2 = 1.0 - l1 - l3;
      if (l2 >= l1 - tol && l3 >= l2 - tol && l2 >= -tol) {
        const double mid = std::clamp(l2, l1, l3);
        const Spectrum s(l1, mid, l3);
        if (s.lambda3() - s.lambda1() < tol) {
          cell.delta_q_min = 0.0;
          cell.attaining = Attaining::Tie;
        } else {
          const auto r = maximin_overlap(s);
          cell.delta_q_min = r.delta_q_min;
          cell.attaining = r.attaining;
        }
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace overlap_tomo
