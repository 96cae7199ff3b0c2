#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "overlap_tomo/config.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/linalg.hpp"

namespace overlap_tomo {

// ---------------------------------------------------------------------------
// Support limits
// ---------------------------------------------------------------------------

struct SupportLimits {
  double q_min = 0.0;
  double q_max = 0.0;
};

/// q_max = l1^2 + l2^2 + l3^2 (the purity), q_min = l2^2 + 2 l1 l3.
inline SupportLimits support_limits(const Spectrum& s) noexcept {
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  return {l2 * l2 + 2.0 * l1 * l3, l1 * l1 + l2 * l2 + l3 * l3};
}

// ---------------------------------------------------------------------------
// Joint density of the partial overlaps
// ---------------------------------------------------------------------------

namespace detail {

inline void require_strict(const Spectrum& s) {
  if (!s.is_strict())
    throw DegenerateSpectrum("eigenvalue gap " + std::to_string(s.min_gap()) +
                             " below closed-form threshold");
}

/// True on the open hexagon {l1 < t1, t2 < l3} and {l1 + l2 < t1 + t2 < l2 + l3}.
inline bool in_jpd_support(const Spectrum& s, double t1, double t2) noexcept {
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  const double sum = t1 + t2;
  return l1 < t1 && t1 < l3 && l1 < t2 && t2 < l3 && l1 + l2 < sum && sum < l2 + l3;
}

/// Closed form without the degeneracy check. The case a) branch also
/// covers the measure-zero boundary t1 = l2.
inline double jpd_unchecked(const Spectrum& s, double t1, double t2) noexcept {
  if (!in_jpd_support(s, t1, t2)) return 0.0;
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  auto f = [&](double a, double b, double c) { return std::abs(t1 - a + t2 - b) + std::abs(t2 - c); };
  // h < 0 for ascending spectra.
  const double h = (l1 - l2) * (l1 - l3) * (l2 - l3);
  if (t1 <= l2) return (f(l1, l3, l2) - f(l1, l2, l3)) / h;
  return (f(l1, l3, l2) - f(l3, l2, l1)) / h;
}

/// The nine lines n1 t1 + n2 t2 = c on which the joint density has kinks.
struct Line {
  double n1;
  double n2;
  double c;
};

inline std::vector<Line> jpd_kink_lines(const Spectrum& s) {
  const auto& l = s.values();
  std::vector<Line> lines;
  for (double v : l) lines.push_back({1.0, 0.0, v});
  for (double v : l) lines.push_back({0.0, 1.0, v});
  lines.push_back({1.0, 1.0, l[0] + l[1]});
  lines.push_back({1.0, 1.0, l[0] + l[2]});
  lines.push_back({1.0, 1.0, l[1] + l[2]});
  return lines;
}

}  // namespace detail

/// Joint density of (t1, t2) under Haar-random O for a strictly
/// non-degenerate spectrum. Zero outside the hexagonal support.
inline double jpd(const Spectrum& s, const PartialOverlaps& t) {
  detail::require_strict(s);
  return detail::jpd_unchecked(s, t.t1, t.t2);
}

inline double jpd(const Spectrum& s, double t1, double t2) {
  detail::require_strict(s);
  return detail::jpd_unchecked(s, t1, t2);
}

/// Exact integral of the joint density over [t1a, t1b] x [t2a, t2b].
///
/// The rectangle is cut along every kink line; the density is linear on
/// each fragment, so area times the value at the centroid is exact.
inline double jpd_cell_integral(const Spectrum& s, double t1a, double t1b, double t2a, double t2b) {
  detail::require_strict(s);
  using Point = std::array<double, 2>;
  using Polygon = std::vector<Point>;

  auto clip = [](const Polygon& poly, const detail::Line& ln, double sign) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = poly[i];
      const Point& q = poly[(i + 1) % n];
      const double dp = sign * (ln.n1 * p[0] + ln.n2 * p[1] - ln.c);
      const double dq = sign * (ln.n1 * q[0] + ln.n2 * q[1] - ln.c);
      if (dp <= 0.0) out.push_back(p);
      if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
        const double w = dp / (dp - dq);
        out.push_back({p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])});
      }
    }
    return out;
  };
  auto area_centroid = [](const Polygon& poly) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = poly[i];
      const Point& q = poly[(i + 1) % n];
      const double cross = p[0] * q[1] - q[0] * p[1];
      a += cross;
      cx += (p[0] + q[0]) * cross;
      cy += (p[1] + q[1]) * cross;
    }
    a *= 0.5;
    if (std::abs(a) < 1e-300) return std::array<double, 3>{0.0, 0.0, 0.0};
    return std::array<double, 3>{std::abs(a), cx / (6.0 * a), cy / (6.0 * a)};
  };

  std::vector<Polygon> pieces{{{t1a, t2a}, {t1b, t2a}, {t1b, t2b}, {t1a, t2b}}};
  for (const auto& ln : detail::jpd_kink_lines(s)) {
    std::vector<Polygon> next;
    for (const auto& poly : pieces) {
      Polygon lo = clip(poly, ln, 1.0);
      Polygon hi = clip(poly, ln, -1.0);
      if (lo.size() >= 3) next.push_back(std::move(lo));
      if (hi.size() >= 3) next.push_back(std::move(hi));
    }
    pieces = std::move(next);
  }
  double total = 0.0;
  for (const auto& poly : pieces) {
    const auto [a, cx, cy] = area_centroid(poly);
    if (a > 0.0) total += a * detail::jpd_unchecked(s, cx, cy);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Piecewise-quadratic densities
// ---------------------------------------------------------------------------

/// Density made of quadratic pieces on consecutive intervals, or a point mass.
///
/// Pieces are stored around their interval midpoints to keep narrow pieces
/// well conditioned; coefficients() converts to the global form
/// c0 + c1 q + c2 q^2. Interior breakpoints belong to the piece on their
/// right; the last breakpoint takes the left-sided limit.
class PiecewisePolynomialDensity {
 public:
  /// a0 + a1 (q - center) + a2 (q - center)^2
  struct LocalPiece {
    double center = 0.0;
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
  };

  /// From global coefficients; `breakpoints` must be strictly increasing and
  /// hold pieces.size() + 1 values.
  static PiecewisePolynomialDensity from_global(std::vector<double> breakpoints,
                                                const std::vector<std::array<double, 3>>& coeffs) {
    validate(breakpoints, coeffs.size());
    std::vector<LocalPiece> local;
    local.reserve(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      const double m = 0.5 * (breakpoints[i] + breakpoints[i + 1]);
      const auto& c = coeffs[i];
      local.push_back({m, c[0] + c[1] * m + c[2] * m * m, c[1] + 2.0 * c[2] * m, c[2]});
    }
    return PiecewisePolynomialDensity(std::move(breakpoints), std::move(local));
  }

  static PiecewisePolynomialDensity from_local(std::vector<double> breakpoints, std::vector<LocalPiece> pieces) {
    validate(breakpoints, pieces.size());
    return PiecewisePolynomialDensity(std::move(breakpoints), std::move(pieces));
  }

  /// Unit point mass at q, encoded as a zero-width interval.
  static PiecewisePolynomialDensity point_mass(double q) {
    PiecewisePolynomialDensity d;
    d.breakpoints_ = {q, q};
    d.point_mass_ = q;
    return d;
  }

  bool is_point_mass() const noexcept { return point_mass_.has_value(); }
  std::optional<double> point_mass_location() const noexcept { return point_mass_; }

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<LocalPiece>& local_pieces() const noexcept { return pieces_; }
  std::size_t size() const noexcept { return pieces_.size(); }

  double support_min() const noexcept { return breakpoints_.front(); }
  double support_max() const noexcept { return breakpoints_.back(); }

  /// Global (c0, c1, c2) per piece.
  std::vector<std::array<double, 3>> coefficients() const {
    std::vector<std::array<double, 3>> out;
    out.reserve(pieces_.size());
    for (const auto& p : pieces_) {
      const double m = p.center;
      out.push_back({p.a0 - p.a1 * m + p.a2 * m * m, p.a1 - 2.0 * p.a2 * m, p.a2});
    }
    return out;
  }

  /// Density value. Returns 0 for a point mass.
  double operator()(double q) const noexcept {
    if (point_mass_ || pieces_.empty()) return 0.0;
    if (q < breakpoints_.front() || q > breakpoints_.back()) return 0.0;
    std::size_t i = piece_index(q);
    return eval(pieces_[i], q);
  }

  /// Integral of the density over [a, b] (a point mass counts if a <= q < b,
  /// or q == b == support end).
  double integral(double a, double b) const noexcept {
    if (b < a) return -integral(b, a);
    if (point_mass_) {
      const double q = *point_mass_;
      return (a <= q && q <= b) ? 1.0 : 0.0;
    }
    a = std::max(a, breakpoints_.front());
    b = std::min(b, breakpoints_.back());
    if (b <= a) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const double lo = std::max(a, breakpoints_[i]);
      const double hi = std::min(b, breakpoints_[i + 1]);
      if (hi > lo) total += antiderivative(pieces_[i], hi) - antiderivative(pieces_[i], lo);
    }
    return total;
  }

  double total_mass() const noexcept {
    if (point_mass_) return 1.0;
    return integral(breakpoints_.front(), breakpoints_.back());
  }

  double cdf(double q) const noexcept {
    if (point_mass_) return q >= *point_mass_ ? 1.0 : 0.0;
    return integral(breakpoints_.front(), q);
  }

  /// Inverse of the CDF, p in [0, 1].
  double quantile(double p) const {
    if (point_mass_) return *point_mass_;
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
    const double target = p * total_mass();
    double acc = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const double a = breakpoints_[i], b = breakpoints_[i + 1];
      const double base = antiderivative(pieces_[i], a);
      const double mass = antiderivative(pieces_[i], b) - base;
      if (acc + mass >= target || i + 1 == pieces_.size()) {
        double lo = a, hi = b;
        for (int it = 0; it < 100 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi)); ++it) {
          const double mid = 0.5 * (lo + hi);
          if (acc + antiderivative(pieces_[i], mid) - base < target)
            lo = mid;
          else
            hi = mid;
        }
        return 0.5 * (lo + hi);
      }
      acc += mass;
    }
    return breakpoints_.back();
  }

  /// Smallest value of the density over a fine scan of every piece.
  double min_value(int samples_per_piece = 64) const noexcept {
    if (point_mass_ || pieces_.empty()) return 0.0;
    double lowest = eval(pieces_[0], breakpoints_[0]);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      for (int k = 0; k <= samples_per_piece; ++k) {
        const double q = breakpoints_[i] + (breakpoints_[i + 1] - breakpoints_[i]) * k / samples_per_piece;
        lowest = std::min(lowest, eval(pieces_[i], q));
      }
    }
    return lowest;
  }

  /// Largest jump between the left and right limits at interior breakpoints.
  double max_interior_jump() const noexcept {
    double jump = 0.0;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      const double q = breakpoints_[i];
      jump = std::max(jump, std::abs(eval(pieces_[i - 1], q) - eval(pieces_[i], q)));
    }
    return jump;
  }

 private:
  PiecewisePolynomialDensity() = default;
  PiecewisePolynomialDensity(std::vector<double> breakpoints, std::vector<LocalPiece> pieces)
      : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {}

  static void validate(const std::vector<double>& breakpoints, std::size_t n_pieces) {
    if (n_pieces == 0 || breakpoints.size() != n_pieces + 1)
      throw std::invalid_argument("PiecewisePolynomialDensity: need pieces + 1 breakpoints");
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
      if (!(breakpoints[i] < breakpoints[i + 1]))
        throw std::invalid_argument("PiecewisePolynomialDensity: breakpoints must be strictly increasing");
    }
  }

  std::size_t piece_index(double q) const noexcept {
    // First breakpoint strictly greater than q, minus one; clamp the end point
    // into the last piece.
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), q);
    auto i = static_cast<std::size_t>(std::distance(breakpoints_.begin(), it));
    i = (i == 0) ? 0 : i - 1;
    return std::min(i, pieces_.size() - 1);
  }

  static double eval(const LocalPiece& p, double q) noexcept {
    const double u = q - p.center;
    return p.a0 + u * (p.a1 + u * p.a2);
  }

  static double antiderivative(const LocalPiece& p, double q) noexcept {
    const double u = q - p.center;
    return u * (p.a0 + u * (p.a1 / 2.0 + u * p.a2 / 3.0));
  }

  std::vector<double> breakpoints_;
  std::vector<LocalPiece> pieces_;
  std::optional<double> point_mass_;
};

// ---------------------------------------------------------------------------
// Overlap density
// ---------------------------------------------------------------------------

/// Overlap density at a single q, by exact integration of the joint density
/// along the line q(t1, t2) = q. Requires a strict spectrum.
inline double overlap_density_at(const Spectrum& s, double q) {
  detail::require_strict(s);
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  const double a = l3 - l1;
  const double b = l3 - l2;
  const double lo = std::max(0.0, (l2 - q) / a);
  const double hi = std::min(1.0, (l3 - q) / a);
  if (!(hi > lo)) return 0.0;

  auto t2_of = [&](double t1) { return (l3 - q - a * t1) / b; };

  // Along the line, every kink line becomes a breakpoint in t1.
  std::array<double, 14> cuts{};
  std::size_t n = 0;
  cuts[n++] = lo;
  cuts[n++] = hi;
  for (double v : s.values()) {
    cuts[n++] = v;                    // t1 = v
    cuts[n++] = (l3 - q - b * v) / a;  // t2 = v
  }
  // t1 + t2 = c  =>  t1 (1 - a / b) = c - (l3 - q) / b; a > b so never parallel.
  for (double c : {l1 + l2, l1 + l3, l2 + l3}) cuts[n++] = (c - (l3 - q) / b) / (1.0 - a / b);

  std::sort(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(n));
  double total = 0.0;
  double prev = lo;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(cuts[i], lo, hi);
    if (x > prev) {
      const double mid = 0.5 * (prev + x);
      total += (x - prev) * detail::jpd_unchecked(s, mid, t2_of(mid));
      prev = x;
    }
  }
  // dq = b dt2 along fixed t1.
  return total / b;
}

/// Values of q at which the set of kinks met by the sweep line changes.
inline std::vector<double> overlap_density_breakpoints(const Spectrum& s) {
  const auto lim = support_limits(s);
  const auto lines = detail::jpd_kink_lines(s);
  std::vector<double> qs{lim.q_min, lim.q_max};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const auto& p = lines[i];
      const auto& r = lines[j];
      const double det = p.n1 * r.n2 - p.n2 * r.n1;
      if (det == 0.0) continue;
      const double t1 = (p.c * r.n2 - p.n2 * r.c) / det;
      const double t2 = (p.n1 * r.c - p.c * r.n1) / det;
      const double q = overlap_from_partials(s, t1, t2);
      if (q > lim.q_min && q < lim.q_max) qs.push_back(q);
    }
  }
  std::sort(qs.begin(), qs.end());
  std::vector<double> unique;
  for (double q : qs) {
    if (unique.empty() || q - unique.back() > 1e-14) unique.push_back(q);
  }
  if (unique.back() != lim.q_max) unique.back() = lim.q_max;
  return unique;
}

/// Exact piecewise-quadratic overlap density for a strict spectrum.
///
/// Between consecutive breakpoints the density is a quadratic, recovered
/// exactly from three interior evaluations of overlap_density_at().
inline PiecewisePolynomialDensity overlap_pdf(const Spectrum& s) {
  detail::require_strict(s);
  const auto bps = overlap_density_breakpoints(s);
  std::vector<PiecewisePolynomialDensity::LocalPiece> pieces;
  pieces.reserve(bps.size() - 1);
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double m = 0.5 * (bps[i] + bps[i + 1]);
    const double d = 0.25 * (bps[i + 1] - bps[i]);
    const double fm = overlap_density_at(s, m - d);
    const double f0 = overlap_density_at(s, m);
    const double fp = overlap_density_at(s, m + d);
    pieces.push_back({m, f0, (fp - fm) / (2.0 * d), (fp - 2.0 * f0 + fm) / (2.0 * d * d)});
  }
  return PiecewisePolynomialDensity::from_local(bps, std::move(pieces));
}

// ---------------------------------------------------------------------------
// Special cases
// ---------------------------------------------------------------------------

enum class SpecialCaseKind { Qubit, QutritPure, QutritHalfHalf, MaximallyMixed };

struct SpecialCase {
  SpecialCaseKind kind = SpecialCaseKind::MaximallyMixed;
  double lambda1 = 0.0;  ///< smaller qubit eigenvalue; ignored otherwise

  static SpecialCase qubit(double l1) { return {SpecialCaseKind::Qubit, l1}; }
  static SpecialCase qutrit_pure() { return {SpecialCaseKind::QutritPure, 0.0}; }
  static SpecialCase qutrit_half_half() { return {SpecialCaseKind::QutritHalfHalf, 0.0}; }
  static SpecialCase maximally_mixed() { return {SpecialCaseKind::MaximallyMixed, 0.0}; }
};

/// Closed-form densities for the qubit and the degenerate qutrit cases.
inline PiecewisePolynomialDensity special_case_pdf(const SpecialCase& c) {
  switch (c.kind) {
    case SpecialCaseKind::Qubit: {
      const double l1 = c.lambda1;
      if (!(l1 >= 0.0 && l1 < 0.5))
        throw InvalidParameter("qubit eigenvalue must satisfy 0 <= lambda1 < 1/2");
      const double l2 = 1.0 - l1;
      const double gap = l1 - l2;
      return PiecewisePolynomialDensity::from_global({2.0 * l1 * l2, l1 * l1 + l2 * l2},
                                                     {{1.0 / (gap * gap), 0.0, 0.0}});
    }
    case SpecialCaseKind::QutritPure:
      return PiecewisePolynomialDensity::from_global({0.0, 1.0}, {{2.0, -2.0, 0.0}});
    case SpecialCaseKind::QutritHalfHalf:
      return PiecewisePolynomialDensity::from_global({0.25, 0.5}, {{16.0, -32.0, 0.0}});
    case SpecialCaseKind::MaximallyMixed:
      return PiecewisePolynomialDensity::point_mass(1.0 / 3.0);
  }
  throw InvalidParameter("unknown special case");
}

/// Recognizes the degenerate qutrit spectra that have a closed form.
inline std::optional<SpecialCase> match_special_case(const Spectrum& s, double tol = 1e-12) {
  auto near = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  const double l1 = s.lambda1(), l2 = s.lambda2(), l3 = s.lambda3();
  if (near(l1, 1.0 / 3.0) && near(l3, 1.0 / 3.0)) return SpecialCase::maximally_mixed();
  if (near(l1, 0.0) && near(l2, 0.0) && near(l3, 1.0)) return SpecialCase::qutrit_pure();
  if (near(l1, 0.0) && near(l2, 0.5) && near(l3, 0.5)) return SpecialCase::qutrit_half_half();
  return std::nullopt;
}

/// overlap_pdf for strict spectra, the closed forms for recognized
/// degenerate ones; DegenerateSpectrum otherwise.
inline PiecewisePolynomialDensity overlap_pdf_any(const Spectrum& s) {
  if (s.is_strict()) return overlap_pdf(s);
  if (auto special = match_special_case(s)) return special_case_pdf(*special);
  throw DegenerateSpectrum("degenerate spectrum without a closed-form density");
}

}  // namespace overlap_tomo
