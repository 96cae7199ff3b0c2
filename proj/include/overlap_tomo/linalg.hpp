#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "overlap_tomo/config.hpp"
#include "overlap_tomo/random.hpp"

namespace overlap_tomo {

using Complex = std::complex<double>;
using ComplexMatrix3 = Eigen::Matrix3cd;
using ComplexMatrix2 = Eigen::Matrix2cd;

namespace detail {

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m(i);
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

/// Ascending eigenvalue triple of a qutrit density matrix.
class Spectrum {
 public:
  /// Throws std::invalid_argument unless 0 <= l1 <= l2 <= l3 <= 1 and the
  /// values sum to one.
  Spectrum(double l1, double l2, double l3) : values_{l1, l2, l3} {
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw std::invalid_argument("Spectrum: eigenvalues must lie in [0, 1]");
    }
    if (!(l1 <= l2 && l2 <= l3))
      throw std::invalid_argument("Spectrum: eigenvalues must be in ascending order");
    if (std::abs(l1 + l2 + l3 - 1.0) > kTolerances.spectrum_sum)
      throw std::invalid_argument("Spectrum: eigenvalues must sum to one");
  }

  /// Sorts the three values ascending. `reordered` reports whether sorting
  /// changed the order.
  static Spectrum from_unsorted(double a, double b, double c, bool* reordered = nullptr) {
    std::array<double, 3> v{a, b, c};
    const bool sorted = std::is_sorted(v.begin(), v.end());
    if (reordered) *reordered = !sorted;
    std::sort(v.begin(), v.end());
    return {v[0], v[1], v[2]};
  }

  /// Completes (l1, l2) with l3 = 1 - l1 - l2.
  static Spectrum from_two(double l1, double l2) { return {l1, l2, 1.0 - l1 - l2}; }

  double lambda1() const noexcept { return values_[0]; }
  double lambda2() const noexcept { return values_[1]; }
  double lambda3() const noexcept { return values_[2]; }
  double operator[](std::size_t i) const { return values_.at(i); }
  const std::array<double, 3>& values() const noexcept { return values_; }

  double min_gap() const noexcept { return std::min(values_[1] - values_[0], values_[2] - values_[1]); }

  /// True when both gaps reach `gap`.
  bool is_strict(double gap = kTolerances.eigenvalue_gap) const noexcept { return min_gap() >= gap; }

  /// Purity tr(rho^2).
  double purity() const noexcept {
    return values_[0] * values_[0] + values_[1] * values_[1] + values_[2] * values_[2];
  }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::array<double, 3> values_;
};

// ---------------------------------------------------------------------------
// Wigner angles
// ---------------------------------------------------------------------------

/// Euler angles (alpha, beta, gamma) of a rotation, alpha and gamma in
/// [0, 2pi), beta in [0, pi].
class WignerAngles {
 public:
  WignerAngles() = default;

  WignerAngles(double alpha, double beta, double gamma) : alpha_(alpha), beta_(beta), gamma_(gamma) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (!(alpha >= 0.0 && alpha < two_pi) || !(gamma >= 0.0 && gamma < two_pi) ||
        !(beta >= 0.0 && beta <= std::numbers::pi)) {
      throw std::invalid_argument("WignerAngles: angles out of range");
    }
  }

  /// Maps an arbitrary real triple onto the canonical ranges while keeping
  /// the rotation unchanged: D(a, -b, g) = D(a + pi, b, g + pi).
  static WignerAngles canonical(double alpha, double beta, double gamma) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto wrap = [](double x) {
      double r = std::fmod(x, two_pi);
      if (r < 0.0) r += two_pi;
      if (r >= two_pi) r = 0.0;
      return r;
    };
    double b = wrap(beta);
    if (b > std::numbers::pi) {
      b = two_pi - b;
      alpha += std::numbers::pi;
      gamma += std::numbers::pi;
    }
    return {wrap(alpha), b, wrap(gamma)};
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double gamma() const noexcept { return gamma_; }

 private:
  double alpha_ = 0.0;
  double beta_ = 0.0;
  double gamma_ = 0.0;
};

// ---------------------------------------------------------------------------
// Partial overlaps
// ---------------------------------------------------------------------------

/// The pair (t1, t2), t_k = sum_j lambda_j |O_jk|^2.
struct PartialOverlaps {
  double t1 = 0.0;
  double t2 = 0.0;

  PartialOverlaps() = default;
  PartialOverlaps(double first, double second) : t1(first), t2(second) {
    if (!(t1 >= 0.0 && t1 <= 1.0 && t2 >= 0.0 && t2 <= 1.0))
      throw std::invalid_argument("PartialOverlaps: values must lie in [0, 1]");
  }
};

/// q = l3 - t1 (l3 - l1) - t2 (l3 - l2).
inline double overlap_from_partials(const Spectrum& s, double t1, double t2) noexcept {
  return s.lambda3() - t1 * (s.lambda3() - s.lambda1()) - t2 * (s.lambda3() - s.lambda2());
}

inline double overlap_from_partials(const Spectrum& s, const PartialOverlaps& t) noexcept {
  return overlap_from_partials(s, t.t1, t.t2);
}

// ---------------------------------------------------------------------------
// Unitary and density matrices
// ---------------------------------------------------------------------------

class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(const ComplexMatrix3& m) : m_(m) {
    if (!detail::all_finite(m_)) throw std::invalid_argument("UnitaryMatrix: non-finite entry");
    const double err = detail::max_abs(m_ * m_.adjoint() - ComplexMatrix3::Identity());
    if (err > kTolerances.unitarity)
      throw std::invalid_argument("UnitaryMatrix: not unitary (deviation " + std::to_string(err) + ")");
  }

  static UnitaryMatrix identity() { return UnitaryMatrix(ComplexMatrix3::Identity()); }

  const ComplexMatrix3& matrix() const noexcept { return m_; }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  UnitaryMatrix adjoint() const { return UnitaryMatrix(m_.adjoint()); }
  Complex determinant() const { return m_.determinant(); }

  friend UnitaryMatrix operator*(const UnitaryMatrix& a, const UnitaryMatrix& b) {
    return UnitaryMatrix(a.m_ * b.m_);
  }

 private:
  ComplexMatrix3 m_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(const ComplexMatrix3& m) : m_(m) {
    if (!detail::all_finite(m_)) throw std::invalid_argument("DensityMatrix: non-finite entry");
    if (detail::max_abs(m_ - m_.adjoint()) > kTolerances.hermiticity)
      throw std::invalid_argument("DensityMatrix: not Hermitian");
    if (std::abs(m_.trace() - Complex(1.0, 0.0)) > kTolerances.trace)
      throw std::invalid_argument("DensityMatrix: trace differs from one");
    const Eigen::SelfAdjointEigenSolver<ComplexMatrix3> solver(m_, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -kTolerances.psd)
      throw std::invalid_argument("DensityMatrix: not positive semidefinite");
  }

  static DensityMatrix diagonal(const Spectrum& s) {
    ComplexMatrix3 m = ComplexMatrix3::Zero();
    for (int k = 0; k < 3; ++k) m(k, k) = s.values()[k];
    return DensityMatrix(m);
  }

  /// U diag(lambda) U^dagger.
  static DensityMatrix from_eigen(const Spectrum& s, const UnitaryMatrix& u) {
    const Eigen::Vector3cd lam(s.lambda1(), s.lambda2(), s.lambda3());
    ComplexMatrix3 m = u.matrix() * lam.asDiagonal() * u.matrix().adjoint();
    m = 0.5 * (m + m.adjoint()).eval();
    return DensityMatrix(m);
  }

  const ComplexMatrix3& matrix() const noexcept { return m_; }

 private:
  ComplexMatrix3 m_;
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Ginibre matrix QR-factorized, with Q's columns rephased by R_ii / |R_ii|
/// so that the result is Haar distributed.
template <int N>
Eigen::Matrix<Complex, N, N> haar_matrix(SeededRandomSource& rng) {
  using Mat = Eigen::Matrix<Complex, N, N>;
  Mat z;
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (int c = 0; c < N; ++c)
    for (int r = 0; r < N; ++r) {
      const double re = rng.normal();
      const double im = rng.normal();
      z(r, c) = Complex(re * inv_sqrt2, im * inv_sqrt2);
    }
  const Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  const Mat& packed = qr.matrixQR();
  for (int k = 0; k < N; ++k) {
    const Complex d = packed(k, k);
    const double mag = std::abs(d);
    if (mag > 0.0) q.col(k) *= d / mag;
  }
  return q;
}

}  // namespace detail

/// Haar-distributed 3x3 unitary (U(3); the determinant is not fixed).
inline UnitaryMatrix haar_unitary(SeededRandomSource& rng) {
  return UnitaryMatrix(detail::haar_matrix<3>(rng));
}

/// Haar-distributed 2x2 unitary, for the qubit case.
inline ComplexMatrix2 haar_unitary2(SeededRandomSource& rng) { return detail::haar_matrix<2>(rng); }

/// The j = 1 Wigner D-matrix in the basis m = +1, 0, -1.
inline ComplexMatrix3 wigner_d_matrix(double alpha, double beta, double gamma) {
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  auto phase = [](double x) { return Complex(std::cos(x), std::sin(x)); };
  const double plus = 0.5 * (1.0 + c);
  const double minus = 0.5 * (1.0 - c);
  const double side = inv_sqrt2 * s;

  ComplexMatrix3 d;
  d(0, 0) = plus * phase(-(alpha + gamma));
  d(0, 1) = -side * phase(-alpha);
  d(0, 2) = minus * phase(-(alpha - gamma));
  d(1, 0) = side * phase(-gamma);
  d(1, 1) = c;
  d(1, 2) = -side * phase(gamma);
  d(2, 0) = minus * phase(alpha - gamma);
  d(2, 1) = side * phase(alpha);
  d(2, 2) = plus * phase(alpha + gamma);
  return d;
}

inline UnitaryMatrix wigner_d(const WignerAngles& a) {
  return UnitaryMatrix(wigner_d_matrix(a.alpha(), a.beta(), a.gamma()));
}

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

struct Eigendecomposition {
  Spectrum spectrum;
  UnitaryMatrix eigenvectors;  ///< columns ordered like the spectrum
};

namespace detail {

/// Lexicographic "greater" on (Re v0, Im v0, Re v1, ...).
inline bool lex_greater(const Eigen::Vector3cd& a, const Eigen::Vector3cd& b) {
  for (int k = 0; k < 3; ++k) {
    if (a(k).real() != b(k).real()) return a(k).real() > b(k).real();
    if (a(k).imag() != b(k).imag()) return a(k).imag() > b(k).imag();
  }
  return false;
}

/// Makes the first non-negligible component real and positive.
inline void normalize_phase(Eigen::Vector3cd& v) {
  for (int k = 0; k < 3; ++k) {
    const double mag = std::abs(v(k));
    if (mag > 1e-12) {
      v *= std::conj(v(k)) / mag;
      v(k) = Complex(v(k).real(), 0.0);
      return;
    }
  }
}

}  // namespace detail

/// rho = U diag(lambda) U^dagger with lambda ascending.
///
/// Eigenvector phases are fixed so that the first non-negligible component
/// is real positive; columns with tied eigenvalues are ordered
/// lexicographically (descending) to make the output deterministic.
inline Eigendecomposition eigendecompose(const DensityMatrix& rho) {
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix3> solver(rho.matrix());
  Eigen::Vector3d w = solver.eigenvalues();
  ComplexMatrix3 v = solver.eigenvectors();

  std::array<int, 3> order{0, 1, 2};
  std::array<Eigen::Vector3cd, 3> cols;
  for (int k = 0; k < 3; ++k) {
    cols[k] = v.col(k);
    detail::normalize_phase(cols[k]);
  }
  constexpr double tie = 1e-12;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(w(a) - w(b)) > tie) return w(a) < w(b);
    return detail::lex_greater(cols[a], cols[b]);
  });

  std::array<double, 3> lam{};
  ComplexMatrix3 u;
  for (int k = 0; k < 3; ++k) {
    lam[k] = std::clamp(w(order[k]), 0.0, 1.0);
    u.col(k) = cols[order[k]];
  }
  // Tied eigenvalues may come back out of order by ~1e-16 after the tie sort.
  for (int k = 1; k < 3; ++k) lam[k] = std::max(lam[k], lam[k - 1]);
  return {Spectrum(lam[0], lam[1], lam[2]), UnitaryMatrix(u)};
}

// ---------------------------------------------------------------------------
// Overlaps
// ---------------------------------------------------------------------------

/// Q(O, rho) = tr(O rho O^dagger rho).
inline double overlap(const UnitaryMatrix& o, const DensityMatrix& rho) {
  const ComplexMatrix3& m = o.matrix();
  const Complex tr = (m * rho.matrix() * m.adjoint() * rho.matrix()).trace();
  return tr.real();
}

/// t_k = sum_j lambda_j |O_jk|^2 for all three columns.
inline std::array<double, 3> column_weights(const ComplexMatrix3& o, const Spectrum& s) {
  std::array<double, 3> t{};
  for (int k = 0; k < 3; ++k) {
    t[k] = s.lambda1() * std::norm(o(0, k)) + s.lambda2() * std::norm(o(1, k)) +
           s.lambda3() * std::norm(o(2, k));
  }
  return t;
}

inline PartialOverlaps partial_overlaps(const ComplexMatrix3& o, const Spectrum& s) {
  const auto t = column_weights(o, s);
  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return {clamp01(t[0]), clamp01(t[1])};
}

inline PartialOverlaps partial_overlaps(const UnitaryMatrix& o, const Spectrum& s) {
  return partial_overlaps(o.matrix(), s);
}

}  // namespace overlap_tomo
