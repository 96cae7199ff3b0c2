#pragma once

#ifndef OVERLAP_TOMO_VERSION
#define OVERLAP_TOMO_VERSION "0.1.0"
#endif

namespace overlap_tomo {

inline constexpr const char* kLibraryVersion = OVERLAP_TOMO_VERSION;

/// Numerical tolerances shared by every module.
///
/// Constructor checks use the tight 1e-12 family; reconstruction-style
/// comparisons (eigendecomposition round trips) use the looser 1e-10.
struct Tolerances {
  double unitarity = 1e-12;      ///< ||M M^dagger - 1||_max
  double hermiticity = 1e-12;    ///< ||M - M^dagger||_max
  double trace = 1e-12;          ///< |tr M - 1|
  double psd = 1e-12;            ///< smallest admissible eigenvalue is -psd
  double spectrum_sum = 1e-12;   ///< |l1 + l2 + l3 - 1|
  double reconstruction = 1e-10; ///< ||U diag(l) U^dagger - rho||_max
  double imaginary_residue = 1e-12;

  /// Smallest eigenvalue gap for which the closed-form joint density is used.
  double eigenvalue_gap = 1e-8;

  /// Below this, 3r - 2 or s are treated as singular by the limit inversion.
  double near_singular = 1e-9;

  /// Smallest admissible (1 - 3 lambda)^2 in the permutation minima.
  double permutation_denominator = 1e-12;

  /// Two permutation minima closer than this are reported as a tie.
  double maximin_tie = 1e-10;
};

inline constexpr Tolerances kTolerances{};

}  // namespace overlap_tomo
