#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/config.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/linalg.hpp"
#include "overlap_tomo/random.hpp"

namespace overlap_tomo {

/// Measured support limits with one-sigma uncertainties.
struct LimitEstimate {
  double q_min = 0.0;
  double q_max = 0.0;
  double dq_min = 0.0;
  double dq_max = 0.0;
};

struct EstimateFlags {
  bool near_singular = false;  ///< 3r - 2 or s below the singular threshold
  bool clamped = false;        ///< noisy limits were pulled onto the physical boundary

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (near_singular) out.emplace_back("NearSingular");
    if (clamped) out.emplace_back("Clamped");
    return out;
  }
};

struct SpectrumEstimate {
  Spectrum spectrum;
  double dlambda1 = 0.0;
  double dlambda2 = 0.0;
  double dlambda3 = 0.0;
  EstimateFlags flags;
};

/// Recovers the spectrum from (q_min, q_max) and propagates Gaussian errors.
///
/// With r = q_max + q_min and s = q_max - q_min,
///   l2 = (1 - sqrt(3r - 2)) / 3,  l1 = (1 - l2 - sqrt(s)) / 2.
/// The limits only fix l2 up to the reflection l2 -> 2/3 - l2; the root
/// with l2 <= 1/3 is returned.
///
/// Errors are propagated to first order from independent q_min and q_max.
/// For dq_min = dq_max and D^2 = dq_min^2 + dq_max^2 this reduces to
///   dl2 = D / (2 sqrt(3r - 2)), dl1 = (D / 4) sqrt(1 / (3r - 2) + 1 / s).
/// dl3 = dl1 + dl2 assumes fully correlated errors.
///
/// Singular directions (3r - 2 -> 0 or s -> 0) set flags.near_singular and
/// give infinite uncertainties whenever D > 0.
inline SpectrumEstimate invert_limits(const LimitEstimate& in) {
  for (double v : {in.q_min, in.q_max, in.dq_min, in.dq_max}) {
    if (!std::isfinite(v)) throw std::invalid_argument("invert_limits: non-finite input");
  }
  if (in.dq_min < 0.0 || in.dq_max < 0.0) throw std::invalid_argument("invert_limits: negative uncertainty");
  if (in.q_max < in.q_min) throw UnphysicalLimits("q_max is smaller than q_min");

  EstimateFlags flags;
  const double r = in.q_max + in.q_min;
  const double s = in.q_max - in.q_min;
  const double delta2 = in.dq_min * in.dq_min + in.dq_max * in.dq_max;
  const double delta = std::sqrt(delta2);

  double disc = 3.0 * r - 2.0;
  if (disc < 0.0) {
    // Noise may push slightly below the physical boundary r = 2/3.
    // Deficits within rounding are not reported as clamping.
    if (-disc <= std::max(3.0 * delta2, kTolerances.spectrum_sum)) {
      flags.clamped = -disc > kTolerances.spectrum_sum;
      disc = 0.0;
    } else {
      throw UnphysicalLimits("q_max + q_min = " + std::to_string(r) + " is below 2/3");
    }
  }

  const double l2 = (1.0 - std::sqrt(disc)) / 3.0;
  double l1 = (1.0 - l2 - std::sqrt(s)) / 2.0;
  if (l1 < 0.0) {
    if (l1 < -kTolerances.spectrum_sum) throw UnphysicalLimits("limits imply a negative eigenvalue");
    l1 = 0.0;
  }
  double l3 = 1.0 - l1 - l2;
  if (l2 < l1) {
    if (l1 - l2 > kTolerances.spectrum_sum) throw UnphysicalLimits("limits imply unordered eigenvalues");
    l1 = l2;
    l3 = 1.0 - l1 - l2;
  }

  flags.near_singular = disc < kTolerances.near_singular || s < kTolerances.near_singular;

  constexpr double inf = std::numeric_limits<double>::infinity();
  double dl2 = 0.0;
  double dl1 = 0.0;
  if (delta > 0.0) {
    dl2 = disc > 0.0 ? delta / (2.0 * std::sqrt(disc)) : inf;
    if (disc > 0.0 && s > 0.0) {
      // d l1 / d q_min = (a + b) / 4, d l1 / d q_max = (a - b) / 4
      const double a = 1.0 / std::sqrt(disc), b = 1.0 / std::sqrt(s);
      dl1 = 0.25 * std::hypot((a + b) * in.dq_min, (a - b) * in.dq_max);
    } else {
      dl1 = inf;
    }
  }
  return {Spectrum(l1, l2, l3), dl1, dl2, dl1 + dl2, flags};
}

/// invert_limits(support_limits(s)) with exact limits.
inline SpectrumEstimate round_trip(const Spectrum& s) {
  const auto lim = support_limits(s);
  return invert_limits({lim.q_min, lim.q_max, 0.0, 0.0});
}

// ---------------------------------------------------------------------------
// Support limits from samples
// ---------------------------------------------------------------------------

/// Sample extrema; the uncertainty is the mean spacing of the `k` most
/// extreme order statistics.
struct MinMaxMethod {
  std::size_t k = 10;
};

/// Extrapolates each support edge from its `k` most extreme order statistics.
///
/// Near an edge e the CDF is modelled as F(x) ~ C |x - e|^m, so
/// x_(i) = e + A (i / (n + 1))^(1/m) and e is the intercept of a straight
/// line fit. m = 1 is a density that stays finite at the edge; generic
/// qutrit overlap densities vanish quadratically there (m = 3).
/// k = 0 selects max(10, n / 1000).
struct TailFitMethod {
  std::size_t k = 0;
  double edge_exponent = 3.0;
};

using LimitMethod = std::variant<MinMaxMethod, TailFitMethod>;

namespace detail {

struct LineFit {
  double intercept = 0.0;
  double intercept_se = 0.0;
};

/// Least-squares edge estimate from `extreme`, the distances of the k most
/// extreme order statistics from the outermost one (ascending).
///
/// Order statistics are strongly correlated, so the standard error and the
/// small-sample bias come from a parametric bootstrap of the fitted tail:
/// uniform order statistics near an edge are cumulative sums of unit
/// exponentials divided by n + 1.
inline LineFit tail_edge(std::span<const double> extreme, std::size_t n, double m) {
  const std::size_t k = extreme.size();
  std::vector<double> u(k);
  for (std::size_t i = 0; i < k; ++i)
    u[i] = std::pow(static_cast<double>(i + 1) / static_cast<double>(n + 1), 1.0 / m);

  auto fit = [&](std::span<const double> y) {
    const auto n_fit = static_cast<double>(k);
    const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n_fit;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n_fit;
    double suu = 0.0, suy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      suu += (u[i] - mu) * (u[i] - mu);
      suy += (u[i] - mu) * (y[i] - my);
    }
    const double slope = suu > 0.0 ? suy / suu : 0.0;
    return std::pair{my - slope * mu, slope};
  };

  const auto [intercept, scale] = fit(extreme);

  constexpr int kReplicates = 200;
  SeededRandomSource rng(0x7a11f17ULL, StreamPurpose::Test, n * 1315423911ULL + k);
  std::vector<double> sim(k), shifted(k);
  double sum = 0.0, sum_sq = 0.0;
  for (int b = 0; b < kReplicates; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      acc += -std::log1p(-rng.uniform());
      sim[i] = scale * std::pow(acc / static_cast<double>(n + 1), 1.0 / m);
    }
    for (std::size_t i = 0; i < k; ++i) shifted[i] = sim[i] - sim[0];
    // Simulated edge sits at 0; the estimate relative to it is sim[0] + a.
    const double est = sim[0] + fit(shifted).first;
    sum += est;
    sum_sq += est * est;
  }
  const double mean = sum / kReplicates;
  const double var = std::max(0.0, sum_sq / kReplicates - mean * mean);
  return {intercept - mean, std::sqrt(var)};
}

}  // namespace detail

/// Estimates (q_min, q_max) and their uncertainties from raw overlap samples.
inline LimitEstimate estimate_limits_from_samples(std::span<const double> samples,
                                                  const LimitMethod& method = MinMaxMethod{}) {
  constexpr std::size_t kMinSamples = 100;
  if (samples.size() < kMinSamples)
    throw InsufficientSamples("need at least " + std::to_string(kMinSamples) + " samples, got " +
                              std::to_string(samples.size()));
  for (double q : samples) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("overlap samples must lie in [0, 1]");
  }
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();

  if (const auto* mm = std::get_if<MinMaxMethod>(&method)) {
    const std::size_t k = std::clamp<std::size_t>(mm->k, 1, n - 1);
    const double lo_gap = (x[k] - x[0]) / static_cast<double>(k);
    const double hi_gap = (x[n - 1] - x[n - 1 - k]) / static_cast<double>(k);
    return {x.front(), x.back(), lo_gap, hi_gap};
  }

  const auto& tf = std::get<TailFitMethod>(method);
  if (!(tf.edge_exponent > 0.0)) throw std::invalid_argument("TailFit: edge exponent must be positive");
  std::size_t k = tf.k == 0 ? std::max<std::size_t>(10, n / 1000) : tf.k;
  k = std::clamp<std::size_t>(k, 3, n / 2);

  // Distances measured inward from a reference just outside the sample, so
  // both edges use the same increasing-coordinate fit.
  std::vector<double> lower(k), upper(k);
  for (std::size_t i = 0; i < k; ++i) {
    lower[i] = x[i] - x[0];
    upper[i] = x[n - 1] - x[n - 1 - i];
  }
  const auto lo = detail::tail_edge(lower, n, tf.edge_exponent);
  const auto hi = detail::tail_edge(upper, n, tf.edge_exponent);
  // Extrapolated edges never move inside the observed range.
  double q_min = x[0] + std::min(lo.intercept, 0.0);
  double q_max = x[n - 1] - std::min(hi.intercept, 0.0);
  q_min = std::max(q_min, 0.0);
  q_max = std::min(q_max, 1.0);
  return {q_min, q_max, lo.intercept_se, hi.intercept_se};
}

}  // namespace overlap_tomo
