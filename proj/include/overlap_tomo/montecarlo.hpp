#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/linalg.hpp"
#include "overlap_tomo/parallel.hpp"
#include "overlap_tomo/random.hpp"
#include "overlap_tomo/so3.hpp"

namespace overlap_tomo {

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

/// Counts on explicit bin edges. Bins are half-open [left, right) except the
/// last, which also holds its right edge. Values outside the edges are
/// counted separately and are not part of total().
class Histogram1D {
 public:
  Histogram1D(double lo, double hi, std::size_t bins) {
    if (bins < 1 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("Histogram1D: need hi > lo and at least one bin");
    edges_.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) edges_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    edges_.back() = hi;
    counts_.assign(bins, 0);
    uniform_ = true;
  }

  explicit Histogram1D(std::vector<double> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw std::invalid_argument("Histogram1D: need at least two edges");
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i)
      if (!(edges_[i] < edges_[i + 1])) throw std::invalid_argument("Histogram1D: edges must increase strictly");
    counts_.assign(edges_.size() - 1, 0);
  }

  std::optional<std::size_t> bin_of(double x) const noexcept {
    if (!(x >= edges_.front() && x <= edges_.back())) return std::nullopt;
    const std::size_t n = counts_.size();
    std::size_t i = 0;
    if (uniform_) {
      const double f = (x - edges_.front()) / (edges_.back() - edges_.front());
      i = std::min(n - 1, static_cast<std::size_t>(f * static_cast<double>(n)));
      // Guard against rounding at the computed edges.
      while (i > 0 && x < edges_[i]) --i;
      while (i + 1 < n && x >= edges_[i + 1]) ++i;
    } else {
      i = static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), x) - edges_.begin());
      i = std::min(n, i) - 1;
    }
    return i;
  }

  void add(double x) {
    if (const auto i = bin_of(x)) {
      ++counts_[*i];
      ++total_;
    } else {
      ++outside_;
    }
  }

  void merge(const Histogram1D& other) {
    if (other.edges_ != edges_) throw RangeMismatch("Histogram1D::merge: edges differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
    outside_ += other.outside_;
  }

  const std::vector<double>& edges() const noexcept { return edges_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::size_t bins() const noexcept { return counts_.size(); }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t outside() const noexcept { return outside_; }
  std::uint64_t entries() const noexcept { return total_ + outside_; }
  double lo() const noexcept { return edges_.front(); }
  double hi() const noexcept { return edges_.back(); }

  /// Fraction of all entries (inside or not) that fell into bin i.
  double mass(std::size_t i) const {
    const auto n = entries();
    return n == 0 ? 0.0 : static_cast<double>(counts_.at(i)) / static_cast<double>(n);
  }

  double normalized_density(std::size_t i) const { return mass(i) / (edges_[i + 1] - edges_[i]); }

 private:
  std::vector<double> edges_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t outside_ = 0;
  bool uniform_ = false;
};

/// Uniform 2-D histogram on [x_lo, x_hi] x [y_lo, y_hi], row-major in x.
class Histogram2D {
 public:
  Histogram2D(double x_lo, double x_hi, std::size_t nx, double y_lo, double y_hi, std::size_t ny)
      : x_(x_lo, x_hi, nx), y_(y_lo, y_hi, ny), counts_(nx * ny, 0) {}

  void add(double x, double y) {
    const auto i = x_.bin_of(x);
    const auto j = y_.bin_of(y);
    if (i && j) {
      ++counts_[*i * y_.bins() + *j];
      ++total_;
    } else {
      ++outside_;
    }
  }

  void merge(const Histogram2D& other) {
    if (other.x_.edges() != x_.edges() || other.y_.edges() != y_.edges())
      throw RangeMismatch("Histogram2D::merge: edges differ");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    total_ += other.total_;
    outside_ += other.outside_;
  }

  const std::vector<double>& x_edges() const noexcept { return x_.edges(); }
  const std::vector<double>& y_edges() const noexcept { return y_.edges(); }
  std::size_t nx() const noexcept { return x_.bins(); }
  std::size_t ny() const noexcept { return y_.bins(); }
  std::uint64_t count(std::size_t i, std::size_t j) const { return counts_.at(i * y_.bins() + j); }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t outside() const noexcept { return outside_; }
  std::uint64_t entries() const noexcept { return total_ + outside_; }

  double mass(std::size_t i, std::size_t j) const {
    const auto n = entries();
    return n == 0 ? 0.0 : static_cast<double>(count(i, j)) / static_cast<double>(n);
  }

 private:
  Histogram1D x_;
  Histogram1D y_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t outside_ = 0;
};

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class Group { SU3, SO3Uniform, SO3Haar };
enum class Eigenbasis { Identity, HaarRandom, P13, P12, P23 };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t n_samples = 1'000'000;
  Group group = Group::SU3;
  std::size_t bins = 100;
  std::size_t jpd_bins = 200;
  Spectrum spectrum{0.05, 0.3, 0.65};
  Eigenbasis eigenbasis = Eigenbasis::Identity;
  unsigned threads = 0;       ///< 0 uses every core; never changes results
  bool snap_range = true;     ///< histogram over [q_min, q_max] instead of [0, 1]
  bool keep_samples = false;  ///< return the raw overlaps as well

  void validate() const {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
    if (bins < 2 || jpd_bins < 2) throw std::invalid_argument("bins must be at least 2");
  }
};

/// Samples per independent random stream. Fixed, so the split of the work
/// never depends on the number of threads.
inline constexpr std::size_t kChunkSize = 16384;

/// Eigenvector matrix U of the state U diag(lambda) U^dagger.
inline UnitaryMatrix eigenbasis_matrix(Eigenbasis basis, std::uint64_t seed) {
  switch (basis) {
    case Eigenbasis::Identity: return UnitaryMatrix::identity();
    case Eigenbasis::HaarRandom: {
      SeededRandomSource rng(seed, StreamPurpose::Eigenbasis, 0);
      return haar_unitary(rng);
    }
    case Eigenbasis::P13: return permutation_matrix(Permutation::P13);
    case Eigenbasis::P12: return permutation_matrix(Permutation::P12);
    case Eigenbasis::P23: return permutation_matrix(Permutation::P23);
  }
  throw std::invalid_argument("unknown eigenbasis");
}

namespace detail {

/// Calls sink(t1, t2) for every sample of chunk `chunk`.
template <typename Sink>
void sample_chunk(const ExperimentConfig& cfg, const ComplexMatrix3& u, std::size_t chunk, Sink&& sink) {
  SeededRandomSource rng(cfg.seed, StreamPurpose::Samples, chunk);
  const std::size_t begin = chunk * kChunkSize;
  const std::size_t end = std::min(cfg.n_samples, begin + kChunkSize);
  const Spectrum& s = cfg.spectrum;
  const bool identity = u.isIdentity(0.0);
  for (std::size_t i = begin; i < end; ++i) {
    ComplexMatrix3 o;
    if (cfg.group == Group::SU3) {
      o = detail::haar_matrix<3>(rng);
    } else {
      const auto a = random_angles(rng, cfg.group == Group::SO3Haar ? AngleSampling::Haar : AngleSampling::Uniform);
      o = wigner_d_matrix(a.alpha(), a.beta(), a.gamma());
    }
    if (!identity) o = (u.adjoint() * o * u).eval();
    double t[2];
    for (int k = 0; k < 2; ++k) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) acc += s.values()[j] * std::norm(o(j, k));
      t[k] = std::clamp(acc, 0.0, 1.0);
    }
    sink(t[0], t[1]);
  }
}

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

}  // namespace detail

struct OverlapSamples {
  Histogram1D histogram;
  double min = 0.0;
  double max = 0.0;
  bool snapped = false;  ///< histogram range is the analytic support
  std::vector<double> samples;
};

/// Samples overlaps Q(O, rho) with O drawn from the configured group.
/// Deterministic for a fixed config; the thread count does not matter.
inline OverlapSamples sample_overlaps(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto lim = support_limits(cfg.spectrum);
  const bool snap = cfg.snap_range && lim.q_max - lim.q_min > 1e-12;
  const double lo = snap ? lim.q_min : 0.0;
  const double hi = snap ? lim.q_max : 1.0;
  // Exact-arithmetic support violations are rounding only; fold them in.
  constexpr double kSupportSlack = 1e-12;
  const ComplexMatrix3 u = eigenbasis_matrix(cfg.eigenbasis, cfg.seed).matrix();

  const std::size_t n_chunks = detail::chunk_count(cfg.n_samples);
  struct Partial {
    Histogram1D h;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::vector<double> samples;
  };
  std::vector<std::optional<Partial>> parts(n_chunks);
  parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
    Partial p{Histogram1D(lo, hi, cfg.bins)};
    if (cfg.keep_samples) p.samples.reserve(kChunkSize);
    detail::sample_chunk(cfg, u, c, [&](double t1, double t2) {
      const double q = overlap_from_partials(cfg.spectrum, t1, t2);
      p.min = std::min(p.min, q);
      p.max = std::max(p.max, q);
      p.h.add(std::abs(q - std::clamp(q, lo, hi)) <= kSupportSlack ? std::clamp(q, lo, hi) : q);
      if (cfg.keep_samples) p.samples.push_back(q);
    });
    parts[c] = std::move(p);
  });

  OverlapSamples out{Histogram1D(lo, hi, cfg.bins), std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity(), snap, {}};
  if (cfg.keep_samples) out.samples.reserve(cfg.n_samples);
  for (auto& p : parts) {
    out.histogram.merge(p->h);
    out.min = std::min(out.min, p->min);
    out.max = std::max(out.max, p->max);
    if (cfg.keep_samples) out.samples.insert(out.samples.end(), p->samples.begin(), p->samples.end());
  }
  return out;
}

/// 2-D histogram of (t1, t2) on [0, 1]^2 with cfg.jpd_bins bins per axis.
inline Histogram2D sample_jpd(const ExperimentConfig& cfg) {
  cfg.validate();
  const ComplexMatrix3 u = eigenbasis_matrix(cfg.eigenbasis, cfg.seed).matrix();
  const std::size_t nb = cfg.jpd_bins;
  const std::size_t n_chunks = detail::chunk_count(cfg.n_samples);
  std::vector<std::optional<Histogram2D>> parts(n_chunks);
  parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
    Histogram2D h(0.0, 1.0, nb, 0.0, 1.0, nb);
    detail::sample_chunk(cfg, u, c, [&](double t1, double t2) { h.add(t1, t2); });
    parts[c] = std::move(h);
  });
  Histogram2D out(0.0, 1.0, nb, 0.0, 1.0, nb);
  for (const auto& p : parts) out.merge(*p);
  return out;
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Sum over bins of |empirical mass - exact density mass|, plus the mass
/// each side has outside the histogram range. Lies in [0, 2].
inline double l1_distance(const Histogram1D& h, const PiecewisePolynomialDensity& density) {
  if (h.entries() == 0) throw RangeMismatch("l1_distance: empty histogram");
  double sum = 0.0;
  double inside = 0.0;
  const auto& e = h.edges();
  for (std::size_t i = 0; i < h.bins(); ++i) {
    double expected = 0.0;
    if (density.is_point_mass()) {
      const auto bin = h.bin_of(*density.point_mass_location());
      expected = (bin && *bin == i) ? 1.0 : 0.0;
    } else {
      expected = density.integral(e[i], e[i + 1]);
    }
    inside += expected;
    sum += std::abs(h.mass(i) - expected);
  }
  const double outside_empirical = static_cast<double>(h.outside()) / static_cast<double>(h.entries());
  const double total = density.is_point_mass() ? 1.0 : density.total_mass();
  return sum + std::max(0.0, total - inside) + outside_empirical;
}

/// Same distance for a (t1, t2) histogram against the exact joint density.
inline double l1_distance_jpd(const Histogram2D& h, const Spectrum& s) {
  if (h.entries() == 0) throw RangeMismatch("l1_distance_jpd: empty histogram");
  detail::require_strict(s);
  const auto& xe = h.x_edges();
  const auto& ye = h.y_edges();
  double sum = 0.0;
  double inside = 0.0;
  for (std::size_t i = 0; i < h.nx(); ++i) {
    for (std::size_t j = 0; j < h.ny(); ++j) {
      const double expected = jpd_cell_integral(s, xe[i], xe[i + 1], ye[j], ye[j + 1]);
      inside += expected;
      sum += std::abs(h.mass(i, j) - expected);
    }
  }
  const double outside_empirical = static_cast<double>(h.outside()) / static_cast<double>(h.entries());
  return sum + std::max(0.0, 1.0 - inside) + outside_empirical;
}

/// L1 distance between the normalized bin masses of two histograms with
/// identical edges.
inline double l1_distance(const Histogram1D& a, const Histogram1D& b) {
  if (a.edges() != b.edges()) throw RangeMismatch("l1_distance: histogram edges differ");
  if (a.entries() == 0 || b.entries() == 0) throw RangeMismatch("l1_distance: empty histogram");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.bins(); ++i) sum += std::abs(a.mass(i) - b.mass(i));
  sum += std::abs(static_cast<double>(a.outside()) / static_cast<double>(a.entries()) -
                  static_cast<double>(b.outside()) / static_cast<double>(b.entries()));
  return sum;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Distribution of the SO(3) minimum over random eigenbases
// ---------------------------------------------------------------------------

struct QminWOptions {
  std::size_t n_u = 1000;
  std::size_t budget = 10'000;
  std::uint64_t seed = 0;
  std::size_t bins = 50;
  AngleSampling sampling = AngleSampling::Uniform;
  unsigned threads = 0;
};

struct Percentiles {
  double p68 = 0.0;
  double p95 = 0.0;
  double p997 = 0.0;
};

struct QminWDistribution {
  std::vector<double> minima;  ///< one per eigenbasis, in draw order
  Histogram1D histogram;       ///< over [q_min, q_wc]
  double q_min = 0.0;
  double q_wc = 0.0;
  Percentiles percentiles;
  std::size_t violations = 0;  ///< minima above q_wc + 1e-6
};

/// Linear-interpolation percentile of sorted data, p in [0, 1].
inline double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile: no data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double f = pos - static_cast<double>(i);
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

/// SO(3) minimum for n_u Haar-random eigenbases. Eigenbasis i and its
/// search use their own streams, so results are independent of threads and
/// raising the budget keeps the same eigenbases.
inline QminWDistribution qminw_distribution(const Spectrum& s, const QminWOptions& opt = {}) {
  if (opt.n_u < 10) throw std::invalid_argument("qminw_distribution: n_u must be at least 10");
  if (opt.budget < 1000) throw std::invalid_argument("qminw_distribution: budget must be at least 1000");
  if (opt.bins < 1) throw std::invalid_argument("qminw_distribution: bins must be positive");
  const auto lim = support_limits(s);

  if (lim.q_max - lim.q_min <= 1e-12) {
    // Every rotation leaves the maximally mixed state unchanged.
    Histogram1D h(lim.q_min - 0.5, lim.q_min + 0.5, 1);
    std::vector<double> minima(opt.n_u, lim.q_min);
    for (double q : minima) h.add(q);
    return {std::move(minima), std::move(h), lim.q_min, lim.q_min, {lim.q_min, lim.q_min, lim.q_min}, 0};
  }

  const double q_wc = maximin_overlap(s).q_wc;
  std::vector<double> minima(opt.n_u);
  parallel_for(opt.n_u, opt.threads, [&](std::size_t i) {
    SeededRandomSource basis_rng(opt.seed, StreamPurpose::Eigenbasis, i + 1);
    SeededRandomSource search_rng(opt.seed, StreamPurpose::So3Search, i);
    const UnitaryMatrix u = haar_unitary(basis_rng);
    minima[i] = minimize_over_so3(u, s, opt.budget, search_rng, opt.sampling);
  });

  constexpr double kViolation = 1e-6;
  Histogram1D h(lim.q_min, q_wc, opt.bins);
  std::size_t violations = 0;
  for (double q : minima) {
    if (q > q_wc + kViolation) ++violations;
    h.add(std::abs(q - std::clamp(q, lim.q_min, q_wc)) <= kViolation ? std::clamp(q, lim.q_min, q_wc) : q);
  }
  std::vector<double> sorted = minima;
  std::sort(sorted.begin(), sorted.end());
  const Percentiles pc{percentile(sorted, 0.683), percentile(sorted, 0.954), percentile(sorted, 0.997)};
  return {std::move(minima), std::move(h), lim.q_min, q_wc, pc, violations};
}

}  // namespace overlap_tomo
