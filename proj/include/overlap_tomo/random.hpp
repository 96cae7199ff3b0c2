#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace overlap_tomo {

/// SplitMix64 finalizer, used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream purposes. Each purpose owns a disjoint family of substreams so
/// that, e.g., the eigenbasis draw never correlates with the sample draws.
enum class StreamPurpose : std::uint64_t {
  Samples = 1,
  Eigenbasis = 2,
  So3Search = 3,
  Spectra = 4,
  Test = 5,
};

/// Seeded pseudo-random source.
///
/// A source is identified by (seed, purpose, index); two sources with
/// different identities produce statistically independent sequences. All
/// parallel work is split into fixed chunks that each own one index, so
/// results never depend on the number of worker threads.
class SeededRandomSource {
 public:
  explicit SeededRandomSource(std::uint64_t seed) : SeededRandomSource(seed, StreamPurpose::Test, 0) {}

  SeededRandomSource(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(static_cast<std::uint64_t>(purpose) << 56));
    const std::uint64_t c = splitmix64(b ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
  }

  /// Standard normal variate.
  double normal() { return normal_(engine_); }

  /// Uniform variate on [0, 1).
  double uniform() { return uniform_(engine_); }

  /// Uniform variate on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace overlap_tomo
