#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "overlap_tomo/overlap_tomo.hpp"

using namespace overlap_tomo;
using Catch::Approx;

TEST_CASE("inverting exact limits recovers the spectrum", "[estimator]") {
  const auto e = invert_limits({0.155, 0.515, 0.0, 0.0});
  CHECK(e.spectrum.lambda1() == Approx(0.05).margin(1e-12));
  CHECK(e.spectrum.lambda2() == Approx(0.3).margin(1e-12));
  CHECK(e.spectrum.lambda3() == Approx(0.65).margin(1e-12));
  CHECK(e.dlambda1 == 0.0);
  CHECK(e.dlambda2 == 0.0);
  CHECK(e.dlambda3 == 0.0);
  CHECK_FALSE(e.flags.near_singular);
  CHECK_FALSE(e.flags.clamped);
}

TEST_CASE("equal limits give the maximally mixed state", "[estimator]") {
  const auto e = invert_limits({1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0});
  for (double v : e.spectrum.values()) CHECK(v == Approx(1.0 / 3.0).margin(1e-7));
  CHECK(e.flags.near_singular);
}

TEST_CASE("propagated uncertainties match reference values", "[estimator]") {
  // Reference values evaluated in 40-digit arithmetic at r = 0.67, s = 0.36.
  const auto e = invert_limits({0.155, 0.515, 1e-3, 1e-3});
  CHECK(std::abs(e.dlambda1 - 0.0035843021946010944882) <= 1e-12);
  CHECK(std::abs(e.dlambda2 - 0.0070710678118654752440) <= 1e-12);
  CHECK(std::abs(e.dlambda3 - 0.010655370006466569732) <= 1e-12);
  CHECK(e.dlambda3 * e.dlambda3 <=
        e.dlambda1 * e.dlambda1 + e.dlambda2 * e.dlambda2 + 2 * e.dlambda1 * e.dlambda2 + 1e-12);

  // Unequal errors: r and s are then correlated.
  const auto u = invert_limits({0.155, 0.515, 1e-3, 3e-3});
  CHECK(std::abs(u.dlambda1 - 0.0068970605655195202472) <= 1e-12);
  CHECK(std::abs(u.dlambda2 - 0.015811388300841896660) <= 1e-12);
}

TEST_CASE("the r-weighted uncertainty form underestimates the spread", "[estimator]") {
  // The form dl2 = r D / (2 sqrt(3r - 2)) is smaller than the first-order
  // propagation by exactly the factor r.
  const auto e = invert_limits({0.155, 0.515, 1e-3, 1e-3});
  const double r_weighted = 0.67 * std::sqrt(2.0) * 1e-3 / (2 * std::sqrt(3 * 0.67 - 2));
  CHECK(r_weighted / e.dlambda2 == Approx(0.67).epsilon(1e-12));
}

TEST_CASE("round trip through the support limits", "[estimator]") {
  SeededRandomSource rng(201);
  int done = 0;
  while (done < 1000) {
    const double l2 = rng.uniform(0.0, 1.0 / 3.0 - 1e-3);
    const double l1 = rng.uniform(0.0, l2);
    const double l3 = 1.0 - l1 - l2;
    if (l3 < l2) continue;
    const Spectrum s(l1, l2, l3);
    const auto e = round_trip(s);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(e.spectrum.values()[k] - s.values()[k]) <= 1e-10);
    ++done;
  }
  const auto exact = round_trip(Spectrum(0.05, 0.3, 0.65));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(exact.spectrum.values()[k] - Spectrum(0.05, 0.3, 0.65).values()[k]) <= 1e-12);
}

TEST_CASE("round trip flags the singular directions", "[estimator]") {
  CHECK(round_trip(Spectrum(0.1, 1.0 / 3.0, 1.0 - 0.1 - 1.0 / 3.0)).flags.near_singular);
  const auto mixed = round_trip(Spectrum(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0));
  CHECK(mixed.flags.near_singular);
  for (double v : mixed.spectrum.values()) CHECK(v == Approx(1.0 / 3.0).margin(1e-7));
}

TEST_CASE("a spectrum with lambda2 above 1/3 maps to its reflected partner", "[estimator]") {
  // The limits are unchanged under lambda2 -> 2/3 - lambda2 with lambda1 + lambda3
  // adjusted, so only the lambda2 <= 1/3 member can be returned.
  const Spectrum high(0.1, 0.4, 0.5);
  const auto e = round_trip(high);
  CHECK(e.spectrum.lambda2() <= 1.0 / 3.0);
  const auto back = support_limits(e.spectrum);
  const auto orig = support_limits(high);
  CHECK(back.q_min == Approx(orig.q_min).margin(1e-12));
  CHECK(back.q_max == Approx(orig.q_max).margin(1e-12));
}

TEST_CASE("uncertainty grows with the input error and near r = 2/3", "[estimator]") {
  double previous = 0.0;
  for (double d : {1e-5, 1e-4, 1e-3, 1e-2}) {
    const auto e = invert_limits({0.155, 0.515, d, d});
    CHECK(e.dlambda2 > previous);
    previous = e.dlambda2;
  }
  const double s = 0.2;
  auto at = [&](double r) {
    const double q_min = 0.5 * (r - s), q_max = 0.5 * (r + s);
    return invert_limits({q_min, q_max, 1e-4, 1e-4}).dlambda2;
  };
  CHECK(at(2.0 / 3.0 + 1e-4) >= 9.0 * at(2.0 / 3.0 + 1e-2));
}

TEST_CASE("linearized propagation matches noisy inversions", "[estimator]") {
  const auto lim = support_limits(Spectrum(0.05, 0.3, 0.65));
  const double dq = 1e-4;
  SeededRandomSource rng(202);
  const int n = 10'000;
  double s1 = 0, ss1 = 0, s2 = 0, ss2 = 0;
  for (int i = 0; i < n; ++i) {
    const auto e = invert_limits({lim.q_min + dq * rng.normal(), lim.q_max + dq * rng.normal(), 0.0, 0.0});
    s1 += e.spectrum.lambda1();
    ss1 += e.spectrum.lambda1() * e.spectrum.lambda1();
    s2 += e.spectrum.lambda2();
    ss2 += e.spectrum.lambda2() * e.spectrum.lambda2();
  }
  const double sd1 = std::sqrt(ss1 / n - (s1 / n) * (s1 / n));
  const double sd2 = std::sqrt(ss2 / n - (s2 / n) * (s2 / n));
  const auto predicted = invert_limits({lim.q_min, lim.q_max, dq, dq});
  CHECK(sd1 == Approx(predicted.dlambda1).epsilon(0.10));
  CHECK(sd2 == Approx(predicted.dlambda2).epsilon(0.10));

  // Same with unequal errors on the two limits.
  s1 = ss1 = s2 = ss2 = 0;
  for (int i = 0; i < n; ++i) {
    const auto e = invert_limits({lim.q_min + dq * rng.normal(), lim.q_max + 3 * dq * rng.normal(), 0.0, 0.0});
    s1 += e.spectrum.lambda1();
    ss1 += e.spectrum.lambda1() * e.spectrum.lambda1();
    s2 += e.spectrum.lambda2();
    ss2 += e.spectrum.lambda2() * e.spectrum.lambda2();
  }
  const auto unequal = invert_limits({lim.q_min, lim.q_max, dq, 3 * dq});
  CHECK(std::sqrt(ss1 / n - (s1 / n) * (s1 / n)) == Approx(unequal.dlambda1).epsilon(0.10));
  CHECK(std::sqrt(ss2 / n - (s2 / n) * (s2 / n)) == Approx(unequal.dlambda2).epsilon(0.10));
}

TEST_CASE("inversion always yields an ascending spectrum", "[estimator]") {
  SeededRandomSource rng(203);
  for (int i = 0; i < 5000; ++i) {
    const double l1 = rng.uniform(0.0, 1.0 / 3.0);
    const double l3 = rng.uniform(1.0 / 3.0, 1.0 - 2 * l1);
    const double l2 = 1.0 - l1 - l3;
    if (l2 < l1 || l2 > l3) continue;
    const auto lim = support_limits(Spectrum(l1, l2, l3));
    const auto e = invert_limits({lim.q_min, lim.q_max, 0.0, 0.0});
    CHECK(e.spectrum.lambda1() <= e.spectrum.lambda2());
    CHECK(e.spectrum.lambda2() <= e.spectrum.lambda3());
    CHECK(e.spectrum.lambda2() == Approx((1.0 - std::sqrt(std::max(0.0, 3.0 * (lim.q_min + lim.q_max) - 2.0))) / 3.0).margin(1e-12));
  }
}

TEST_CASE("unphysical limits are rejected or clamped", "[estimator]") {
  CHECK_THROWS_AS(invert_limits({0.4, 0.2, 0.0, 0.0}), UnphysicalLimits);
  CHECK_THROWS_AS(invert_limits({0.2, 0.4, 0.0, 0.0}), UnphysicalLimits);  // r = 0.6 < 2/3
  CHECK_THROWS_AS(invert_limits({0.155, 0.515, -1e-3, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(invert_limits({std::nan(""), 0.515, 0.0, 0.0}), std::invalid_argument);

  // r = 2/3 - 1e-6 with dq = 1e-3: within 3 (dq_min^2 + dq_max^2).
  const double r = 2.0 / 3.0 - 1e-6, s = 0.1;
  const auto e = invert_limits({0.5 * (r - s), 0.5 * (r + s), 1e-3, 1e-3});
  CHECK(e.flags.clamped);
  CHECK(e.flags.near_singular);
  CHECK(e.spectrum.lambda2() == Approx(1.0 / 3.0).margin(1e-15));
  CHECK(std::isinf(e.dlambda2));
  CHECK_THROWS_AS(invert_limits({0.5 * (r - s), 0.5 * (r + s), 1e-5, 1e-5}), UnphysicalLimits);
}

TEST_CASE("limits from samples: input validation", "[estimator][samples]") {
  std::vector<double> few(99, 0.3);
  CHECK_THROWS_AS(estimate_limits_from_samples(few), InsufficientSamples);
  std::vector<double> bad(200, 0.3);
  bad[5] = 1.5;
  CHECK_THROWS_AS(estimate_limits_from_samples(bad), std::invalid_argument);

  std::vector<double> same(500, 1.0 / 3.0);
  for (const LimitMethod m : {LimitMethod{MinMaxMethod{}}, LimitMethod{TailFitMethod{}}}) {
    const auto lim = estimate_limits_from_samples(same, m);
    CHECK(lim.q_min == 1.0 / 3.0);
    CHECK(lim.q_max == 1.0 / 3.0);
    CHECK(lim.dq_min == 0.0);
    CHECK(lim.dq_max == 0.0);
  }
}

TEST_CASE("limits from uniform samples fall within three sigma", "[estimator][samples]") {
  int covered = 0, mm_covered = 0;
  const int runs = 60;
  for (int run = 0; run < runs; ++run) {
    SeededRandomSource rng(204, StreamPurpose::Test, run);
    std::vector<double> xs(20'000);
    for (auto& x : xs) x = rng.uniform(0.42, 0.58);
    const auto tf = estimate_limits_from_samples(xs, TailFitMethod{0, 1.0});
    const bool ok = std::abs(tf.q_min - 0.42) <= 3 * tf.dq_min && std::abs(tf.q_max - 0.58) <= 3 * tf.dq_max;
    covered += ok;
    const auto mm = estimate_limits_from_samples(xs, MinMaxMethod{});
    mm_covered += std::abs(mm.q_min - 0.42) <= 3 * mm.dq_min && std::abs(mm.q_max - 0.58) <= 3 * mm.dq_max;
  }
  CHECK(covered >= runs * 9 / 10);
  CHECK(mm_covered >= runs * 8 / 10);
}

TEST_CASE("tail fit locates the edges of Haar overlap samples", "[estimator][samples]") {
  ExperimentConfig cfg;
  cfg.seed = 205;
  cfg.n_samples = 1'000'000;
  cfg.keep_samples = true;
  const auto run = sample_overlaps(cfg);
  const auto lim = estimate_limits_from_samples(run.samples, TailFitMethod{});
  CHECK(std::abs(lim.q_min - 0.155) < 0.002);
  CHECK(std::abs(lim.q_max - 0.515) < 0.002);
  CHECK(lim.dq_min > 0.0);
  CHECK(lim.dq_max > 0.0);
  const auto e = invert_limits(lim);
  CHECK(e.spectrum.lambda1() == Approx(0.05).margin(0.01));
  CHECK(e.spectrum.lambda2() == Approx(0.3).margin(0.01));
}
