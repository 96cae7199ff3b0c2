#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "overlap_tomo/overlap_tomo.hpp"

using namespace overlap_tomo;
using Catch::Approx;

namespace {

const Spectrum kRef(0.05, 0.3, 0.65);
constexpr double kPi = std::numbers::pi;

Spectrum random_strict_spectrum(SeededRandomSource& rng) {
  for (;;) {
    const double a = -std::log(1.0 - rng.uniform());
    const double b = -std::log(1.0 - rng.uniform());
    const double c = -std::log(1.0 - rng.uniform());
    const double x = a / (a + b + c), y = b / (a + b + c);
    const auto s = Spectrum::from_unsorted(x, y, 1.0 - x - y);
    if (s.min_gap() >= 0.01) return s;
  }
}

// Golden-section search on [0, pi] after a coarse scan.
double numeric_curve_min(Permutation p, const Spectrum& s) {
  const int coarse = 2000;
  int best = 0;
  for (int i = 1; i <= coarse; ++i)
    if (permutation_curve(p, s, kPi * i / coarse).q < permutation_curve(p, s, kPi * best / coarse).q) best = i;
  double a = kPi * std::max(0, best - 1) / coarse, b = kPi * std::min(coarse, best + 1) / coarse;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (permutation_curve(p, s, c).q < permutation_curve(p, s, d).q)
      b = d;
    else
      a = c;
  }
  return std::min({permutation_curve(p, s, 0.5 * (a + b)).q, permutation_curve(p, s, 0.0).q,
                   permutation_curve(p, s, kPi).q});
}

}  // namespace

TEST_CASE("orbit points of simple rotations", "[so3]") {
  const auto id = so3_partial_overlaps(UnitaryMatrix::identity(), kRef, {0.0, 0.0, 0.0});
  CHECK(id.t.t1 == Approx(0.05).margin(1e-15));
  CHECK(id.t.t2 == Approx(0.3).margin(1e-15));
  CHECK(id.q == Approx(0.515).margin(1e-15));

  const auto flip = so3_partial_overlaps(permutation_matrix(Permutation::P13), kRef, {0.0, kPi, 0.0});
  CHECK(flip.q == Approx(0.155).margin(1e-12));
}

TEST_CASE("orbit overlaps agree with the direct trace", "[so3]") {
  SeededRandomSource rng(301);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_strict_spectrum(rng);
    const auto u = haar_unitary(rng);
    const auto angles = random_angles(rng, AngleSampling::Haar);
    const auto pt = so3_partial_overlaps(u, s, angles);
    const double direct = overlap(wigner_d(angles), DensityMatrix::from_eigen(s, u));
    CHECK(std::abs(pt.q - direct) <= 1e-12);
    CHECK(std::abs(pt.q - overlap_from_partials(s, pt.t)) <= 1e-12);
  }
}

TEST_CASE("permutation curves match the orbit and ignore alpha and gamma", "[so3][perm]") {
  SeededRandomSource rng(302);
  for (auto p : {Permutation::P13, Permutation::P12, Permutation::P23}) {
    const auto u = permutation_matrix(p);
    for (int i = 0; i < 300; ++i) {
      const auto s = i == 0 ? kRef : random_strict_spectrum(rng);
      const double beta = rng.uniform(0.0, kPi);
      const auto closed = permutation_curve(p, s, beta);
      const auto orbit = so3_partial_overlaps(u, s, {0.0, beta, 0.0});
      CHECK(std::abs(closed.t.t1 - orbit.t.t1) <= 1e-12);
      CHECK(std::abs(closed.t.t2 - orbit.t.t2) <= 1e-12);
      const WignerAngles any(rng.uniform(0.0, 2 * kPi), beta, rng.uniform(0.0, 2 * kPi));
      const auto full = so3_partial_overlaps(u, s, any);
      CHECK(std::abs(full.t.t1 - closed.t.t1) <= 1e-12);
      CHECK(std::abs(full.t.t2 - closed.t.t2) <= 1e-12);
    }
  }
}

TEST_CASE("the P13 orbit joins the maximum and minimum corners", "[so3][perm]") {
  const auto start = permutation_curve(Permutation::P13, kRef, 0.0);
  const auto end = permutation_curve(Permutation::P13, kRef, kPi);
  CHECK(start.t.t1 == Approx(0.05).margin(1e-15));
  CHECK(start.t.t2 == Approx(0.3).margin(1e-15));
  CHECK(start.q == Approx(0.515).margin(1e-15));
  CHECK(end.t.t1 == Approx(0.65).margin(1e-15));
  CHECK(end.t.t2 == Approx(0.3).margin(1e-15));
  CHECK(std::abs(end.q - 0.155) <= 1e-9);
}

TEST_CASE("permutation minima", "[so3][perm]") {
  const double q12 = permutation_min(Permutation::P12, kRef);
  const double q23 = permutation_min(Permutation::P23, kRef);
  // 40-digit reference values of the closed forms.
  CHECK(std::abs(q12 - 0.26793252595155709343) <= 1e-12);
  CHECK(std::abs(q23 - 0.25704293628808864266) <= 1e-12);
  CHECK(q12 == Approx(-std::pow(0.35, 4) / (4 * 0.85 * 0.85) + 0.95 * 1.15 / 4).margin(1e-15));

  const double cos_beta = -std::pow(1 - 0.05 - 2 * 0.65, 2) / std::pow(1 - 3 * 0.05, 2);
  CHECK(permutation_curve(Permutation::P12, kRef, std::acos(cos_beta)).q == Approx(q12).margin(1e-12));
  CHECK(permutation_curve(Permutation::P12, kRef, std::acos(cos_beta)).q == Approx(0.26793).margin(5e-6));

  CHECK_THROWS_AS(permutation_min(Permutation::P12, Spectrum(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)), DegenerateDenominator);
  CHECK_THROWS_AS(permutation_min(Permutation::P23, Spectrum(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)), DegenerateDenominator);
}

TEST_CASE("closed-form minima agree with golden-section search", "[so3][perm]") {
  SeededRandomSource rng(303);
  for (int i = 0; i < 100; ++i) {
    const auto s = i == 0 ? kRef : random_strict_spectrum(rng);
    for (auto p : {Permutation::P12, Permutation::P23}) {
      CHECK(std::abs(permutation_min(p, s) - numeric_curve_min(p, s)) <= 1e-9);
    }
  }
}

TEST_CASE("numerical SO(3) minimization", "[so3][search]") {
  SeededRandomSource rng(304);
  CHECK(std::abs(minimize_over_so3(permutation_matrix(Permutation::P13), kRef, 10'000, rng) - 0.155) <= 1e-6);
  CHECK(std::abs(minimize_over_so3(permutation_matrix(Permutation::P12), kRef, 10'000, rng) - 0.2679325259515571) <= 1e-5);
  CHECK(std::abs(minimize_over_so3(permutation_matrix(Permutation::P23), kRef, 10'000, rng) - 0.2570429362880886) <= 1e-5);
  CHECK(std::abs(minimize_over_so3(UnitaryMatrix::identity(), kRef, 10'000, rng) - 0.155) <= 1e-6);
  CHECK_THROWS_AS(minimize_over_so3(UnitaryMatrix::identity(), kRef, 999, rng), std::invalid_argument);

  const auto pt = minimize_over_so3_point(haar_unitary(rng), kRef, rng);
  CHECK(pt.q >= 0.155 - 1e-9);
  CHECK(pt.angles.beta() >= 0.0);
  CHECK(pt.angles.beta() <= kPi);
}

TEST_CASE("the identity rotation returns the purity in any eigenbasis", "[so3]") {
  SeededRandomSource rng(305);
  for (int i = 0; i < 5; ++i) {
    const auto u = haar_unitary(rng);
    CHECK(so3_partial_overlaps(u, kRef, {0.0, 0.0, 0.0}).q == Approx(kRef.purity()).margin(1e-12));
  }
}

TEST_CASE("maximin report", "[so3][maximin]") {
  const auto r = maximin_overlap(kRef);
  CHECK(r.attaining == Attaining::P12);
  CHECK(std::abs(r.q_wc - 0.267) < 0.001);
  CHECK(r.q_wc == r.q12);
  CHECK(r.q_min_w == r.q_wc);
  CHECK(r.q_min == Approx(0.155).margin(1e-15));
  CHECK(r.delta_q_min == Approx(0.11293252595155709).margin(1e-12));
  CHECK(r.q_min <= r.q_min_w);
  CHECK(r.q_min_w <= r.q_wc + 1e-9);

  // lambda2 = 1/3 is where the two permutation minima cross.
  for (double l1 : {0.0, 0.1, 0.2, 0.3}) {
    const auto tie = maximin_overlap(Spectrum(l1, 1.0 / 3.0, 2.0 / 3.0 - l1));
    CHECK(tie.attaining == Attaining::Tie);
  }
  CHECK(maximin_overlap(Spectrum(0.1, 0.35, 0.55)).attaining == Attaining::P23);

  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto near = maximin_overlap(Spectrum(1.0 / 3.0 - eps, 1.0 / 3.0, 1.0 / 3.0 + eps));
    CHECK(near.delta_q_min <= 10 * eps * eps + 1e-15);
  }
}

TEST_CASE("delta q_min grid", "[so3][maximin]") {
  CHECK_THROWS_AS(delta_qmin_grid(15), std::invalid_argument);
  const std::size_t n = 61;  // nodes at multiples of 1/60
  const auto cells = delta_qmin_grid(n);
  REQUIRE(cells.size() == n * n);
  auto cell = [&](std::size_t i, std::size_t j) { return cells[i * n + j]; };

  const auto ref = cell(3, 39);  // (0.05, 0.65)
  CHECK(ref.lambda1 == Approx(0.05));
  CHECK(ref.lambda3 == Approx(0.65));
  REQUIRE(ref.delta_q_min);
  CHECK(*ref.delta_q_min == Approx(0.11293252595155709).margin(1e-12));

  const auto centre = cell(20, 20);  // (1/3, 1/3)
  REQUIRE(centre.delta_q_min);
  CHECK(*centre.delta_q_min == 0.0);

  CHECK_FALSE(cell(0, 0).delta_q_min);   // lambda2 = 1 > lambda3
  CHECK_FALSE(cell(50, 55).delta_q_min); // lambda2 < 0

  int classified = 0;
  for (const auto& c : cells) {
    if (!c.delta_q_min) continue;
    CHECK(*c.delta_q_min >= -1e-15);
    const double l2 = 1.0 - c.lambda1 - c.lambda3;
    // On the edges l1 = l2 and l2 = l3 the two permutations are equivalent.
    if (std::min(l2 - c.lambda1, c.lambda3 - l2) < 0.01) continue;
    if (l2 < 1.0 / 3.0 - 0.02) CHECK(*c.attaining == Attaining::P12);
    if (l2 > 1.0 / 3.0 + 0.02) CHECK(*c.attaining == Attaining::P23);
    ++classified;
  }
  CHECK(classified > 100);
}

TEST_CASE("SO(3) samples stay inside the unitary support", "[so3][sampling]") {
  ExperimentConfig cfg;
  cfg.seed = 306;
  cfg.n_samples = 100'000;
  cfg.group = Group::SO3Uniform;
  cfg.eigenbasis = Eigenbasis::HaarRandom;
  cfg.snap_range = false;
  cfg.keep_samples = true;
  const auto r = sample_overlaps(cfg);
  CHECK(r.min >= 0.155 - 1e-12);
  CHECK(r.max <= 0.515 + 1e-12);
}
