#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bspa/error.hpp"
#include "bspa/losses.hpp"
#include "bspa/rng.hpp"

namespace bspa {
namespace {

TEST(LossClo, EqualLogitsGiveLn2) {
  const std::vector<double> z = {0.3, 0.3};
  EXPECT_NEAR(loss_clo(z), std::log(2.0), 1e-15);
}

TEST(LossClo, HandValue) {
  const std::vector<double> z = {1.0, 0.0, 0.0};
  const double e = std::exp(1.0);
  EXPECT_NEAR(loss_clo(z), -std::log(e / (e + 2.0)), 1e-15);
  EXPECT_NEAR(loss_clo(z), 0.5514, 5e-5);
}

TEST(LossClo, DominantPositiveApproachesZero) {
  const std::vector<double> z = {800.0, 0.0, -3.0};
  EXPECT_LT(loss_clo(z), 1e-300);
  EXPECT_GE(loss_clo(z), 0.0);
}

TEST(LossClo, DecreasesAsPositiveRises) {
  double prev = std::numeric_limits<double>::infinity();
  for (double p = -3; p <= 3; p += 0.25) {
    const std::vector<double> z = {p, 0.5, -0.2};
    const double l = loss_clo(z);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(LossClo, GradientMatchesFiniteDifference) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> z(2 + rng.below(5)), g(z.size());
    for (auto& x : z) x = rng.uniform(-5, 5);
    loss_clo(z, g);
    for (std::size_t i = 0; i < z.size(); ++i) {
      auto zp = z, zm = z;
      zp[i] += 1e-6;
      zm[i] -= 1e-6;
      EXPECT_NEAR(g[i], (loss_clo(zp) - loss_clo(zm)) / 2e-6, 1e-8);
    }
  }
}

TEST(LossClo, Errors) {
  const std::vector<double> one = {1.0};
  EXPECT_THROW(loss_clo(one), ValidationError);
  const std::vector<double> bad = {1.0, std::nan("")};
  EXPECT_THROW(loss_clo(bad), NumericError);
  const std::vector<double> inf = {std::numeric_limits<double>::infinity(), 0.0};
  EXPECT_THROW(loss_clo(inf), NumericError);
}

TEST(LossDiv, FullMassIsOne) {
  Rng rng(4);
  Matrix m(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = rng.uniform(-1, 1);
  EXPECT_NEAR(loss_div(m, 4), 1.0, 1e-15);
  std::vector<double> g(4);
  topk_softmax_mass(m.row(0), 4, g);
  for (double x : g) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(LossDiv, UniformRowGivesKOverB) {
  Matrix m(3, 5, 0.42);
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(loss_div(m, k), k / 5.0, 1e-15);
}

TEST(LossDiv, HandValue) {
  Matrix m(1, 3);
  m(0, 0) = 2.0;
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(loss_div(m, 1), e2 / (e2 + 2.0), 1e-15);
  EXPECT_NEAR(loss_div(m, 1), 0.7869, 1e-4);
}

TEST(LossDiv, PermutationAndShiftInvariant) {
  Matrix a(1, 4), b(1, 4), c(1, 4);
  const double row[] = {0.3, -0.7, 0.9, 0.1};
  const int perm[] = {2, 0, 3, 1};
  for (int j = 0; j < 4; ++j) {
    a(0, j) = row[j];
    b(0, j) = row[perm[j]];
    c(0, j) = row[j] + 5.5;
  }
  for (int k = 1; k <= 4; ++k) {
    EXPECT_NEAR(loss_div(a, k), loss_div(b, k), 1e-15);
    EXPECT_NEAR(loss_div(a, k), loss_div(c, k), 1e-14);
  }
}

TEST(LossDiv, GradientMatchesFiniteDifference) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> r(3 + rng.below(4)), g(r.size());
    for (auto& x : r) x = rng.uniform(-1, 1);
    const int k = 1 + static_cast<int>(rng.below(r.size()));
    topk_softmax_mass(r, k, g);
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto rp = r, rm = r;
      rp[i] += 1e-6;
      rm[i] -= 1e-6;
      EXPECT_NEAR(g[i], (topk_softmax_mass(rp, k) - topk_softmax_mass(rm, k)) / 2e-6, 1e-8);
    }
  }
}

TEST(LossDiv, KOutOfRangeThrows) {
  Matrix m(2, 3);
  EXPECT_THROW(loss_div(m, 0), ValidationError);
  EXPECT_THROW(loss_div(m, 4), ValidationError);
}

}  // namespace
}  // namespace bspa
