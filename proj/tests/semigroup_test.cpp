#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "halfcalc/semigroup.hpp"
#include "test_util.hpp"

namespace halfcalc {
namespace {

Generator diag12() { return make_diagonal_generator({-1.0, -2.0}); }

// Non-normal generator with a known spectral form.
Generator jordanish() {
  const CMatrix v{{1.0, 0.8, 0.0}, {0.0, 1.0, 0.6}, {0.0, 0.0, 1.0}};
  auto sf = make_spectral_form({-1.0, cplx(-2.0, 1.0), -3.0}, v);
  return make_generator(reconstruct(sf), sf);
}

TEST(MakeGenerator, DiagonalSpectralForm) {
  const Generator g = diag12();
  EXPECT_EQ(g.omega(), -1.0);
  EXPECT_TRUE(g.stable());
  EXPECT_TRUE(g.omega_is_exact());
}

TEST(MakeGenerator, GrowthEstimateForShearedBlock) {
  const Generator g = make_generator(CMatrix{{-1.0, 100.0}, {0.0, -1.0}});
  // Oracle: e^{tA} = e^{-t} [[1, 100t], [0, 1]]; its 2-norm is the largest
  // root of s^2 - (2 + (100t)^2) s + 1.
  double oracle = INFINITY;
  for (double t : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    const double b = 2.0 + std::pow(100.0 * t, 2);
    const double smax = std::sqrt((b + std::sqrt(b * b - 4.0)) / 2.0);
    oracle = std::min(oracle, (std::log(smax) - t) / t);
  }
  EXPECT_NEAR(g.omega(), oracle + 0.05, 1e-8);
  EXPECT_GE(g.omega(), -1.0);
  EXPECT_LE(g.omega(), -0.5);
  EXPECT_TRUE(g.stable());
  EXPECT_FALSE(g.omega_is_exact());
}

TEST(MakeGenerator, Rejections) {
  EXPECT_THROW(make_diagonal_generator({0.0}), instability_error);
  EXPECT_THROW(make_generator(CMatrix(2, 3)), shape_error);
  auto bad = diagonal_spectral_form({-1.0, -3.0});
  EXPECT_THROW(make_generator(CMatrix::diagonal(CVector{-1.0, -2.0}), bad), validation_error);
  EXPECT_NO_THROW(make_diagonal_generator({0.5}, Stability::allow));
}

TEST(Expm, ClosedForms) {
  EXPECT_EQ(expm(diag12(), 0.0), CMatrix::identity(2));
  const CMatrix h = expm(make_diagonal_generator({-1.0}), std::numbers::ln2);
  EXPECT_NEAR(std::abs(h(0, 0) - 0.5), 0.0, 1e-15);

  const Generator jordan = make_generator(CMatrix{{-1.0, 1.0}, {0.0, -1.0}});
  const CMatrix e = expm(jordan, 1.0);
  const CMatrix expected = std::exp(-1.0) * CMatrix{{1.0, 1.0}, {0.0, 1.0}};
  EXPECT_LE(max_abs(e - expected), 1e-14);
}

TEST(Expm, PadeMatchesSpectralPath) {
  const Generator g = jordanish();
  const Generator dense = make_generator(g.matrix());
  for (double t : {0.1, 1.0, 3.0, 10.0}) {
    const CMatrix a = expm(g, t), b = expm(dense, t);
    EXPECT_LE(frobenius_norm(a - b), 1e-12 * std::max(1.0, frobenius_norm(a))) << t;
  }
}

TEST(Expm, SemigroupLaw) {
  for (const Generator& g : {jordanish(), make_generator(jordanish().matrix())}) {
    for (double t : {0.1, 1.0, 3.0})
      for (double s : {0.1, 1.0, 3.0}) {
        const CMatrix lhs = expm(g, t + s);
        EXPECT_LE(op_norm_2(lhs - expm(g, t) * expm(g, s)), 1e-9 * op_norm_2(lhs));
      }
  }
}

TEST(Expm, ExponentialStabilityEnvelope) {
  const Generator g = jordanish();
  double m = 0.0;
  std::vector<double> norms;
  for (int k = 0; k <= 500; ++k) {
    const double t = 0.1 * k;
    const double nt = op_norm_2(expm(g, t));
    norms.push_back(nt);
    m = std::max(m, nt / std::exp((g.omega() + 0.05) * t));
  }
  for (int k = 0; k <= 500; ++k)
    EXPECT_LE(norms[k], m * std::exp((g.omega() + 0.05) * 0.1 * k) * (1 + 1e-12));
  EXPECT_LT(m, 10.0);
}

TEST(Resolvent, Examples) {
  const CMatrix r = resolvent(diag12(), 1.0);
  EXPECT_NEAR(std::abs(r(0, 0) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(r(1, 1) - 1.0 / 3.0), 0.0, 1e-15);
  EXPECT_THROW(resolvent(make_diagonal_generator({-1.0}), -1.0), singular_matrix_error);
  const CMatrix ri = resolvent(make_diagonal_generator({-1.0}), I_unit);
  EXPECT_NEAR(std::abs(ri(0, 0) - 1.0 / (I_unit + 1.0)), 0.0, 1e-15);
}

TEST(Resolvent, ScaledResolventTendsToIdentity) {
  const Generator g = jordanish();
  const CVector x{1.0, cplx(0.0, -2.0), 0.5};
  std::vector<double> dev;
  for (int k = 0; k <= 30; ++k) {
    const double lambda = std::ldexp(1.0, k);
    const CVector v = matvec(lambda * resolvent(g, lambda), x);
    dev.push_back(norm2(axpy(-1.0, x, v)));
  }
  for (int k = 4; k <= 30; ++k) EXPECT_LT(dev[k], dev[k - 1]) << k;
  EXPECT_LT(dev.back(), 1e-8);
}

TEST(ResolventLaplaceCheck, FineGridIdentities) {
  const TimeGrid fine{1.0 / 64.0, 4096, 1e-10};
  EXPECT_LE(resolvent_laplace_check(make_diagonal_generator({-1.0}), 1.0, fine), 1e-6);
  EXPECT_LE(resolvent_laplace_check(diag12(), 2.0, fine), 1e-6);
}

TEST(ResolventLaplaceCheck, SimpsonOrderUnderRefinement) {
  const Generator g = diag12();
  TimeGrid grid{0.5, 64, 1e-10};
  double prev = resolvent_laplace_check(g, 1.0, grid);
  for (int level = 0; level < 3; ++level) {
    grid = refine(grid);
    const double next = resolvent_laplace_check(g, 1.0, grid);
    EXPECT_LE(next, prev / 4.0) << level;
    prev = next;
  }
}

TEST(ScalarTrajectory, Examples) {
  const TimeGrid grid{1.0 / 32.0, 256, 1e-10};
  const auto f = scalar_trajectory(make_diagonal_generator({-1.0}), CVector{1.0}, CVector{1.0}, grid);
  for (std::size_t k = 0; k < grid.count; ++k)
    EXPECT_NEAR(std::abs(f.values[k] - std::exp(-grid.node(k))), 0.0, 1e-13);

  const auto z = scalar_trajectory(diag12(), CVector{0.0, 1.0}, CVector{1.0, 0.0}, grid);
  for (const auto& v : z.values) EXPECT_EQ(v, cplx{});

  const auto s = scalar_trajectory(diag12(), CVector{1.0, 1.0}, CVector{1.0, 1.0}, grid);
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double t = grid.node(k);
    EXPECT_NEAR(std::abs(s.values[k] - (std::exp(-t) + std::exp(-2 * t))), 0.0, 1e-13);
  }
  EXPECT_THROW(scalar_trajectory(diag12(), CVector{1.0}, CVector{1.0, 1.0}, grid), shape_error);
}

TEST(ScalarTrajectory, PairingIsConjugateLinearInFirstArgument) {
  const TimeGrid grid{0.25, 8, 1e-10};
  const auto f = scalar_trajectory(make_diagonal_generator({-1.0}), CVector{I_unit}, CVector{1.0}, grid);
  EXPECT_NEAR(std::abs(f.values[0] - (-I_unit)), 0.0, 1e-15);
}

}  // namespace
}  // namespace halfcalc
