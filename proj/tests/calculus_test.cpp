#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "halfcalc/calculus.hpp"
#include "halfcalc/golden.hpp"
#include "test_util.hpp"

namespace halfcalc {
namespace {

using testing::max_deviation;

CMatrix diag(std::initializer_list<cplx> d) { return CMatrix::diagonal(CVector(d)); }

Generator diag12() { return make_diagonal_generator({-1.0, -2.0}); }
Generator diag1() { return make_diagonal_generator({-1.0}); }

// A generator without a spectral form, for the paths that must not rely on one.
Generator dense_nonnormal() {
  auto g = golden_nonnormal();
  return make_generator(g.matrix());
}

TEST(OracleSpectral, Examples) {
  EXPECT_LE(max_deviation(oracle_spectral(identity_symbol(), diag12()).matrix, CMatrix::identity(2)), 1e-15);
  EXPECT_LE(max_deviation(oracle_spectral(resolvent_kernel(1.0), diag12()).matrix, diag({0.5, 1.0 / 3.0})),
            1e-15);
  EXPECT_NEAR(std::abs(oracle_spectral(exponential_kernel(std::log(2.0)), diag1()).matrix(0, 0) - 0.5), 0.0,
              1e-15);
  EXPECT_THROW(oracle_spectral(identity_symbol(), dense_nonnormal()), oracle_unavailable_error);
}

TEST(OracleSpectral, ExactHomomorphism) {
  const auto gen = golden_nonnormal();
  const double kappa = gen.spectral()->condition();
  for (const auto& a : golden_symbols())
    for (const auto& b : golden_symbols()) {
      const auto prod = oracle_spectral(combine(CombineOp::product, a.symbol, b.symbol), gen).matrix;
      const auto sep = oracle_spectral(a.symbol, gen).matrix * oracle_spectral(b.symbol, gen).matrix;
      EXPECT_LE(op_norm_2(prod - sep), 1e-12 * kappa * kappa) << a.name << " * " << b.name;
    }
}

TEST(Phillips, Examples) {
  const auto r = phillips_apply(resolvent_kernel(1.0), diag12());
  EXPECT_LE(max_deviation(r.matrix, diag({0.5, 1.0 / 3.0})), 1e-8);
  EXPECT_EQ(r.path, PathKind::phillips);
  EXPECT_EQ(r.tolerance, 1e-8);

  EXPECT_EQ(max_abs(phillips_apply(constant_symbol(0.0), diag12()).matrix), 0.0);

  const auto sq = phillips_apply(rational(1.0, {}, {1.0, 1.0}), diag1());
  EXPECT_NEAR(std::abs(sq.matrix(0, 0) - 0.25), 0.0, 1e-8);

  EXPECT_THROW(phillips_apply(exponential_kernel(1.0), diag12()), path_inapplicable_error);
}

TEST(Phillips, WorksWithoutSpectralForm) {
  const auto dense = dense_nonnormal();
  const auto oracle = oracle_spectral(resolvent_kernel(cplx(2.0, 1.0)), golden_nonnormal());
  const auto r = phillips_apply(resolvent_kernel(cplx(2.0, 1.0)), dense);
  EXPECT_LE(op_norm_2(r.matrix - oracle.matrix), 1e-8);
  EXPECT_LE(op_norm_2(r.matrix - resolvent(dense, cplx(2.0, 1.0))), 1e-8);
}

TEST(ContourH1, Examples) {
  const auto e = contour_apply_h1(regularizer(), diag1());
  EXPECT_NEAR(std::abs(e.matrix(0, 0) - 0.25), 0.0, 1e-6);
  // the squared regularized resolvent, R(1, A)^2
  const auto r1 = resolvent(diag1(), 1.0);
  EXPECT_LE(max_deviation(e.matrix, r1 * r1), 1e-6);

  const auto q = contour_apply_h1(rational(1.0, {}, {2.0, 2.0}), diag12());
  EXPECT_LE(max_deviation(q.matrix, diag({1.0 / 9.0, 1.0 / 16.0})), 1e-6);
}

TEST(ContourH1, IndependentOfEps) {
  for (const auto& [f, gen] : {std::pair{regularizer(), diag1()},
                               std::pair{rational(1.0, {}, {2.0, 2.0}), diag12()}}) {
    ContourOptions a, b;
    a.eps = 0.4;
    b.eps = 0.2;
    const auto ra = contour_apply_h1(f, gen, a), rb = contour_apply_h1(f, gen, b);
    EXPECT_LE(op_norm_2(ra.matrix - rb.matrix), 1e-7);
    EXPECT_LE(ra.metadata.at("eps_deviation"), 1e-7);
  }
}

TEST(ContourH1, Errors) {
  ContourOptions bad;
  bad.eps = 1.5;
  EXPECT_THROW(contour_apply_h1(regularizer(), diag1(), bad), contour_placement_error);
  bad.eps = 0.0;
  EXPECT_THROW(contour_apply_h1(regularizer(), diag1(), bad), contour_placement_error);
  EXPECT_THROW(contour_apply_h1(resolvent_kernel(1.0), diag1()), path_inapplicable_error);
}

TEST(ContourGeneral, Examples) {
  EXPECT_LE(max_deviation(contour_apply_general(identity_symbol(), diag12()).matrix, CMatrix::identity(2)), 1e-5);
  EXPECT_NEAR(std::abs(contour_apply_general(exponential_kernel(1.0), diag1()).matrix(0, 0) - std::exp(-1.0)),
              0.0, 1e-5);
  EXPECT_LE(max_deviation(contour_apply_general(resolvent_kernel(1.0), diag12()).matrix, diag({0.5, 1.0 / 3.0})),
            1e-5);
}

TEST(ContourGeneral, WorksWithoutSpectralForm) {
  const auto dense = dense_nonnormal();
  const auto r = contour_apply_general(exponential_kernel(0.5), dense);
  EXPECT_LE(op_norm_2(r.matrix - expm(dense, 0.5)), 1e-5);
}

TEST(OutputMap, Examples) {
  EXPECT_LE(max_deviation(outputmap_apply(identity_symbol(), diag12()).matrix, CMatrix::identity(2)), 1e-9);
  const auto r = outputmap_apply(resolvent_kernel(1.0), diag12());
  EXPECT_LE(max_deviation(r.matrix, diag({0.5, 1.0 / 3.0})), 1e-3);
  EXPECT_EQ(r.metadata.at("count"), double(std::size_t{1} << 14));

  const double t = 16.0 * default_grid_step;
  EXPECT_NEAR(std::abs(outputmap_apply(exponential_kernel(t), diag1()).matrix(0, 0) - std::exp(-t)), 0.0, 1e-6);
}

TEST(OutputMap, ResolventIdentity) {
  for (const auto& g : golden_generators()) {
    for (cplx mu : {cplx(1.0), cplx(2.0, 1.0)}) {
      const auto r = outputmap_apply(resolvent_kernel(mu), g.generator);
      CMatrix m = -1.0 * g.generator.matrix();
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += mu;
      EXPECT_LE(op_norm_2(m * r.matrix - CMatrix::identity(m.rows())), 1e-3 * op_norm_2(m)) << g.name;
    }
  }
}

TEST(OutputMap, ThreadCountDoesNotChangeResult) {
  const auto gen = golden_nonnormal();
  const auto g = resolvent_kernel(cplx(2.0, 1.0));
  ::setenv("HALFCALC_THREADS", "1", 1);
  const auto one = outputmap_apply(g, gen);
  ::setenv("HALFCALC_THREADS", "3", 1);
  const auto three = outputmap_apply(g, gen);
  ::unsetenv("HALFCALC_THREADS");
  EXPECT_EQ(one.matrix, three.matrix);
  EXPECT_EQ(one.error_estimate, three.error_estimate);
}

TEST(LambdaExtension, IdentityRecoversX) {
  std::mt19937_64 rng(21);
  const auto gen = golden_nonnormal();
  for (int rep = 0; rep < 5; ++rep) {
    const auto x = testing::random_vector(4, rng);
    const auto l = lambda_extension([](const CVector& v) { return v; }, gen, x);
    EXPECT_TRUE(l.converged);
    CVector d(4);
    for (std::size_t i = 0; i < 4; ++i) d[i] = l.limit[i] - x[i];
    EXPECT_LE(norm2(d), 1e-8);
    EXPECT_FALSE(std::isfinite(l.trace.front().delta));
    EXPECT_DOUBLE_EQ(l.trace[1].lambda, 2.0 * l.trace[0].lambda);
  }
}

TEST(LambdaExtension, BoundedOperators) {
  const auto gen = golden_nonnormal();
  const CVector x{1.0, cplx(0.0, 1.0), -0.5, 2.0};
  for (const auto& m : {phillips_apply(resolvent_kernel(1.0), gen).matrix, expm(gen, 0.3)}) {
    const auto l = lambda_extension([&](const CVector& v) { return matvec(m, v); }, gen, x);
    ASSERT_TRUE(l.converged);
    const auto want = matvec(m, x);
    CVector d(4);
    for (std::size_t i = 0; i < 4; ++i) d[i] = l.limit[i] - want[i];
    EXPECT_LE(norm2(d), 1e-6);
  }
}

TEST(LambdaExtension, ReportsNonConvergenceAndRejectsBadLambda) {
  LambdaOptions opt;
  opt.max_k = 2;
  const auto l = lambda_extension([](const CVector& v) { return v; }, diag12(), CVector{1.0, 1.0}, opt);
  EXPECT_FALSE(l.converged);
  EXPECT_EQ(l.trace.size(), 3u);
  opt.lambda0 = -1.0;
  EXPECT_THROW(lambda_extension([](const CVector& v) { return v; }, diag12(), CVector{1.0, 1.0}, opt),
               domain_error);
}

TEST(LambdaExtension, IdempotentOnBoundedResults) {
  const auto gen = golden_nonnormal();
  for (PathKind base : {PathKind::phillips, PathKind::contour_general}) {
    const auto direct = apply_path(base, resolvent_kernel(1.0), gen);
    PathOptions opt;
    opt.lambda_base = base;
    const auto limit = apply_path(PathKind::lambda_limit, resolvent_kernel(1.0), gen, opt);
    EXPECT_EQ(limit.label(), "LambdaLimit(" + path_name(base) + ")");
    EXPECT_LE(op_norm_2(limit.matrix - direct.matrix), 1e-8 * (1.0 + op_norm_2(direct.matrix)));
  }
}

TEST(WeakWeiss, UnitSymbolClosedForm) {
  const auto r = weak_weiss_scaling_check(identity_symbol(), diag1());
  ASSERT_EQ(r.values.size(), 6u);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const double s = r.s_values[i];
    EXPECT_NEAR(r.values[i], std::sqrt(s) / (s + 1.0), 1e-9);
  }
  EXPECT_NEAR(r.values[0], 0.5, 1e-9);
  EXPECT_TRUE(r.pass);
}

TEST(WeakWeiss, ResolventSymbolClosedForm) {
  const auto g = resolvent_kernel(1.0);
  const auto r = weak_weiss_scaling_check(g, diag12());
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const double s = r.s_values[i];
    double best = 0.0;
    for (double l : {-1.0, -2.0}) best = std::max(best, 1.0 / ((1.0 - l) * (s - l)));
    EXPECT_NEAR(r.values[i], std::sqrt(s) * best / g.sup_norm_est, 1e-9);
  }
  EXPECT_LE(r.slope, 0.1);
  EXPECT_TRUE(r.pass);
}

TEST(WeakWeiss, GoldenSymbolsOnDiagonalGenerators) {
  for (const auto& s : golden_symbols())
    for (const auto& gen : {diag1(), diag12(), make_diagonal_generator({cplx(-0.5, 3.0), -4.0})})
      EXPECT_TRUE(weak_weiss_scaling_check(s.symbol, gen).pass) << s.name;
}

TEST(CalculusLaws, OracleIsExact) {
  const auto r = calculus_laws(resolvent_kernel(1.0), resolvent_kernel(1.0), diag12(), PathKind::spectral_oracle);
  EXPECT_LE(r.max_residual(), 1e-12);
  EXPECT_EQ(r.path, "SpectralOracle");
}

TEST(CalculusLaws, OutputMapMultiplicative) {
  const auto r = calculus_laws(resolvent_kernel(1.0), resolvent_kernel(1.0), diag12(), PathKind::output_map);
  EXPECT_LE(r.multiplicativity, 1e-3);
  EXPECT_LE(r.max_residual(), 1e-3);
}

TEST(CalculusLaws, ExponentialProductIsSemigroupLaw) {
  const auto gen = golden_nonnormal();
  const auto prod = combine(CombineOp::product, exponential_kernel(0.25), exponential_kernel(0.5));
  for (PathKind p : {PathKind::spectral_oracle, PathKind::contour_general, PathKind::output_map})
    EXPECT_LE(op_norm_2(apply_path(p, prod, gen).matrix - expm(gen, 0.75)), path_tolerance(p)) << path_name(p);
}

TEST(CalculusLaws, InapplicablePathPropagates) {
  EXPECT_THROW(calculus_laws(exponential_kernel(1.0), identity_symbol(), diag12(), PathKind::phillips),
               path_inapplicable_error);
}

TEST(Commutation, WithResolvents) {
  const auto gen = golden_nonnormal();
  for (PathKind p : {PathKind::spectral_oracle, PathKind::phillips, PathKind::contour_general, PathKind::output_map}) {
    const auto r = apply_path(p, resolvent_kernel(cplx(2.0, 1.0)), gen);
    for (double l : {1.0, 10.0}) {
      const auto rl = resolvent(gen, l);
      EXPECT_LE(op_norm_2(r.matrix * rl - rl * r.matrix), path_tolerance(p)) << path_name(p);
    }
  }
}

TEST(Rescaled, Examples) {
  const auto same = rescaled_apply(resolvent_kernel(1.0), diag1(), 0.0, PathKind::spectral_oracle);
  EXPECT_NEAR(std::abs(same.matrix(0, 0) - 0.5), 0.0, 1e-15);

  const auto unstable = make_diagonal_generator({0.5}, Stability::allow);
  const auto f = resolvent_kernel(2.0);
  for (PathKind p : {PathKind::spectral_oracle, PathKind::phillips, PathKind::contour_general}) {
    const auto r = rescaled_apply(f, unstable, 1.0, p);
    EXPECT_NEAR(std::abs(r.matrix(0, 0) - 2.0 / 3.0), 0.0, path_tolerance(p)) << path_name(p);
    const auto r2 = rescaled_apply(f, unstable, 1.5, p);
    EXPECT_NEAR(std::abs(r.matrix(0, 0) - r2.matrix(0, 0)), 0.0, 2.0 * path_tolerance(p)) << path_name(p);
  }
  EXPECT_THROW(rescaled_apply(f, unstable, 0.5, PathKind::spectral_oracle), rescaling_error);
  EXPECT_THROW(rescaled_apply(f, unstable, 0.25, PathKind::spectral_oracle), rescaling_error);
}

TEST(Rescaled, DenseUnstableGenerator) {
  // omega is only estimated here, so the shift must clear the estimate
  const auto dense = make_generator(CMatrix{{0.2, 1.0}, {0.0, -0.3}}, std::nullopt, Stability::allow);
  const auto r = rescaled_apply(resolvent_kernel(3.0), dense, 1.0, PathKind::phillips);
  EXPECT_LE(op_norm_2(r.matrix - resolvent(dense, 3.0)), 1e-8);
}

TEST(ConvergenceLemma, ScalarSequence) {
  const auto r = convergence_lemma_check(1.0, diag1(), CVector{1.0});
  ASSERT_EQ(r.errors.size(), 6u);
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    const double n = double(r.n_values[i]);
    EXPECT_NEAR(r.errors[i], std::abs(std::pow(1.0 + 1.0 / n, -n) - std::exp(-1.0)), 1e-14);
  }
  EXPECT_TRUE(r.strictly_decreasing);
  EXPECT_TRUE(r.pass);
}

TEST(ConvergenceLemma, TrivialCases) {
  const auto t0 = convergence_lemma_check(0.0, diag12(), CVector{1.0, -1.0});
  for (double e : t0.errors) EXPECT_LE(e, 1e-15);
  EXPECT_TRUE(t0.trivial);
  const auto x0 = convergence_lemma_check(1.0, diag12(), CVector{0.0, 0.0});
  for (double e : x0.errors) EXPECT_EQ(e, 0.0);
}

TEST(ConvergenceLemma, PhillipsPathAgrees) {
  const auto gen = golden_nonnormal();
  const CVector x{1.0, 0.5, cplx(0.0, -1.0), 0.25};
  const auto oracle = convergence_lemma_check(1.0, gen, x);
  const auto phil = convergence_lemma_check(1.0, gen, x, {1, 2, 4, 8, 16, 32}, PathKind::phillips);
  EXPECT_TRUE(oracle.pass);
  EXPECT_TRUE(phil.pass);
  for (std::size_t i = 0; i < oracle.errors.size(); ++i) EXPECT_NEAR(oracle.errors[i], phil.errors[i], 1e-7);
}

TEST(PathCompare, ResolventSymbol) {
  const auto c = path_compare(resolvent_kernel(1.0), diag12());
  double worst_est = 0.0;
  for (const auto& r : c.results) worst_est = std::max(worst_est, r.error_estimate);
  for (double d : c.oracle_deviation) EXPECT_LE(d, worst_est);
  ASSERT_EQ(c.inapplicable.size(), 1u);
  EXPECT_EQ(c.inapplicable[0].first, PathKind::contour_h1);
}

TEST(PathCompare, UnitAndRegularizer) {
  const auto one = path_compare(identity_symbol(), diag12());
  for (std::size_t i = 0; i < one.results.size(); ++i)
    EXPECT_LE(op_norm_2(one.results[i].matrix - CMatrix::identity(2)), 1e-5) << one.results[i].label();
  const auto e = path_compare(regularizer(), golden_nonnormal());
  for (std::size_t i = 0; i < e.results.size(); ++i)
    if (e.results[i].path == PathKind::contour_h1) {
      EXPECT_LE(e.oracle_deviation[i], 1e-6);
    }
}

TEST(PathCompare, NeedsSpectralForm) {
  EXPECT_THROW(path_compare(identity_symbol(), dense_nonnormal()), oracle_unavailable_error);
}

TEST(PathCompare, CoincidenceOnGoldenPairs) {
  for (const auto& p : golden_pairs()) {
    const auto c = path_compare(golden_symbol(p.symbol), golden_generator(p.generator));
    for (std::size_t i = 0; i < c.results.size(); ++i) {
      EXPECT_LE(c.oracle_deviation[i], 5.0 * c.results[i].error_estimate) << p.symbol << " " << c.results[i].label();
      for (std::size_t j = 0; j < c.results.size(); ++j)
        EXPECT_LE(c.pairwise[i][j], c.results[i].error_estimate + c.results[j].error_estimate)
            << p.symbol << " " << c.results[i].label() << " vs " << c.results[j].label();
    }
  }
}

}  // namespace
}  // namespace halfcalc
