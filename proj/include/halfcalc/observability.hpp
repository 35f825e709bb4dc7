#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <cstdint>
#include <string>
#include <vector>

#include "halfcalc/calculus.hpp"
#include "halfcalc/errors.hpp"
#include "halfcalc/functions.hpp"
#include "halfcalc/linalg.hpp"
#include "halfcalc/parallel.hpp"
#include "halfcalc/semigroup.hpp"

namespace halfcalc {

// Pair (C, A) with output y(t) = C e^{tA} x.
struct ObservedSystem {
  Generator gen;
  CMatrix C;  // p x n
};

inline ObservedSystem make_observed_system(Generator gen, CMatrix c) {
  if (c.cols() != gen.dim())
    throw shape_error("observed system: C has " + std::to_string(c.cols()) + " columns, A is " +
                      std::to_string(gen.dim()) + "x" + std::to_string(gen.dim()));
  if (!c.all_finite()) throw domain_error("observed system: non-finite entry in C");
  return {std::move(gen), std::move(c)};
}

inline constexpr double observability_zero = 1e-8;

namespace detail {

inline CMatrix hermitian_part(const CMatrix& x) {
  CMatrix h = x;
  h += x.adjoint();
  h *= 0.5;
  return h;
}

// Solves A^H Q + Q A = -M (observability type) and A Z + Z A^H = -N
// (controllability type). Diagonalizable generators use the spectral form;
// otherwise the n^2 x n^2 Kronecker system is factored once.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const Generator& gen) : gen_(gen) {
    if (!gen.stable()) throw domain_error("Lyapunov solve: generator is not stable");
    if (const auto& s = gen.spectral()) {
      const CMatrix id = CMatrix::identity(gen.dim());
      diagonal_ = max_abs(s->V - id) == 0.0 && max_abs(s->Vinv - id) == 0.0;
      return;
    }
    const std::size_t n = gen.dim();
    if (n > 32) throw size_error("Lyapunov solve: Kronecker fallback limited to n <= 32");
    const CMatrix& a = gen.matrix();
    const CMatrix ah = a.adjoint();
    obs_ = lu_factor(kronecker(ah, a));
    ctrl_ = lu_factor(kronecker(a, ah));
  }

  CMatrix observability(const CMatrix& m) const {
    if (const auto& s = gen_.spectral()) {
      CMatrix t = diagonal_ ? m : s->V.adjoint() * m * s->V;
      for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
          t(i, j) /= -(std::conj(s->eigenvalues[i]) + s->eigenvalues[j]);
      return hermitian_part(diagonal_ ? t : s->Vinv.adjoint() * t * s->Vinv);
    }
    return hermitian_part(solve(*obs_, m));
  }

  CMatrix controllability(const CMatrix& rhs) const {
    if (const auto& s = gen_.spectral()) {
      CMatrix t = diagonal_ ? rhs : s->Vinv * rhs * s->Vinv.adjoint();
      for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
          t(i, j) /= -(s->eigenvalues[i] + std::conj(s->eigenvalues[j]));
      return hermitian_part(diagonal_ ? t : s->V * t * s->V.adjoint());
    }
    return hermitian_part(solve(*ctrl_, rhs));
  }

 private:
  // Matrix of X -> L X + X R on column-major vec(X).
  static CMatrix kronecker(const CMatrix& l, const CMatrix& r) {
    const std::size_t n = l.rows();
    CMatrix k(n * n, n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = i + n * j;
        for (std::size_t q = 0; q < n; ++q) {
          k(row, q + n * j) += l(i, q);
          k(row, i + n * q) += r(q, j);
        }
      }
    return k;
  }

  static CMatrix solve(const LUFactors& f, const CMatrix& m) {
    const std::size_t n = m.rows();
    CMatrix rhs(n * n, 1);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) rhs(i + n * j, 0) = -m(i, j);
    const CMatrix v = lu_solve(f, rhs);
    CMatrix x(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) x(i, j) = v(i + n * j, 0);
    return x;
  }

  const Generator& gen_;
  bool diagonal_ = false;  // V = I
  std::optional<LUFactors> obs_, ctrl_;
};

inline CMatrix outer(std::span<const cplx> x) {
  CMatrix m(x.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = x[i] * std::conj(x[j]);
  return m;
}

}  // namespace detail

// Q = int_0^inf e^{tA^H} C^H C e^{tA} dt
inline CMatrix gramian(const ObservedSystem& sys) {
  detail::LyapunovSolver solver(sys.gen);
  return solver.observability(sys.C.adjoint() * sys.C);
}

struct ObsConstants {
  double K = 0.0;
  double m = 0.0;
};

inline ObsConstants constants_from_gramian(const CMatrix& q) {
  const auto eig = hermitian_eig(q);
  return {std::sqrt(std::max(0.0, eig.values.front())), std::sqrt(std::max(0.0, eig.values.back()))};
}

inline ObsConstants exact_obs_constants(const ObservedSystem& sys) {
  return constants_from_gramian(gramian(sys));
}

// W_x = C Z C^H with A Z + Z A^H = -x x^H, so y^H W_x y = int |<y, C e^{tA} x>|^2 dt.
inline CMatrix directional_gram(const ObservedSystem& sys, const CVector& x) {
  if (x.size() != sys.gen.dim()) throw shape_error("directional_gram: x has the wrong length");
  detail::LyapunovSolver solver(sys.gen);
  const CMatrix z = solver.controllability(detail::outer(x));
  return detail::hermitian_part(sys.C * z * sys.C.adjoint());
}

struct DirectionalSearch {
  std::size_t starts = 32;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
};

struct DirectionalResult {
  double K_dir = 0.0;  // smallest phi found: an upper bound on the true infimum
  double m_dir = 0.0;  // largest phi found: a lower bound on the true supremum
  CVector argmin, argmax;
  CVector witness;  // top eigenvector y of W at argmin
  std::size_t argmin_start = 0, argmax_start = 0;
  std::vector<double> min_trace, max_trace;  // phi per accepted iteration of the winning starts
  std::uint64_t seed = 0;
  std::size_t starts = 0;
  std::string K_label = "upper bound on the directional infimum (multistart descent)";
  std::string m_label = "lower bound on the directional supremum (multistart ascent)";
};

namespace detail {

struct DirectionalEval {
  double value = 0.0;  // lambda_max(W_x)
  CVector y;           // its eigenvector
  CVector grad;        // projected gradient of the surrogate x^H H_y x
};

class DirectionalObjective {
 public:
  explicit DirectionalObjective(const ObservedSystem& sys) : sys_(sys), solver_(sys.gen) {}

  DirectionalEval eval(const CVector& x) const {
    const CMatrix z = solver_.controllability(outer(x));
    const CMatrix w = hermitian_part(sys_.C * z * sys_.C.adjoint());
    const auto eig = hermitian_eig(w);
    DirectionalEval e;
    e.value = std::max(0.0, eig.values.back());
    e.y = eig.vectors.col(eig.vectors.cols() - 1);
    // H_y: Gramian of the scalar output y^H C.
    const CMatrix row = CMatrix::column(e.y).adjoint() * sys_.C;
    const CMatrix h = solver_.observability(row.adjoint() * row);
    const CVector hx = matvec(h, x);
    const cplx f = dot(x, hx);
    e.grad = axpy(-f, x, hx);
    return e;
  }

 private:
  const ObservedSystem& sys_;
  LyapunovSolver solver_;
};

struct LocalRun {
  double value = 0.0;  // lambda_max at the end
  CVector x, y;
  std::vector<double> trace;
};

inline void normalize(CVector& x) {
  const double n = norm2(x);
  for (auto& v : x) v /= n;
}

inline LocalRun local_search(const DirectionalObjective& obj, CVector x, std::size_t iterations,
                             bool ascend) {
  normalize(x);
  auto cur = obj.eval(x);
  LocalRun run;
  run.trace.push_back(std::sqrt(cur.value));
  double step = 1.0 / std::max(cur.value, 1e-300);
  const double sign = ascend ? 1.0 : -1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (norm2(cur.grad) <= 1e-13 * std::max(cur.value, 1e-300)) break;
    bool moved = false;
    while (step * std::max(cur.value, 1e-300) > 1e-14) {
      // a move longer than the sphere's diameter is pointless
      step = std::min(step, 2.0 / norm2(cur.grad));
      CVector cand = axpy(sign * step, cur.grad, x);
      normalize(cand);
      auto e = obj.eval(cand);
      if (ascend ? e.value > cur.value : e.value < cur.value) {
        x = std::move(cand);
        cur = std::move(e);
        step *= 2.0;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    run.trace.push_back(std::sqrt(cur.value));
  }
  run.value = cur.value;
  run.x = std::move(x);
  run.y = std::move(cur.y);
  return run;
}

inline CVector random_direction(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CVector x(n);
  for (auto& v : x) {
    const double re = nd(rng);
    v = cplx(re, nd(rng));
  }
  normalize(x);
  return x;
}

}  // namespace detail

// phi(x) = sqrt(lambda_max(W_x)) over the unit sphere, searched from seeded random starts.
inline DirectionalResult directional_constants(const ObservedSystem& sys, const DirectionalSearch& search = {}) {
  if (search.starts == 0) throw domain_error("directional_constants: need at least one start");
  detail::DirectionalObjective obj(sys);
  const std::size_t n = sys.gen.dim();
  std::vector<detail::LocalRun> lows(search.starts), highs(search.starts);
  parallel_for(search.starts, [&](std::size_t s) {
    const CVector x0 = detail::random_direction(n, search.seed + s);
    lows[s] = detail::local_search(obj, x0, search.iterations, false);
    highs[s] = detail::local_search(obj, x0, search.iterations, true);
  });
  DirectionalResult r;
  r.seed = search.seed;
  r.starts = search.starts;
  std::size_t lo = 0, hi = 0;
  for (std::size_t s = 1; s < search.starts; ++s) {
    if (lows[s].value < lows[lo].value) lo = s;
    if (highs[s].value > highs[hi].value) hi = s;
  }
  r.K_dir = std::sqrt(lows[lo].value);
  r.m_dir = std::max(std::sqrt(highs[hi].value), r.K_dir);
  r.argmin = lows[lo].x;
  r.witness = lows[lo].y;
  r.argmax = highs[hi].x;
  r.argmin_start = lo;
  r.argmax_start = hi;
  r.min_trace = lows[lo].trace;
  r.max_trace = highs[hi].trace;
  return r;
}

struct ObservabilityReport {
  CMatrix Q;
  double K = 0.0, m = 0.0;
  double gramian_residual = 0.0;  // ||A^H Q + Q A + C^H C||_F / ||C^H C||_F
  DirectionalResult directional;
  bool admissible = true;  // always in finite dimension: m < inf
  bool exactly_observable = false;
  bool observable_by_direction = false;
  double zero_threshold = observability_zero;
};

inline double gramian_residual(const ObservedSystem& sys, const CMatrix& q) {
  const CMatrix& a = sys.gen.matrix();
  const CMatrix m = sys.C.adjoint() * sys.C;
  CMatrix r = a.adjoint() * q;
  r += q * a;
  r += m;
  const double scale = frobenius_norm(m);
  return scale > 0.0 ? frobenius_norm(r) / scale : frobenius_norm(r);
}

inline ObservabilityReport observability_report(const ObservedSystem& sys, const DirectionalSearch& search = {}) {
  ObservabilityReport r;
  r.Q = gramian(sys);
  const auto c = constants_from_gramian(r.Q);
  r.K = c.K;
  r.m = c.m;
  r.gramian_residual = gramian_residual(sys, r.Q);
  r.admissible = std::isfinite(r.m);
  r.directional = directional_constants(sys, search);
  r.exactly_observable = r.K > observability_zero;
  r.observable_by_direction = r.directional.K_dir > observability_zero;
  return r;
}

struct BoundednessEntry {
  std::string symbol;
  double norm = 0.0;    // ||g(A)||_2
  double bound = 0.0;   // (m_dir / K_dir) sup|g| (1 + 1e-6)
  double margin = 0.0;  // bound - norm
  std::string path;
};

struct BoundednessReport {
  double K_dir = 0.0, m_dir = 0.0;
  bool applicable = false;
  std::string notice;
  std::vector<BoundednessEntry> entries;
  bool holds() const {
    return applicable && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.margin >= 0.0; });
  }
};

struct LabeledSymbol {
  std::string name;
  HalfPlaneFunction g;
};

inline BoundednessReport boundedness_theorem_check(const ObservedSystem& sys, const std::vector<LabeledSymbol>& symbols,
                                                   const DirectionalSearch& search = {}) {
  const auto d = directional_constants(sys, search);
  BoundednessReport r;
  r.K_dir = d.K_dir;
  r.m_dir = d.m_dir;
  if (!(d.K_dir > observability_zero)) {
    r.notice = "theorem inapplicable: K_dir = " + std::to_string(d.K_dir) + " is below 1e-8";
    return r;
  }
  r.applicable = true;
  const double ratio = d.m_dir / d.K_dir;
  for (const auto& s : symbols) {
    const auto res = bounded_apply(s.g, sys.gen);
    BoundednessEntry e;
    e.symbol = s.name;
    e.norm = op_norm_2(res.matrix);
    e.bound = ratio * s.g.sup_norm_est * (1.0 + 1e-6);
    e.margin = e.bound - e.norm;
    e.path = path_name(res.path);
    r.entries.push_back(e);
  }
  return r;
}

struct EquivalenceReport {
  double K = 0.0, K_dir = 0.0;
  bool exactly_observable = false;
  bool observable_by_direction = false;
  bool agree = false;
  std::string caveat;
};

inline EquivalenceReport equivalence_check_finite_dim(const ObservedSystem& sys, const DirectionalSearch& search = {}) {
  EquivalenceReport r;
  r.K = exact_obs_constants(sys).K;
  r.K_dir = directional_constants(sys, search).K_dir;
  r.exactly_observable = r.K > observability_zero;
  r.observable_by_direction = r.K_dir > observability_zero;
  r.agree = r.exactly_observable == r.observable_by_direction;
  r.caveat = "equivalence holds for finite output dimension; the constant linking K and K_dir degrades "
             "with the state dimension N = " + std::to_string(sys.gen.dim()) + ", zero threshold 1e-8";
  return r;
}

struct ExampleSystem {
  ObservedSystem sys;
  std::vector<double> lambdas;
  CVector x;  // (1/sqrt N)(1, ..., 1)
};

// A = diag(lambda_n), C = sqrt(-A); default lambda_n = -2^n.
inline ExampleSystem build_example(std::size_t n, std::optional<std::vector<double>> lambdas = std::nullopt) {
  if (n == 0) throw domain_error("build_example: N must be positive");
  if (n > 32) throw size_error("build_example: N above 32");
  std::vector<double> l;
  if (lambdas) {
    if (lambdas->size() != n) throw shape_error("build_example: lambda list length differs from N");
    l = *lambdas;
  } else {
    for (std::size_t k = 1; k <= n; ++k) l.push_back(-std::ldexp(1.0, int(k)));
  }
  CVector eig(n), croot(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(l[k] < 0.0)) throw domain_error("build_example: every lambda must be negative");
    eig[k] = l[k];
    croot[k] = std::sqrt(-l[k]);
  }
  ExampleSystem e{make_observed_system(make_diagonal_generator(eig), CMatrix::diagonal(croot)), l,
                  CVector(n, 1.0 / std::sqrt(double(n)))};
  return e;
}

}  // namespace halfcalc
