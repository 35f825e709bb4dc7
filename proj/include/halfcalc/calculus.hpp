#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "halfcalc/errors.hpp"
#include "halfcalc/functions.hpp"
#include "halfcalc/grid.hpp"
#include "halfcalc/linalg.hpp"
#include "halfcalc/parallel.hpp"
#include "halfcalc/quadrature.hpp"
#include "halfcalc/semigroup.hpp"
#include "halfcalc/toeplitz.hpp"

namespace halfcalc {

enum class PathKind { spectral_oracle, phillips, contour_h1, contour_general, output_map, lambda_limit };

inline std::string path_name(PathKind k) {
  switch (k) {
    case PathKind::spectral_oracle: return "SpectralOracle";
    case PathKind::phillips: return "Phillips";
    case PathKind::contour_h1: return "ContourH1";
    case PathKind::contour_general: return "ContourGeneral";
    case PathKind::output_map: return "OutputMap";
    case PathKind::lambda_limit: return "LambdaLimit";
  }
  return "?";
}

inline PathKind parse_path(const std::string& s) {
  for (auto k : {PathKind::spectral_oracle, PathKind::phillips, PathKind::contour_h1,
                 PathKind::contour_general, PathKind::output_map, PathKind::lambda_limit})
    if (path_name(k) == s) return k;
  throw domain_error("unknown path '" + s + "'");
}

// Declared accuracy of each path on the default discretization.
inline double path_tolerance(PathKind k) {
  switch (k) {
    case PathKind::spectral_oracle: return 1e-12;
    case PathKind::phillips: return 1e-8;
    case PathKind::contour_h1: return 1e-6;
    case PathKind::contour_general: return 1e-5;
    case PathKind::output_map: return 1e-3;
    case PathKind::lambda_limit: return 1e-3;
  }
  return 0.0;
}

struct CalculusResult {
  CMatrix matrix;
  PathKind path = PathKind::spectral_oracle;
  std::optional<PathKind> base;  // set for lambda_limit
  double error_estimate = 0.0;
  double tolerance = 0.0;
  std::map<std::string, double> metadata;
  std::vector<std::string> warnings;

  std::string label() const {
    return base ? path_name(path) + "(" + path_name(*base) + ")" : path_name(path);
  }
};

namespace detail {

inline CalculusResult finish(CalculusResult r) {
  if (!(r.error_estimate >= 0.0) || !std::isfinite(r.error_estimate))
    throw instability_error(r.label() + ": error estimate is not finite");
  if (!r.matrix.all_finite()) throw instability_error(r.label() + ": non-finite result");
  r.tolerance = path_tolerance(r.base.value_or(r.path));
  return r;
}

inline void require_stable(const Generator& gen, const char* who) {
  if (!gen.stable()) throw instability_error(std::string(who) + ": generator is not stable");
}

}  // namespace detail

////////////////////////////////////////////////////////////////////////////////
//
// spectral oracle
//
////////////////////////////////////////////////////////////////////////////////

inline CalculusResult oracle_spectral(const HalfPlaneFunction& g, const Generator& gen) {
  const auto& s = gen.spectral();
  if (!s) throw oracle_unavailable_error("oracle_spectral: generator has no spectral form");
  detail::require_stable(gen, "oracle_spectral");
  CVector values(s->eigenvalues.size());
  double gmax = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = g(s->eigenvalues[i]);
    if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag()))
      throw domain_error("oracle_spectral: symbol is not finite at an eigenvalue");
    gmax = std::max(gmax, std::abs(values[i]));
  }
  CalculusResult r;
  r.path = PathKind::spectral_oracle;
  r.matrix = spectral_apply(*s, values);
  const double kappa = s->condition();
  r.error_estimate = kappa * 1e-14 * gmax;
  r.metadata["condition"] = kappa;
  return detail::finish(std::move(r));
}

////////////////////////////////////////////////////////////////////////////////
//
// Phillips integral: atom I + int_0^T h(-s) e^{sA} ds
//
////////////////////////////////////////////////////////////////////////////////

struct PhillipsOptions {
  std::size_t panels = 64;
  std::size_t order = 8;
  double tail_tolerance = 1e-10;
};

inline CalculusResult phillips_apply(const HalfPlaneFunction& g, const Generator& gen,
                                     const PhillipsOptions& opt = {}) {
  if (!g.phillips_kernel || !g.phillips_kernel->l1)
    throw path_inapplicable_error("phillips_apply: symbol has no L1 Phillips kernel");
  detail::require_stable(gen, "phillips_apply");
  const auto& k = *g.phillips_kernel;
  const std::size_t n = gen.dim();

  auto tail_at = [&](double t) { return std::abs(k.h(-t)) * op_norm_2(expm(gen, t)); };
  double horizon = 1.0;
  while (std::max({tail_at(horizon), tail_at(1.5 * horizon), tail_at(2.0 * horizon)}) >
         opt.tail_tolerance) {
    horizon *= 2.0;
    if (horizon > 1e6) throw decay_error("phillips_apply: kernel tail does not decay");
  }
  const double tail = tail_at(horizon) * std::max(1.0, horizon);

  const auto rule = gauss_legendre(opt.order);
  double magnitude = 0.0;
  auto integrate = [&](std::size_t panels, bool track) {
    CMatrix acc(n, n);
    const double width = horizon / double(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double c = (double(p) + 0.5) * width;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double s = c + 0.5 * width * rule.nodes[q];
        const cplx w = 0.5 * width * rule.weights[q] * k.h(-s);
        const CMatrix e = expm(gen, s);
        acc += w * e;
        if (track) magnitude += std::abs(w) * frobenius_norm(e);
      }
    }
    return acc;
  };
  const CMatrix fine = integrate(opt.panels, true);
  const CMatrix coarse = integrate(std::max<std::size_t>(1, opt.panels / 2), false);

  CalculusResult r;
  r.path = PathKind::phillips;
  r.matrix = k.atom * CMatrix::identity(n) + fine;
  r.error_estimate = op_norm_2(fine - coarse) + 1e-14 * (magnitude + std::abs(k.atom)) + tail;
  r.metadata["horizon"] = horizon;
  r.metadata["panels"] = double(opt.panels);
  r.metadata["order"] = double(opt.order);
  r.metadata["tail_bound"] = tail;
  return detail::finish(std::move(r));
}

////////////////////////////////////////////////////////////////////////////////
//
// half-plane contour: (1/2 pi i) int_{iR - eps} f(z) R(z, A) dz
//
////////////////////////////////////////////////////////////////////////////////

struct ContourOptions {
  std::optional<double> eps;  // default -omega/2
  double tail_target = 1e-12;
  // For symbols with e^{tz} factors, where the panel count grows linearly in the cutoff.
  double oscillatory_tail_target = 1e-8;
  std::size_t max_panels = std::size_t{1} << 18;
};

namespace detail {

struct ContourSum {
  CMatrix value;
  double quadrature_error = 0.0;
  double tail = 0.0;
  double rounding = 0.0;
  double cutoff = 0.0;
  std::size_t panels = 0;
};

// Composite Gauss-Kronrod (7, 15) in y on z = -eps + iy. Core panels have width
// d/2, d the distance of the nearest singularity from the line; outside the
// singular band the panels grow with the distance to it, capped for oscillatory
// symbols. Cutoff from ||R(z)|| <= 2/|z| for |z| >= 2||A|| and |f| <= c|z|^-alpha.
inline ContourSum contour_sum(const HalfPlaneFunction& f, const Generator& gen, double eps,
                              const ContourOptions& opt) {
  const std::size_t n = gen.dim();
  const double norm_a = op_norm_2(gen.matrix());
  const double alpha = f.decay.alpha;

  double dist = -gen.omega() - eps;
  double band = 0.0;
  if (const auto& s = gen.spectral()) {
    for (const auto& l : s->eigenvalues) band = std::max(band, std::abs(l.imag()));
  } else {
    band = norm_a;
  }
  if (std::isfinite(f.analytic_abscissa)) {
    dist = std::min(dist, f.analytic_abscissa + eps);
    if (f.singularities) {
      for (const auto& p : *f.singularities) {
        band = std::max(band, std::abs(p.imag()));
        dist = std::min(dist, p.real() + eps);
      }
    } else {
      band = std::max(band, 1e3);
    }
  }
  const double core = band + 1.0 + 2.0 * dist;

  auto integrand = [&](double y) {
    const cplx z(-eps, y);
    return f(z) * resolvent(gen, z);
  };

  double c = 0.0;
  for (double scale = 1.0; scale <= 1e8; scale *= 10.0)
    for (double sgn : {1.0, -1.0}) {
      const cplx z(-eps, sgn * core * scale);
      c = std::max(c, std::abs(f(z)) * std::pow(std::abs(z), alpha));
    }
  c *= 1.25;
  const double target = f.exponential_type > 0.0 ? opt.oscillatory_tail_target : opt.tail_target;
  double cutoff = std::max(core, 2.0 * norm_a + 1.0);
  if (c > 0.0)
    cutoff = std::max(cutoff, std::pow(2.0 * c / (std::numbers::pi * alpha * target), 1.0 / alpha));

  std::vector<std::pair<double, double>> panels;
  const auto core_count = std::size_t(std::ceil(2.0 * core / (0.5 * dist)));
  for (std::size_t i = 0; i < core_count; ++i)
    panels.emplace_back(-core + 2.0 * core * double(i) / double(core_count),
                        -core + 2.0 * core * double(i + 1) / double(core_count));
  for (double a = core; a < cutoff;) {
    double len = 0.5 * (a - band);
    if (f.exponential_type > 0.0) len = std::min(len, 4.0 / f.exponential_type);
    const double b = std::min(a + len, cutoff);
    panels.emplace_back(a, b);
    panels.emplace_back(-b, -a);
    a = b;
    if (panels.size() > opt.max_panels) {
      cutoff = a;
      break;
    }
  }

  ContourSum out;
  out.value = CMatrix(n, n);
  double magnitude = 0.0;
  for (const auto& [a, b] : panels) {
    auto [kr, ga] = gauss_kronrod15(integrand, a, b);
    out.quadrature_error += frobenius_norm(kr - ga);
    magnitude += frobenius_norm(kr);
    out.value += kr;
  }
  const double inv2pi = 0.5 / std::numbers::pi;
  out.value *= inv2pi;
  out.quadrature_error *= inv2pi;
  out.tail = c > 0.0 ? 2.0 * c / (std::numbers::pi * alpha) * std::pow(cutoff, -alpha) : 0.0;
  out.rounding = 1e-15 * std::sqrt(double(panels.size())) * magnitude * inv2pi;
  out.cutoff = cutoff;
  out.panels = panels.size();
  return out;
}

}  // namespace detail

inline CalculusResult contour_apply_h1(const HalfPlaneFunction& f, const Generator& gen,
                                       const ContourOptions& opt = {}) {
  if (!f.decay.is_h1())
    throw path_inapplicable_error("contour_apply_h1: symbol lacks H1 decay, use contour_apply_general");
  const double omega = gen.omega();
  const double eps = opt.eps.value_or(-omega / 2.0);
  if (!(eps > 0.0) || !(eps < -omega))
    throw contour_placement_error("contour_apply_h1: eps must lie in (0, -omega)");
  const auto main = detail::contour_sum(f, gen, eps, opt);
  const auto half = detail::contour_sum(f, gen, eps / 2.0, opt);
  const double eps_dev = op_norm_2(main.value - half.value);

  CalculusResult r;
  r.path = PathKind::contour_h1;
  r.matrix = main.value;
  r.error_estimate = main.quadrature_error + main.tail + main.rounding + eps_dev;
  r.metadata["eps"] = eps;
  r.metadata["cutoff"] = main.cutoff;
  r.metadata["panels"] = double(main.panels);
  r.metadata["tail_bound"] = main.tail;
  r.metadata["eps_deviation"] = eps_dev;
  return detail::finish(std::move(r));
}

// (I - A)^2 (f e)_HP(A), e(z) = (1 - z)^-2
inline CalculusResult contour_apply_general(const HalfPlaneFunction& f, const Generator& gen,
                                            const ContourOptions& opt = {}) {
  const auto inner = contour_apply_h1(regularize(f), gen, opt);
  const std::size_t n = gen.dim();
  const CMatrix ia = CMatrix::identity(n) - gen.matrix();
  const CMatrix m = ia * ia;
  const double m_norm = op_norm_2(m);

  CalculusResult r = inner;
  r.path = PathKind::contour_general;
  r.matrix = m * inner.matrix;
  r.error_estimate = m_norm * inner.error_estimate + 1e-15 * m_norm * op_norm_2(inner.matrix);
  r.metadata["regularizer_norm"] = m_norm;
  return detail::finish(std::move(r));
}

////////////////////////////////////////////////////////////////////////////////
//
// output map: samples of M_g <e_i, T(.) e_j> at t = step, undone by e^{-step A}
//
////////////////////////////////////////////////////////////////////////////////

struct OutputMapOptions {
  std::optional<TimeGrid> grid;  // default_grid(omega) when empty
  bool refinement_check = true;
};

namespace detail {

struct OutputSamples {
  CMatrix first;   // index 1
  CMatrix second;  // index 2
  std::vector<std::string> warnings;
};

inline OutputSamples output_samples(const HalfPlaneFunction& g, const Generator& gen,
                                    const TimeGrid& grid) {
  grid.validate();
  if (grid.count < 4) throw shape_error("outputmap_apply: grid needs at least 4 samples");
  const std::size_t n = gen.dim();
  const std::size_t count = grid.count;
  std::vector<CVector> traj(n * n, CVector(count));
  const CMatrix step = expm(gen, grid.step);
  CMatrix s = CMatrix::identity(n);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) traj[i * n + j][k] = s(i, j);
    s = step * s;
  }

  std::optional<MultiplierTable> table;
  if (!g.constant) table = make_multiplier_table(g, grid);
  OutputSamples out{CMatrix(n, n), CMatrix(n, n), {}};
  std::vector<char> flagged(n * n, 0);
  parallel_for(n * n, [&](std::size_t p) {
    SampledSignal f(grid, std::move(traj[p]));
    flagged[p] = f.truncation_flagged() && !g.decay.is_h1();
    const SampledSignal m = table ? apply_multiplier(*table, f) : toeplitz_apply(g, f);
    out.first(p / n, p % n) = m.values[1];
    out.second(p / n, p % n) = m.values[2];
  });
  if (std::any_of(flagged.begin(), flagged.end(), [](char c) { return c != 0; }))
    out.warnings.push_back("trajectories keep energy near the grid horizon and the symbol does not decay");
  return out;
}

}  // namespace detail

inline CalculusResult outputmap_apply(const HalfPlaneFunction& g, const Generator& gen,
                                      const OutputMapOptions& opt = {}) {
  detail::require_stable(gen, "outputmap_apply");
  const TimeGrid grid = opt.grid.value_or(default_grid(gen.omega()));
  const auto fine = detail::output_samples(g, gen, grid);
  const CMatrix g1 = fine.first * expm(gen, -grid.step);
  const CMatrix g2 = fine.second * expm(gen, -2.0 * grid.step);

  CalculusResult r;
  r.path = PathKind::output_map;
  r.matrix = g1;
  r.warnings = fine.warnings;
  const double sample_dev = op_norm_2(g1 - g2);
  double refine_dev = 0.0;
  if (opt.refinement_check && grid.count >= 8) {
    const TimeGrid coarse{2.0 * grid.step, grid.count / 2, grid.tail_tolerance};
    const auto c = detail::output_samples(g, gen, coarse);
    refine_dev = op_norm_2(g1 - c.first * expm(gen, -coarse.step));
  }
  r.error_estimate = sample_dev + refine_dev + 1e-14 * op_norm_2(g1);
  if (!grid.covers_decay(gen.omega()))
    r.warnings.push_back("grid horizon " + std::to_string(grid.horizon()) +
                         " does not cover the decay of the semigroup");
  r.metadata["step"] = grid.step;
  r.metadata["count"] = double(grid.count);
  r.metadata["horizon"] = grid.horizon();
  r.metadata["sample_deviation"] = sample_dev;
  r.metadata["refinement_deviation"] = refine_dev;
  return detail::finish(std::move(r));
}

////////////////////////////////////////////////////////////////////////////////
//
// Lambda extension: lim lambda C R(lambda, A) x
//
////////////////////////////////////////////////////////////////////////////////

struct LambdaOptions {
  std::optional<double> lambda0;  // default max(1, omega + 1)
  double tol = 1e-10;
  std::size_t max_k = 40;
};

struct LambdaStep {
  double lambda = 0.0;
  CVector value;
  double delta = 0.0;  // infinite for the first step
};

struct LambdaResult {
  CVector limit;
  bool converged = false;
  std::vector<LambdaStep> trace;
};

inline LambdaResult lambda_extension(const std::function<CVector(const CVector&)>& apply_c,
                                     const Generator& gen, const CVector& x,
                                     const LambdaOptions& opt = {}) {
  if (x.size() != gen.dim()) throw shape_error("lambda_extension: vector dimension mismatch");
  const double lambda0 = opt.lambda0.value_or(std::max(1.0, gen.omega() + 1.0));
  if (!(lambda0 > 0.0) || !(lambda0 > gen.omega()))
    throw domain_error("lambda_extension: lambda0 must be positive and above omega");
  LambdaResult r;
  int streak = 0;
  const CMatrix rhs = CMatrix::column(x);
  for (std::size_t k = 0; k <= opt.max_k; ++k) {
    const double lambda = std::ldexp(lambda0, int(k));
    CMatrix m = -1.0 * gen.matrix();
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += lambda;
    CVector v = apply_c(lu_solve(m, rhs).col(0));
    for (auto& z : v) z *= lambda;
    double delta = std::numeric_limits<double>::infinity();
    if (!r.trace.empty()) {
      CVector d(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] - r.trace.back().value[i];
      delta = norm2(d);
    }
    streak = delta <= opt.tol * (1.0 + norm2(v)) ? streak + 1 : 0;
    r.trace.push_back({lambda, v, delta});
    if (streak == 2) {
      r.converged = true;
      break;
    }
  }
  r.limit = r.trace.back().value;
  return r;
}

////////////////////////////////////////////////////////////////////////////////
//
// dispatch
//
////////////////////////////////////////////////////////////////////////////////

struct PathOptions {
  PhillipsOptions phillips;
  ContourOptions contour;
  OutputMapOptions output_map;
  LambdaOptions lambda;
  PathKind lambda_base = PathKind::phillips;
};

CalculusResult apply_path(PathKind kind, const HalfPlaneFunction& g, const Generator& gen,
                          const PathOptions& opt = {});

// Column j is the Lambda limit of the base result applied to e_j.
inline CalculusResult lambda_apply(const HalfPlaneFunction& g, const Generator& gen, PathKind base,
                                   const PathOptions& opt = {}) {
  if (base == PathKind::spectral_oracle || base == PathKind::lambda_limit)
    throw domain_error("lambda_apply: base must be Phillips, a contour path, or OutputMap");
  const auto b = apply_path(base, g, gen, opt);
  const std::size_t n = gen.dim();
  CalculusResult r;
  r.path = PathKind::lambda_limit;
  r.base = base;
  r.matrix = CMatrix(n, n);
  r.warnings = b.warnings;
  double worst = 0.0;
  bool all_converged = true;
  for (std::size_t j = 0; j < n; ++j) {
    CVector e(n, 0.0);
    e[j] = 1.0;
    const auto l = lambda_extension([&](const CVector& v) { return matvec(b.matrix, v); }, gen, e, opt.lambda);
    r.matrix.set_col(j, l.limit);
    worst = std::max(worst, l.trace.back().delta);
    all_converged = all_converged && l.converged;
  }
  if (!all_converged) r.warnings.push_back("Lambda limit did not converge for every basis vector");
  r.error_estimate = b.error_estimate + 2.0 * worst;
  r.metadata = b.metadata;
  r.metadata["lambda_last_delta"] = worst;
  return detail::finish(std::move(r));
}

inline CalculusResult apply_path(PathKind kind, const HalfPlaneFunction& g, const Generator& gen,
                                 const PathOptions& opt) {
  switch (kind) {
    case PathKind::spectral_oracle: return oracle_spectral(g, gen);
    case PathKind::phillips: return phillips_apply(g, gen, opt.phillips);
    case PathKind::contour_h1: return contour_apply_h1(g, gen, opt.contour);
    case PathKind::contour_general: return contour_apply_general(g, gen, opt.contour);
    case PathKind::output_map: return outputmap_apply(g, gen, opt.output_map);
    case PathKind::lambda_limit: return lambda_apply(g, gen, opt.lambda_base, opt);
  }
  throw domain_error("apply_path: unknown path");
}

// Oracle when available, then Phillips, then the regularized contour.
inline CalculusResult bounded_apply(const HalfPlaneFunction& g, const Generator& gen) {
  if (gen.spectral()) return oracle_spectral(g, gen);
  if (g.phillips_kernel && g.phillips_kernel->l1) return phillips_apply(g, gen);
  return contour_apply_general(g, gen);
}

////////////////////////////////////////////////////////////////////////////////
//
// checks
//
////////////////////////////////////////////////////////////////////////////////

struct WeissReport {
  std::vector<double> s_values;
  std::vector<double> values;  // sqrt(s) ||g(A) R(s, A)|| / ||g||
  double slope = 0.0;          // least-squares slope of log value against log s
  bool pass = false;
};

inline WeissReport weak_weiss_scaling_check(const HalfPlaneFunction& g, const Generator& gen,
                                            std::vector<double> s_list = {1, 4, 16, 64, 256, 1024}) {
  const CMatrix ga = bounded_apply(g, gen).matrix;
  WeissReport r;
  r.s_values = std::move(s_list);
  std::vector<double> lx, ly;
  for (double s : r.s_values) {
    if (!(s > 0.0)) throw domain_error("weak_weiss_scaling_check: s must be positive");
    const double v = g.sup_norm_est > 0.0
                         ? std::sqrt(s) * op_norm_2(ga * resolvent(gen, s)) / g.sup_norm_est
                         : 0.0;
    r.values.push_back(v);
    if (v > 0.0) {
      lx.push_back(std::log(s));
      ly.push_back(std::log(v));
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  r.pass = r.slope <= 0.1;
  return r;
}

struct LawsReport {
  std::string path;
  double scale = 1.0;  // ||g1(A)|| ||g2(A)|| + 1
  double identity = 0.0;
  double additivity = 0.0;
  double multiplicativity = 0.0;
  double semigroup_commutation = 0.0;  // max over t in {0.5, 2}
  double p_commutation = 0.0;          // P = R(1, A)

  double max_residual() const {
    return std::max({identity, additivity, multiplicativity, semigroup_commutation, p_commutation});
  }
};

inline LawsReport calculus_laws(const HalfPlaneFunction& g1, const HalfPlaneFunction& g2,
                                const Generator& gen, PathKind path, const PathOptions& opt = {}) {
  const std::size_t n = gen.dim();
  std::vector<HalfPlaneFunction> symbols{identity_symbol(), g1, g2, combine(CombineOp::sum, g1, g2),
                                         combine(CombineOp::product, g1, g2)};
  std::vector<CMatrix> m(symbols.size());
  parallel_for(symbols.size(), [&](std::size_t i) { m[i] = apply_path(path, symbols[i], gen, opt).matrix; });

  LawsReport r;
  r.path = path_name(path);
  r.scale = op_norm_2(m[1]) * op_norm_2(m[2]) + 1.0;
  r.identity = op_norm_2(m[0] - CMatrix::identity(n)) / r.scale;
  r.additivity = op_norm_2(m[3] - m[1] - m[2]) / r.scale;
  r.multiplicativity = op_norm_2(m[4] - m[1] * m[2]) / r.scale;
  for (double t : {0.5, 2.0}) {
    const CMatrix e = expm(gen, t);
    r.semigroup_commutation = std::max(r.semigroup_commutation, op_norm_2(m[1] * e - e * m[1]) / r.scale);
  }
  const CMatrix p = resolvent(gen, 1.0);
  r.p_commutation = op_norm_2(m[1] * p - p * m[1]) / r.scale;
  return r;
}

// f(A) := f(. + v)(A - vI), for generators with omega < v.
inline CalculusResult rescaled_apply(const HalfPlaneFunction& f, const Generator& gen, double v,
                                     PathKind path, const PathOptions& opt = {}) {
  if (!(gen.omega() < v))
    throw rescaling_error("rescaled_apply: growth bound " + std::to_string(gen.omega()) +
                          " is not below v = " + std::to_string(v));
  const std::size_t n = gen.dim();
  CMatrix a = gen.matrix() - v * CMatrix::identity(n);
  std::optional<SpectralForm> spec;
  if (const auto& s = gen.spectral()) {
    spec = *s;
    for (auto& l : spec->eigenvalues) l -= v;
  }
  const auto shifted_gen = make_generator(std::move(a), std::move(spec));
  auto r = apply_path(path, shift(f, v), shifted_gen, opt);
  r.metadata["rescaling_shift"] = v;
  return r;
}

struct ConvergenceReport {
  std::vector<std::size_t> n_values;
  std::vector<double> errors;  // ||r_n(A)x - e^{tA}x||
  bool strictly_decreasing = false;
  bool reduced_tenfold = false;
  bool trivial = false;  // every error at rounding level
  bool pass = false;
};

inline ConvergenceReport convergence_lemma_check(double t, const Generator& gen, const CVector& x,
                                                 std::vector<std::size_t> n_list = {1, 2, 4, 8, 16, 32},
                                                 PathKind path = PathKind::spectral_oracle,
                                                 const PathOptions& opt = {}) {
  if (n_list.empty()) throw domain_error("convergence_lemma_check: empty n list");
  const CVector exact = matvec(expm(gen, t), x);
  ConvergenceReport r;
  r.n_values = std::move(n_list);
  r.errors.resize(r.n_values.size());
  parallel_for(r.n_values.size(), [&](std::size_t i) {
    const auto m = apply_path(path, exp_rational_sequence(t, r.n_values[i]), gen, opt).matrix;
    const CVector y = matvec(m, x);
    CVector d(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) d[k] = y[k] - exact[k];
    r.errors[i] = norm2(d);
  });
  const double floor = 1e-13 * std::max(1.0, norm2(x));
  r.trivial = std::all_of(r.errors.begin(), r.errors.end(), [&](double e) { return e <= floor; });
  r.strictly_decreasing = true;
  for (std::size_t i = 1; i < r.errors.size(); ++i)
    r.strictly_decreasing = r.strictly_decreasing && r.errors[i] < r.errors[i - 1];
  r.reduced_tenfold = r.errors.back() <= r.errors.front() / 10.0;
  r.pass = r.trivial || (r.strictly_decreasing && r.reduced_tenfold);
  return r;
}

struct PathComparison {
  std::vector<CalculusResult> results;  // results[0] is the oracle
  std::vector<std::pair<PathKind, std::string>> inapplicable;
  std::vector<double> oracle_deviation;
  std::vector<std::vector<double>> pairwise;
};

inline PathComparison path_compare(const HalfPlaneFunction& g, const Generator& gen,
                                   const PathOptions& opt = {}) {
  if (!gen.spectral()) throw oracle_unavailable_error("path_compare: generator has no spectral form");
  const std::vector<PathKind> kinds{PathKind::spectral_oracle, PathKind::phillips, PathKind::contour_h1,
                                    PathKind::contour_general, PathKind::output_map};
  std::vector<std::optional<CalculusResult>> slots(kinds.size());
  std::vector<std::string> reasons(kinds.size());
  parallel_for(kinds.size(), [&](std::size_t i) {
    try {
      slots[i] = apply_path(kinds[i], g, gen, opt);
    } catch (const path_inapplicable_error& e) {
      reasons[i] = e.what();
    }
  });
  PathComparison c;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (slots[i])
      c.results.push_back(std::move(*slots[i]));
    else
      c.inapplicable.emplace_back(kinds[i], reasons[i]);
  }
  const std::size_t m = c.results.size();
  c.pairwise.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      c.pairwise[i][j] = c.pairwise[j][i] = op_norm_2(c.results[i].matrix - c.results[j].matrix);
  for (std::size_t i = 0; i < m; ++i) c.oracle_deviation.push_back(c.pairwise[0][i]);
  return c;
}

}  // namespace halfcalc
