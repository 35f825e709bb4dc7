#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "halfcalc/errors.hpp"
#include "halfcalc/linalg.hpp"

namespace halfcalc {

struct DecayClass {
  enum class Kind { bounded_only, h1 };
  Kind kind = Kind::bounded_only;
  double alpha = 0.0;  // |g(z)| = O(|z|^-alpha), alpha > 1, when kind == h1

  static DecayClass bounded() { return {}; }
  static DecayClass h1(double alpha) {
    if (!(alpha > 1.0)) throw domain_error("DecayClass::h1: alpha must exceed 1");
    return {Kind::h1, alpha};
  }
  bool is_h1() const { return kind == Kind::h1; }
  std::string name() const {
    return is_h1() ? "H1Decay(" + std::to_string(alpha) + ")" : "BoundedOnly";
  }
};

// g(z) = atom + int_{-inf}^0 h(t) e^{-zt} dt on Re z <= 0. The atom is a point
// mass at t = 0 and only appears for symbols with a nonzero limit at infinity.
struct PhillipsKernel {
  std::function<cplx(double)> h;  // defined for t <= 0
  double l1_norm_est = 0.0;
  cplx atom = 0.0;
  bool l1 = true;
  std::string support = "(-inf, 0]";
  // Populated when h was recovered numerically on a node set.
  std::vector<double> nodes;
  CVector node_values;
  std::vector<double> node_error_bounds;
};

// g(z) = gain * prod_i (z - zeros_i) / prod_k (poles_k - z)
struct RationalData {
  cplx gain = 1.0;
  CVector zeros;
  CVector poles;
};

inline PhillipsKernel make_kernel(std::function<cplx(double)> h, double l1_norm_est, cplx atom = 0.0,
                                  bool l1 = true) {
  PhillipsKernel k;
  k.h = std::move(h);
  k.l1_norm_est = l1_norm_est;
  k.atom = atom;
  k.l1 = l1;
  return k;
}

struct HalfPlaneFunction {
  std::function<cplx(cplx)> fn;
  double sup_norm_est = 0.0;
  DecayClass decay;
  std::optional<PhillipsKernel> phillips_kernel;
  std::optional<RationalData> rational;
  std::optional<cplx> constant;
  // The symbol is analytic on {Re z < analytic_abscissa}; always >= 0.
  double analytic_abscissa = 0.0;
  // Poles when known (empty for entire symbols), nullopt otherwise.
  std::optional<CVector> singularities;
  // tau with |f(x + iy)| <= C e^{-tau x} near the boundary; nonzero for e^{tz} factors.
  double exponential_type = 0.0;
  std::string description;

  cplx operator()(cplx z) const { return fn(z); }
  cplx evaluate(cplx z) const { return fn(z); }
};

////////////////////////////////////////////////////////////////////////////////
//
// boundary sampling
//
////////////////////////////////////////////////////////////////////////////////

// Frequencies 0 and +-10^k for k on a uniform grid in [-6, 6], plus extras.
inline std::vector<double> boundary_frequencies(std::size_t per_side = 2401,
                                                std::span<const double> extra = {}) {
  std::vector<double> w{0.0};
  w.reserve(2 * per_side + 1 + 2 * extra.size());
  for (std::size_t k = 0; k < per_side; ++k) {
    const double e = -6.0 + 12.0 * double(k) / double(per_side - 1);
    const double x = std::pow(10.0, e);
    w.push_back(x);
    w.push_back(-x);
  }
  for (double x : extra) {
    if (std::abs(x) <= 1e6) w.push_back(x);
  }
  return w;
}

inline double boundary_sup(const std::function<cplx(cplx)>& fn, std::span<const double> extra = {}) {
  double best = 0.0;
  for (double w : boundary_frequencies(2401, extra)) best = std::max(best, std::abs(fn(cplx(0.0, w))));
  return best;
}

// c such that |g(z)| <= c |z|^-alpha, fitted on the line Re z = -1 at |Im z| = 100.
inline double fit_decay_constant(const HalfPlaneFunction& g, double alpha) {
  double c = 0.0;
  for (double y : {100.0, -100.0}) {
    const cplx z(-1.0, y);
    c = std::max(c, std::abs(g(z)) * std::pow(std::abs(z), alpha));
  }
  return c;
}

// Checks |g(z)| <= c |z|^-alpha at |z| in {1e2, 1e3, 1e4} along iR - 1.
inline bool verify_h1_decay(const HalfPlaneFunction& g, double slack = 1.05) {
  if (!g.decay.is_h1()) return false;
  const double c = fit_decay_constant(g, g.decay.alpha);
  for (double r : {1e2, 1e3, 1e4})
    for (double s : {1.0, -1.0}) {
      const cplx z(-1.0, s * std::sqrt(r * r - 1.0));
      if (std::abs(g(z)) > slack * c * std::pow(r, -g.decay.alpha)) return false;
    }
  return true;
}

////////////////////////////////////////////////////////////////////////////////
//
// built-in symbols
//
////////////////////////////////////////////////////////////////////////////////

inline HalfPlaneFunction constant_symbol(cplx c) {
  HalfPlaneFunction f;
  f.fn = [c](cplx) { return c; };
  f.sup_norm_est = std::abs(c);
  f.phillips_kernel = make_kernel([](double) { return cplx{}; }, 0.0, c);
  f.constant = c;
  f.singularities = CVector{};
  f.analytic_abscissa = std::numeric_limits<double>::infinity();
  f.description = c == cplx{1.0} ? "1" : "constant";
  return f;
}

inline HalfPlaneFunction identity_symbol() { return constant_symbol(1.0); }

// g_mu(z) = 1/(mu - z); maps to the resolvent R(mu, A).
inline HalfPlaneFunction resolvent_kernel(cplx mu) {
  if (!(mu.real() > 0.0)) throw domain_error("resolvent_kernel: Re(mu) must be positive");
  HalfPlaneFunction f;
  f.fn = [mu](cplx z) { return 1.0 / (mu - z); };
  f.sup_norm_est = 1.0 / mu.real();
  f.decay = DecayClass::bounded();
  f.phillips_kernel =
      make_kernel([mu](double t) { return std::exp(mu * t); }, 1.0 / mu.real());
  f.rational = RationalData{1.0, {}, {mu}};
  f.analytic_abscissa = mu.real();
  f.singularities = CVector{mu};
  f.description = "resolvent_kernel";
  return f;
}

// g_t(z) = e^{tz}; maps to the semigroup T(t). No L1 kernel (point mass at -t).
inline HalfPlaneFunction exponential_kernel(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw domain_error("exponential_kernel: t must be >= 0");
  if (t == 0.0) {
    auto one = identity_symbol();
    one.description = "exponential_kernel(0)";
    return one;
  }
  HalfPlaneFunction f;
  f.fn = [t](cplx z) { return std::exp(t * z); };
  f.sup_norm_est = 1.0;
  f.decay = DecayClass::bounded();
  f.analytic_abscissa = std::numeric_limits<double>::infinity();
  f.singularities = CVector{};
  f.exponential_type = t;
  f.description = "exponential_kernel";
  return f;
}

namespace detail {

using Series = CVector;  // truncated power series, coefficient k of w^k

inline Series series_mul(const Series& a, const Series& b, std::size_t order) {
  Series c(order, 0.0);
  for (std::size_t i = 0; i < a.size() && i < order; ++i)
    for (std::size_t j = 0; j < b.size() && i + j < order; ++j) c[i + j] += a[i] * b[j];
  return c;
}

struct PoleGroup {
  cplx pole;
  std::size_t multiplicity;
  CVector coeffs;  // coeffs[j-1] multiplies (pole - z)^-j
};

inline std::vector<PoleGroup> group_poles(const CVector& poles) {
  std::vector<PoleGroup> groups;
  for (const auto& p : poles) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const PoleGroup& g) {
      return std::abs(g.pole - p) <= 1e-12 * std::max(1.0, std::abs(p));
    });
    if (it == groups.end())
      groups.push_back({p, 1, {}});
    else
      ++it->multiplicity;
  }
  return groups;
}

// Partial fractions of gain * prod (z - zeros) / prod (poles - z), with
// deg(zeros) <= deg(poles). Returns the pole groups and the direct term.
inline std::pair<std::vector<PoleGroup>, cplx> partial_fractions(const RationalData& r) {
  auto groups = group_poles(r.poles);
  for (auto& g : groups) {
    const std::size_t m = g.multiplicity;
    // phi(w) with z = pole - w
    Series phi(m, 0.0);
    phi[0] = r.gain;
    for (const auto& zeta : r.zeros) phi = series_mul(phi, Series{g.pole - zeta, -1.0}, m);
    for (const auto& other : groups) {
      if (&other == &g) continue;
      const cplx b = other.pole - g.pole;  // (b + w)^-1 = sum (-1)^k w^k / b^{k+1}
      Series inv(m);
      for (std::size_t k = 0; k < m; ++k) inv[k] = ((k % 2) ? -1.0 : 1.0) / std::pow(b, double(k + 1));
      for (std::size_t rep = 0; rep < other.multiplicity; ++rep) phi = series_mul(phi, inv, m);
    }
    g.coeffs.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) g.coeffs[m - 1 - k] = phi[k];
  }
  cplx direct = 0.0;
  if (r.zeros.size() == r.poles.size()) direct = r.gain * ((r.poles.size() % 2) ? -1.0 : 1.0);
  return {groups, direct};
}

inline double factorial(std::size_t k) { return std::tgamma(double(k) + 1.0); }

inline PhillipsKernel rational_kernel(const RationalData& r) {
  auto [groups, direct] = partial_fractions(r);
  double l1 = 0.0;
  for (const auto& g : groups)
    for (std::size_t j = 1; j <= g.multiplicity; ++j)
      l1 += std::abs(g.coeffs[j - 1]) / std::pow(g.pole.real(), double(j));
  auto h = [groups = std::move(groups)](double t) {
    cplx s = 0.0;
    for (const auto& g : groups) {
      const cplx e = std::exp(g.pole * t);
      for (std::size_t j = 1; j <= g.multiplicity; ++j)
        s += g.coeffs[j - 1] * std::pow(-t, double(j - 1)) / factorial(j - 1) * e;
    }
    return s;
  };
  return make_kernel(std::move(h), l1, direct);
}

inline cplx eval_rational(const RationalData& r, cplx z) {
  cplx v = r.gain;
  for (const auto& zeta : r.zeros) v *= (z - zeta);
  for (const auto& mu : r.poles) v /= (mu - z);
  return v;
}

inline std::vector<double> pole_frequencies(const CVector& poles) {
  std::vector<double> w;
  for (const auto& p : poles) w.push_back(p.imag());
  return w;
}

}  // namespace detail

// p/q in zero/pole form: gain * prod (z - zeros) / prod (poles - z).
inline HalfPlaneFunction rational(cplx gain, CVector zeros, CVector poles) {
  for (const auto& p : poles)
    if (!(p.real() > 0.0)) throw domain_error("rational: every pole needs Re > 0");
  if (zeros.size() > poles.size()) throw domain_error("rational: deg(p) > deg(q)");
  RationalData data{gain, std::move(zeros), std::move(poles)};
  HalfPlaneFunction f;
  f.fn = [data](cplx z) { return detail::eval_rational(data, z); };
  const std::size_t gap = data.poles.size() - data.zeros.size();
  f.decay = (gap >= 2 && gain != cplx{}) ? DecayClass::h1(double(gap)) : DecayClass::bounded();
  const auto extra = detail::pole_frequencies(data.poles);
  f.sup_norm_est = 1.01 * boundary_sup(f.fn, extra);
  if (gap == 0) f.sup_norm_est = std::max(f.sup_norm_est, 1.01 * std::abs(gain));
  f.phillips_kernel = detail::rational_kernel(data);
  f.analytic_abscissa = std::numeric_limits<double>::infinity();
  for (const auto& p : data.poles) f.analytic_abscissa = std::min(f.analytic_abscissa, p.real());
  if (data.poles.empty()) f.constant = gain;
  f.singularities = data.poles;
  f.rational = std::move(data);
  f.description = "rational";
  return f;
}

// e(z) = (1 - z)^-2
inline HalfPlaneFunction regularizer() {
  auto e = rational(1.0, {}, {1.0, 1.0});
  e.description = "(1-z)^-2";
  return e;
}

enum class CombineOp { sum, product, scalar_multiple };

// scalar_multiple scales f by the constant symbol g.
inline HalfPlaneFunction combine(CombineOp op, const HalfPlaneFunction& f, const HalfPlaneFunction& g) {
  HalfPlaneFunction r;
  r.analytic_abscissa = std::min(f.analytic_abscissa, g.analytic_abscissa);
  std::vector<double> extra;
  for (const auto* s : {&f, &g})
    if (s->rational) {
      auto w = detail::pole_frequencies(s->rational->poles);
      extra.insert(extra.end(), w.begin(), w.end());
    }

  if (f.singularities && g.singularities) {
    CVector u = *f.singularities;
    u.insert(u.end(), g.singularities->begin(), g.singularities->end());
    r.singularities = std::move(u);
  }

  switch (op) {
    case CombineOp::sum: {
      r.exponential_type = std::max(f.exponential_type, g.exponential_type);
      r.fn = [a = f.fn, b = g.fn](cplx z) { return a(z) + b(z); };
      if (f.decay.is_h1() && g.decay.is_h1())
        r.decay = DecayClass::h1(std::min(f.decay.alpha, g.decay.alpha));
      if (f.phillips_kernel && g.phillips_kernel) {
        const auto& kf = *f.phillips_kernel;
        const auto& kg = *g.phillips_kernel;
        r.phillips_kernel = make_kernel([a = kf.h, b = kg.h](double t) { return a(t) + b(t); },
                                           kf.l1_norm_est + kg.l1_norm_est, kf.atom + kg.atom,
                                           kf.l1 && kg.l1);
      }
      if (f.constant && g.constant) r.constant = *f.constant + *g.constant;
      r.sup_norm_est = std::min(f.sup_norm_est + g.sup_norm_est, 1.01 * boundary_sup(r.fn, extra));
      r.description = "(" + f.description + ")+(" + g.description + ")";
      break;
    }
    case CombineOp::product: {
      if (f.rational && g.rational) {
        RationalData d{f.rational->gain * g.rational->gain, f.rational->zeros, f.rational->poles};
        d.zeros.insert(d.zeros.end(), g.rational->zeros.begin(), g.rational->zeros.end());
        d.poles.insert(d.poles.end(), g.rational->poles.begin(), g.rational->poles.end());
        r = rational(d.gain, d.zeros, d.poles);
        r.sup_norm_est = std::min(r.sup_norm_est, f.sup_norm_est * g.sup_norm_est);
        r.description = "(" + f.description + ")*(" + g.description + ")";
        return r;
      }
      r.fn = [a = f.fn, b = g.fn](cplx z) { return a(z) * b(z); };
      r.exponential_type = f.exponential_type + g.exponential_type;
      if (f.decay.is_h1() && g.decay.is_h1())
        r.decay = DecayClass::h1(f.decay.alpha + g.decay.alpha);
      else if (f.decay.is_h1() || g.decay.is_h1())
        r.decay = f.decay.is_h1() ? f.decay : g.decay;
      if (f.constant && g.constant) r.constant = *f.constant * *g.constant;
      auto scaled_kernel = [](const PhillipsKernel& k, cplx c) {
        return make_kernel([h = k.h, c](double t) { return c * h(t); }, std::abs(c) * k.l1_norm_est,
                              c * k.atom, k.l1);
      };
      if (f.constant && g.phillips_kernel) r.phillips_kernel = scaled_kernel(*g.phillips_kernel, *f.constant);
      if (g.constant && f.phillips_kernel) r.phillips_kernel = scaled_kernel(*f.phillips_kernel, *g.constant);
      r.sup_norm_est = std::min(f.sup_norm_est * g.sup_norm_est, 1.01 * boundary_sup(r.fn, extra));
      r.description = "(" + f.description + ")*(" + g.description + ")";
      break;
    }
    case CombineOp::scalar_multiple: {
      if (!g.constant) throw domain_error("combine: scalar_multiple needs a constant second symbol");
      const cplx c = *g.constant;
      if (f.rational) {
        r = rational(c * f.rational->gain, f.rational->zeros, f.rational->poles);
        r.description = "scaled(" + f.description + ")";
        return r;
      }
      r = f;
      r.fn = [a = f.fn, c](cplx z) { return c * a(z); };
      r.sup_norm_est = std::abs(c) * f.sup_norm_est;
      if (c == cplx{}) r.decay = DecayClass::bounded();
      if (f.phillips_kernel) {
        const auto& k = *f.phillips_kernel;
        r.phillips_kernel = make_kernel([h = k.h, c](double t) { return c * h(t); },
                                           std::abs(c) * k.l1_norm_est, c * k.atom, k.l1);
      }
      if (f.constant) r.constant = c * *f.constant;
      r.description = "scaled(" + f.description + ")";
      break;
    }
  }
  return r;
}

inline HalfPlaneFunction scale(const HalfPlaneFunction& f, cplx c) {
  return combine(CombineOp::scalar_multiple, f, constant_symbol(c));
}

// e * f with e(z) = (1 - z)^-2.
inline HalfPlaneFunction regularize(const HalfPlaneFunction& f) {
  auto r = combine(CombineOp::product, f, regularizer());
  if (!r.decay.is_h1() || r.decay.alpha < 2.0) r.decay = DecayClass::h1(2.0);
  r.description = "regularize(" + f.description + ")";
  return r;
}

// z -> f(z + v). f must be analytic on {Re z < v}.
inline HalfPlaneFunction shift(const HalfPlaneFunction& f, double v) {
  if (!(v < f.analytic_abscissa))
    throw domain_error("shift: symbol is not analytic on the shifted half-plane");
  if (v == 0.0) return f;
  if (f.rational) {
    RationalData d = *f.rational;
    for (auto& z : d.zeros) z -= v;
    for (auto& p : d.poles) p -= v;
    auto r = rational(d.gain, d.zeros, d.poles);
    r.description = "shift(" + f.description + ")";
    return r;
  }
  HalfPlaneFunction r = f;
  r.fn = [a = f.fn, v](cplx z) { return a(z + v); };
  r.analytic_abscissa = f.analytic_abscissa - v;
  if (r.singularities)
    for (auto& p : *r.singularities) p -= v;
  r.sup_norm_est = 1.01 * boundary_sup(r.fn);
  if (f.constant) r.sup_norm_est = f.sup_norm_est;
  if (f.phillips_kernel && !f.constant) {
    if (v < 0.0) {
      const auto& k = *f.phillips_kernel;
      r.phillips_kernel = make_kernel([h = k.h, v](double t) { return h(t) * std::exp(-v * t); },
                                         k.l1_norm_est, k.atom, k.l1);
    } else {
      r.phillips_kernel.reset();
    }
  }
  r.description = "shift(" + f.description + ")";
  return r;
}

// r_n(z) = (1 - tz/n)^-n, a rational approximation of e^{tz} bounded by 1 on C_-.
inline HalfPlaneFunction exp_rational_sequence(double t, std::size_t n) {
  if (n < 1) throw domain_error("exp_rational_sequence: n must be >= 1");
  if (!(t >= 0.0)) throw domain_error("exp_rational_sequence: t must be >= 0");
  if (t == 0.0) {
    auto one = identity_symbol();
    one.description = "exp_rational_sequence(0)";
    return one;
  }
  HalfPlaneFunction f;
  const double nd = double(n);
  f.fn = [t, nd](cplx z) { return std::pow(1.0 - t * z / nd, -nd); };
  f.sup_norm_est = 1.0;
  f.decay = n >= 2 ? DecayClass::h1(nd) : DecayClass::bounded();
  const double rate = nd / t;
  // Gamma density: h(-s) = rate^n s^{n-1} e^{-rate s} / (n-1)!
  f.phillips_kernel = make_kernel(
      [rate, nd](double tt) {
        const double s = -tt;
        if (s <= 0.0) return cplx(nd == 1.0 ? rate : 0.0);
        return cplx(std::exp(nd * std::log(rate) + (nd - 1.0) * std::log(s) - rate * s - std::lgamma(nd)));
      },
      1.0);
  f.rational = RationalData{std::pow(rate, nd), {}, CVector(n, cplx(rate))};
  f.analytic_abscissa = rate;
  f.singularities = CVector{cplx(rate)};
  f.description = "exp_rational_sequence";
  return f;
}

// h(t) = (1/2 pi i) int_{iR - eps} g(z) e^{zt} dz on the given nodes t <= 0,
// by truncated trapezoid on z = -eps + iy.
inline PhillipsKernel phillips_kernel_from_contour(const HalfPlaneFunction& g, double eps,
                                                   std::span<const double> nodes,
                                                   double tail_target = 1e-8) {
  if (!g.decay.is_h1())
    throw decay_error("phillips_kernel_from_contour: symbol lacks H1 decay, regularize first");
  if (!(eps > 0.0)) throw domain_error("phillips_kernel_from_contour: eps must be positive");
  const double alpha = g.decay.alpha;
  const double c = std::max(fit_decay_constant(g, alpha), 1e-300);
  const double sigma = std::min(g.analytic_abscissa, 1e6);
  constexpr std::size_t max_points = std::size_t{1} << 23;

  PhillipsKernel k;
  k.support = "sampled on " + std::to_string(nodes.size()) + " nodes";
  k.nodes.assign(nodes.begin(), nodes.end());
  for (double t : nodes) {
    if (t > 0.0) throw domain_error("phillips_kernel_from_contour: nodes must be <= 0");
    if (t == 0.0) {
      // Closing the contour to the left (alpha > 1, e^{zt} bounded) gives h(0) = 0.
      k.node_values.push_back(0.0);
      k.node_error_bounds.push_back(0.0);
      continue;
    }
    const double at = -t;
    const double growth = std::exp(eps * at);
    // Poisson aliasing: period P must exceed |t| and leave e^{-(sigma+eps)P} negligible.
    const double period = at + 36.0 / (sigma + eps);
    const double dy = 2.0 * std::numbers::pi / period;
    const double y_osc = std::pow(2.0 * c * growth / (std::numbers::pi * at * tail_target), 1.0 / alpha);
    const double y_abs =
        std::pow(c * growth / (std::numbers::pi * (alpha - 1.0) * tail_target), 1.0 / (alpha - 1.0));
    double ymax = std::max(50.0, std::min(y_osc, y_abs));
    ymax = std::min(ymax, dy * double(max_points / 2));
    const std::size_t half = std::size_t(std::ceil(ymax / dy));
    ymax = dy * double(half);

    cplx sum = g(cplx(-eps, 0.0)) * std::exp(cplx(-eps, 0.0) * t);
    double mag = std::abs(sum);
    for (std::size_t j = 1; j <= half; ++j) {
      const double w = j == half ? 0.5 : 1.0;
      for (double s : {1.0, -1.0}) {
        const cplx z(-eps, s * dy * double(j));
        const cplx term = g(z) * std::exp(z * t);
        sum += w * term;
        mag += std::abs(term);
      }
    }
    const double tail = std::min(2.0 * c * std::pow(ymax, -alpha) / at,
                                 c * std::pow(ymax, 1.0 - alpha) / (alpha - 1.0)) *
                        growth / std::numbers::pi;
    k.node_values.push_back(sum * dy / (2.0 * std::numbers::pi));
    k.node_error_bounds.push_back(tail + 1e-15 * mag * dy);
  }
  double l1 = 0.0;
  for (std::size_t i = 1; i < k.nodes.size(); ++i)
    l1 += 0.5 * std::abs(k.nodes[i] - k.nodes[i - 1]) *
          (std::abs(k.node_values[i]) + std::abs(k.node_values[i - 1]));
  k.l1_norm_est = l1;
  k.h = [nodes = k.nodes, vals = k.node_values](double t) -> cplx {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] == t) return vals[i];
      if (i + 1 < nodes.size() && (t - nodes[i]) * (t - nodes[i + 1]) < 0.0) {
        const double a = (t - nodes[i]) / (nodes[i + 1] - nodes[i]);
        return (1.0 - a) * vals[i] + a * vals[i + 1];
      }
    }
    return 0.0;
  };
  return k;
}

}  // namespace halfcalc
