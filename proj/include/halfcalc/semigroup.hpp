#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "halfcalc/errors.hpp"
#include "halfcalc/grid.hpp"
#include "halfcalc/linalg.hpp"

namespace halfcalc {

// A = V diag(eigenvalues) Vinv.
struct SpectralForm {
  CVector eigenvalues;
  CMatrix V;
  CMatrix Vinv;

  double condition() const { return op_norm_2(V) * op_norm_2(Vinv); }
};

inline SpectralForm make_spectral_form(CVector eigenvalues, CMatrix V) {
  if (!V.is_square() || V.rows() != eigenvalues.size())
    throw shape_error("make_spectral_form: V must be square and match the eigenvalue count");
  CMatrix Vinv = inverse(V);
  return {std::move(eigenvalues), std::move(V), std::move(Vinv)};
}

inline SpectralForm diagonal_spectral_form(CVector eigenvalues) {
  const std::size_t n = eigenvalues.size();
  return {std::move(eigenvalues), CMatrix::identity(n), CMatrix::identity(n)};
}

inline CMatrix reconstruct(const SpectralForm& s) {
  CMatrix vd = s.V;
  for (std::size_t j = 0; j < vd.cols(); ++j)
    for (std::size_t i = 0; i < vd.rows(); ++i) vd(i, j) *= s.eigenvalues[j];
  return vd * s.Vinv;
}

// V diag(values) Vinv
inline CMatrix spectral_apply(const SpectralForm& s, std::span<const cplx> values) {
  CMatrix vd = s.V;
  for (std::size_t j = 0; j < vd.cols(); ++j)
    for (std::size_t i = 0; i < vd.rows(); ++i) vd(i, j) *= values[j];
  return vd * s.Vinv;
}

enum class Stability { require, allow };

class Generator {
 public:
  const CMatrix& matrix() const { return a_; }
  const std::optional<SpectralForm>& spectral() const { return spectral_; }
  std::size_t dim() const { return a_.rows(); }
  // Spectral abscissa when a spectral form is known, otherwise an upper estimate.
  double omega() const { return omega_; }
  bool omega_is_exact() const { return spectral_.has_value(); }
  bool stable() const { return omega_ < 0.0; }

 private:
  friend Generator make_generator(CMatrix, std::optional<SpectralForm>, Stability);
  CMatrix a_;
  std::optional<SpectralForm> spectral_;
  double omega_ = 0.0;
};

namespace detail {

inline double norm_1(const CMatrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

// Diagonal Pade(6,6) with scaling and squaring, ||X||_1 / 2^s <= 0.5.
inline CMatrix expm_pade(const CMatrix& x) {
  const std::size_t n = x.rows();
  int s = 0;
  const double nrm = norm_1(x);
  if (nrm > 0.5) s = std::max(0, int(std::ceil(std::log2(nrm / 0.5))));
  const CMatrix xs = std::ldexp(1.0, -s) * x;

  // c_k = (2m-k)! m! / ((2m)! k! (m-k)!), m = 6
  constexpr std::array<double, 7> c{1.0,           1.0 / 2.0,      5.0 / 44.0,    1.0 / 66.0,
                                    1.0 / 792.0,   1.0 / 15840.0,  1.0 / 665280.0};
  CMatrix num = CMatrix::identity(n) * c[0];
  CMatrix den = num;
  CMatrix power = CMatrix::identity(n);
  for (std::size_t k = 1; k < c.size(); ++k) {
    power = power * xs;
    num += c[k] * power;
    den += ((k % 2) ? -c[k] : c[k]) * power;
  }
  CMatrix r = lu_solve(den, num);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

inline double estimate_omega(const CMatrix& a) {
  // rho(e^{tA}) <= ||e^{tA}|| gives an upper bound on the spectral abscissa for every t.
  double best = std::numeric_limits<double>::infinity();
  for (double t : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    const double nrm = op_norm_2(expm_pade(t * a));
    if (nrm > 0.0 && std::isfinite(nrm)) best = std::min(best, std::log(nrm) / t);
  }
  if (!std::isfinite(best)) best = -1.0;  // every probe underflowed
  return best + 0.05;
}

}  // namespace detail

inline Generator make_generator(CMatrix a, std::optional<SpectralForm> spectral = std::nullopt,
                                Stability stability = Stability::require) {
  if (!a.is_square()) throw shape_error("make_generator: A must be square");
  if (a.rows() > 64) throw size_error("make_generator: dimension above 64");
  if (!a.all_finite()) throw domain_error("make_generator: non-finite entry");
  Generator g;
  if (spectral) {
    const auto& s = *spectral;
    if (s.eigenvalues.size() != a.rows() || s.V.rows() != a.rows() || s.Vinv.rows() != a.rows())
      throw validation_error("make_generator: spectral form dimension mismatch");
    const double kappa = s.condition();
    const double id_dev = frobenius_norm(s.V * s.Vinv - CMatrix::identity(a.rows()));
    if (id_dev > 1e-10 * std::max(1.0, kappa))
      throw validation_error("make_generator: V * Vinv deviates from I");
    const double rec_dev = frobenius_norm(reconstruct(s) - a);
    if (rec_dev > 1e-10 * std::max(1.0, kappa) * std::max(1.0, frobenius_norm(a)))
      throw validation_error("make_generator: spectral form does not reproduce A");
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& l : s.eigenvalues) w = std::max(w, l.real());
    g.omega_ = w;
  } else {
    g.omega_ = detail::estimate_omega(a);
  }
  if (stability == Stability::require && !(g.omega_ < 0.0))
    throw instability_error("make_generator: growth bound " + std::to_string(g.omega_) +
                            " is not negative");
  g.a_ = std::move(a);
  g.spectral_ = std::move(spectral);
  return g;
}

inline Generator make_diagonal_generator(const CVector& eigenvalues,
                                         Stability stability = Stability::require) {
  return make_generator(CMatrix::diagonal(eigenvalues), diagonal_spectral_form(eigenvalues),
                        stability);
}

// e^{tA}
inline CMatrix expm(const Generator& gen, double t) {
  if (!std::isfinite(t)) throw domain_error("expm: t must be finite");
  if (t == 0.0) return CMatrix::identity(gen.dim());
  if (const auto& s = gen.spectral()) {
    CVector e(s->eigenvalues.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(t * s->eigenvalues[i]);
    return spectral_apply(*s, e);
  }
  return detail::expm_pade(t * gen.matrix());
}

// (sI - A)^{-1}
inline CMatrix resolvent(const Generator& gen, cplx s) {
  CMatrix m = -1.0 * gen.matrix();
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += s;
  return lu_solve(m, CMatrix::identity(gen.dim()));
}

// Distance between the Laplace integral of e^{tA} (composite Simpson on the
// grid, stepping e^{step (A - s)}) and (sI - A)^{-1}, plus the analytic tail
// bound e^{(omega - Re s) T} / (Re s - omega).
inline double resolvent_laplace_check(const Generator& gen, cplx s, const TimeGrid& grid) {
  grid.validate();
  if (!(s.real() > 0.0)) throw domain_error("resolvent_laplace_check: Re(s) must be positive");
  if (!gen.stable()) throw instability_error("resolvent_laplace_check: generator not stable");
  const std::size_t n = gen.dim();
  const CMatrix step = std::exp(-s * grid.step) * expm(gen, grid.step);
  CMatrix current = CMatrix::identity(n);
  CMatrix acc(n, n);
  // nodes 0..count (count is even): weights 1,4,2,...,4,1
  for (std::size_t k = 0; k <= grid.count; ++k) {
    const double w = (k == 0 || k == grid.count) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * current;
    current = step * current;
  }
  acc *= grid.step / 3.0;
  const double tail = std::exp((gen.omega() - s.real()) * grid.horizon()) / (s.real() - gen.omega());
  return op_norm_2(acc - resolvent(gen, s)) + tail;
}

// f_k = <y, T(t_k) x> = y^H e^{t_k A} x, stepped with E = e^{step A}.
inline SampledSignal scalar_trajectory(const Generator& gen, std::span<const cplx> y,
                                       std::span<const cplx> x, const TimeGrid& grid) {
  grid.validate();
  if (y.size() != gen.dim() || x.size() != gen.dim())
    throw shape_error("scalar_trajectory: vector dimension mismatch");
  const CMatrix e = expm(gen, grid.step);
  CVector state(x.begin(), x.end());
  CVector out(grid.count);
  for (std::size_t k = 0; k < grid.count; ++k) {
    out[k] = dot(y, state);
    state = matvec(e, state);
  }
  return SampledSignal(grid, std::move(out));
}

}  // namespace halfcalc
