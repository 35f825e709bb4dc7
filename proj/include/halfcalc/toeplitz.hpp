#pragma once

#include <bit>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "halfcalc/errors.hpp"
#include "halfcalc/functions.hpp"
#include "halfcalc/grid.hpp"
#include "halfcalc/linalg.hpp"

namespace halfcalc {

// Radix-2 iterative FFT. Forward kernel e^{-i 2 pi jk/n}; inverse scaled by 1/n.
inline CVector fft(CVector a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n == 0 || !std::has_single_bit(n)) throw shape_error("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / double(len);
    const std::size_t half = len / 2;
    // twiddles computed directly rather than by recurrence to keep the error flat
    CVector w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = std::polar(1.0, ang * double(k));
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
  }
  if (inverse)
    for (auto& z : a) z /= double(n);
  return a;
}

// g(i w_j) on the 2N-point padded grid, w_j = 2 pi j / (2 N step) wrapped to
// [-Nyquist, Nyquist). The Nyquist bin holds the average of g(+-i pi/step).
struct MultiplierTable {
  TimeGrid grid;
  std::vector<double> frequencies;
  CVector values;
};

inline MultiplierTable make_multiplier_table(const HalfPlaneFunction& g, const TimeGrid& grid) {
  grid.validate();
  const std::size_t len = 2 * grid.count;
  const double dw = 2.0 * std::numbers::pi / (double(len) * grid.step);
  MultiplierTable t{grid, std::vector<double>(len), CVector(len)};
  for (std::size_t j = 0; j < len; ++j) {
    if (j == grid.count) {
      const double ny = std::numbers::pi / grid.step;
      t.frequencies[j] = -ny;
      t.values[j] = 0.5 * (g(cplx(0.0, ny)) + g(cplx(0.0, -ny)));
      continue;
    }
    const double w = j < grid.count ? dw * double(j) : -dw * double(len - j);
    t.frequencies[j] = w;
    t.values[j] = g(cplx(0.0, w));
  }
  return t;
}

inline SampledSignal apply_multiplier(const MultiplierTable& table, const SampledSignal& f) {
  if (!(table.grid == f.grid)) throw shape_error("apply_multiplier: grid mismatch");
  const std::size_t n = f.grid.count;
  CVector padded(2 * n, 0.0);
  std::copy(f.values.begin(), f.values.end(), padded.begin());
  padded = fft(std::move(padded));
  for (std::size_t j = 0; j < padded.size(); ++j) padded[j] *= table.values[j];
  padded = fft(std::move(padded), true);
  padded.resize(n);
  return SampledSignal(f.grid, std::move(padded));
}

// M_g f: zero-pad to 2N, multiply in frequency, keep t in [0, T).
inline SampledSignal toeplitz_apply(const HalfPlaneFunction& g, const SampledSignal& f) {
  f.grid.validate();
  if (g.constant) {
    SampledSignal out = f;
    out.warnings.clear();
    for (auto& z : out.values) z *= *g.constant;
    return out;
  }
  SampledSignal out = apply_multiplier(make_multiplier_table(g, f.grid), f);
  if (f.truncation_flagged() && !g.decay.is_h1())
    out.warnings.push_back("signal carries " + std::to_string(f.last_quarter_energy_fraction()) +
                           " of its energy in the last quarter of the grid and the symbol does not decay");
  return out;
}

// f(. + tau) restricted to [0, T): drop the first m samples, append zeros.
inline SampledSignal shift(const SampledSignal& f, double tau) {
  const double m_real = tau / f.grid.step;
  const double m_round = std::round(m_real);
  if (!(tau >= 0.0) || std::abs(m_real - m_round) > 1e-9 * std::max(1.0, m_real))
    throw alignment_error("shift: tau must be a nonnegative multiple of the grid step");
  const auto m = std::size_t(m_round);
  CVector v(f.values.size(), 0.0);
  for (std::size_t k = 0; k + m < v.size(); ++k) v[k] = f.values[k + m];
  return SampledSignal(f.grid, std::move(v));
}

struct MgPropertiesReport {
  double sup_norm = 0.0;
  // ||M_g f|| - ||g|| ||f||
  double contraction_margin = 0.0;
  double contraction_slack = 0.0;
  // relative, on the first N - m - N/8 samples
  double shift_residual = 0.0;
  std::size_t shift_window = 0;
  // relative
  double multiplicativity_residual = 0.0;

  bool contraction_ok() const { return contraction_margin <= contraction_slack; }
};

namespace detail {

inline double windowed_l2(const CVector& v, std::size_t count, double step) {
  double s = 0.0;
  for (std::size_t k = 0; k < count && k < v.size(); ++k) s += std::norm(v[k]);
  return std::sqrt(step * s);
}

inline double relative_l2(const SampledSignal& a, const SampledSignal& b, std::size_t count) {
  CVector d(count);
  for (std::size_t k = 0; k < count; ++k) d[k] = a.values[k] - b.values[k];
  const double num = windowed_l2(d, count, a.grid.step);
  const double den = std::max(windowed_l2(a.values, count, a.grid.step),
                              windowed_l2(b.values, count, a.grid.step));
  return den > 0.0 ? num / den : num;
}

}  // namespace detail

inline MgPropertiesReport check_mg_properties(const HalfPlaneFunction& g, const HalfPlaneFunction& h,
                                              const SampledSignal& f, double tau) {
  MgPropertiesReport r;
  const std::size_t n = f.grid.count;
  const auto mgf = toeplitz_apply(g, f);
  r.sup_norm = g.sup_norm_est;
  r.contraction_margin = mgf.l2_norm() - g.sup_norm_est * f.l2_norm();
  r.contraction_slack = 1e-9 + 1e-6 * g.sup_norm_est * f.l2_norm();

  const auto lhs = shift(mgf, tau);
  const auto rhs = toeplitz_apply(g, shift(f, tau));
  const auto m = std::size_t(std::round(tau / f.grid.step));
  r.shift_window = n > m + n / 8 ? n - m - n / 8 : 0;
  r.shift_residual = r.shift_window ? detail::relative_l2(lhs, rhs, r.shift_window) : 0.0;

  const auto gh = combine(CombineOp::product, g, h);
  r.multiplicativity_residual = detail::relative_l2(toeplitz_apply(gh, f),
                                                    toeplitz_apply(g, toeplitz_apply(h, f)), n);
  return r;
}

}  // namespace halfcalc
