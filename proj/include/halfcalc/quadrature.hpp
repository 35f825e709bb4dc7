#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "halfcalc/errors.hpp"

namespace halfcalc {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// n-point Gauss-Legendre by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw domain_error("gauss_legendre: n must be positive");
  if (n == 1) return {{0.0}, {2.0}};
  QuadratureRule r{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (double(i) + 0.75) / (double(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * double(k) - 1.0) * x * p1 - (double(k) - 1.0) * p0) / double(k);
        p0 = p1;
        p1 = p2;
      }
      dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  return r;
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15 constants).
// Index 7 is the centre; the Gauss nodes are the odd indices.
namespace kronrod15 {
inline constexpr std::array<double, 8> xgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> wgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// weights of the Gauss nodes xgk[1], xgk[3], xgk[5], xgk[7]
inline constexpr std::array<double, 4> wg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
}  // namespace kronrod15

// Applies the (7, 15) pair on [a, b]; f returns any type closed under + and
// scalar *. Returns {kronrod, gauss}.
template <class F>
auto gauss_kronrod15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  auto centre = f(c);
  auto k = kronrod15::wgk[7] * centre;
  auto g = kronrod15::wg[3] * centre;
  for (std::size_t i = 0; i < 7; ++i) {
    auto s = f(c - h * kronrod15::xgk[i]) + f(c + h * kronrod15::xgk[i]);
    k += kronrod15::wgk[i] * s;
    if (i % 2 == 1) g += kronrod15::wg[i / 2] * s;
  }
  k *= h;
  g *= h;
  return std::pair{std::move(k), std::move(g)};
}

}  // namespace halfcalc
