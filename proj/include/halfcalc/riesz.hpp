#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "halfcalc/errors.hpp"
#include "halfcalc/linalg.hpp"

namespace halfcalc {

// f_n(t) = sqrt(-2 lambda_n) e^{lambda_n t}, lambda_n real and negative.
struct ExponentialSystem {
  std::vector<double> lambdas;
  // lambda_n = -q r^n for n = 1..N when set; enables the analytic Carleson tail.
  std::optional<double> geometric_ratio;
  std::string tail_note;
};

inline ExponentialSystem make_exponential_system(std::vector<double> lambdas) {
  if (lambdas.empty()) throw domain_error("exponential system: empty sequence");
  for (double l : lambdas)
    if (!(l < 0.0) || !std::isfinite(l)) throw domain_error("exponential system: every lambda must be negative");
  ExponentialSystem s;
  s.lambdas = std::move(lambdas);
  if (s.lambdas.size() >= 3) {
    const double r = s.lambdas[1] / s.lambdas[0];
    bool geometric = r > 1.0;
    for (std::size_t i = 1; geometric && i < s.lambdas.size(); ++i)
      geometric = std::abs(s.lambdas[i] / s.lambdas[i - 1] - r) <= 1e-12 * r;
    if (geometric) s.geometric_ratio = r;
  }
  s.tail_note = s.geometric_ratio
                    ? "products corrected by the analytic tail over m > N (geometric ratio " +
                          std::to_string(*s.geometric_ratio) + ")"
                    : "products truncated to the listed exponents";
  return s;
}

// lambda_n = -q r^n, n = 1..count
inline ExponentialSystem geometric_system(double q, double r, std::size_t count) {
  if (!(q > 0.0) || !(r > 1.0)) throw domain_error("geometric_system: need q > 0 and r > 1");
  std::vector<double> l(count);
  for (std::size_t n = 0; n < count; ++n) l[n] = -q * std::pow(r, double(n + 1));
  auto s = make_exponential_system(std::move(l));
  s.geometric_ratio = r;
  return s;
}

struct CarlesonReport {
  std::vector<double> products;            // prod_{m != n, m <= N}
  std::vector<double> tail_factors;        // lower bound of prod_{m > N} (1 when not geometric)
  std::vector<double> corrected_products;  // products * tail_factors
  double infimum = 0.0;                    // over truncated products
  double corrected_infimum = 0.0;
  double threshold = 1e-4;
  bool verdict = false;  // corrected_infimum >= threshold
  std::string tail_note;
};

namespace detail {

// log prod_{k >= k0} (r^k - 1)/(r^k + 1) = -sum 2 artanh(r^-k), summed exactly for
// 200 terms; the rest is bounded by 2u/(1-u) <= 2u/(1-r^-1) per term, u = r^-k.
inline double geometric_log_tail(double r, std::size_t k0) {
  double s = 0.0;
  std::size_t k = k0;
  for (; k < k0 + 200; ++k) {
    const double u = std::pow(r, -double(k));
    if (u < 1e-300) return -s;
    s += 2.0 * std::atanh(u);
  }
  const double u = std::pow(r, -double(k));
  s += 2.0 * u / ((1.0 - u) * (1.0 - 1.0 / r));
  return -s;
}

}  // namespace detail

inline CarlesonReport carleson_products(const ExponentialSystem& sys, double threshold = 1e-4) {
  const auto& l = sys.lambdas;
  if (l.size() < 2) throw domain_error("carleson_products: need at least two exponents");
  const std::size_t n_count = l.size();
  CarlesonReport r;
  r.threshold = threshold;
  r.tail_note = sys.tail_note;
  for (std::size_t n = 0; n < n_count; ++n) {
    double log_p = 0.0;
    bool zero = false;
    for (std::size_t m = 0; m < n_count; ++m) {
      if (m == n) continue;
      const double f = std::abs((l[n] - l[m]) / (l[n] + l[m]));
      if (f == 0.0) {
        zero = true;
        break;
      }
      log_p += std::log(f);
    }
    const double p = zero ? 0.0 : std::exp(log_p);
    double tail = 1.0;
    if (sys.geometric_ratio) tail = std::exp(detail::geometric_log_tail(*sys.geometric_ratio, n_count - n));
    r.products.push_back(p);
    r.tail_factors.push_back(tail);
    r.corrected_products.push_back(p * tail);
  }
  r.infimum = *std::min_element(r.products.begin(), r.products.end());
  r.corrected_infimum = *std::min_element(r.corrected_products.begin(), r.corrected_products.end());
  r.verdict = r.corrected_infimum >= threshold;
  return r;
}

// G_ij = <f_i, f_j> = 2 sqrt(|l_i| |l_j|) / (|l_i| + |l_j|)
inline CMatrix gram_matrix(const ExponentialSystem& sys, std::size_t count = 0) {
  const std::size_t n = count ? std::min(count, sys.lambdas.size()) : sys.lambdas.size();
  CMatrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = -sys.lambdas[i], b = -sys.lambdas[j];
      g(i, j) = i == j ? 1.0 : 2.0 * std::sqrt(a * b) / (a + b);
    }
  return g;
}

struct RieszReport {
  std::vector<std::size_t> sizes;  // N = 2, 4, ..., truncation
  std::vector<double> lower;       // lambda_min(G_N)
  std::vector<double> upper;       // lambda_max(G_N)
  std::vector<double> ratios;      // lower[k] / lower[k-1]
  // Geometric extrapolation of the last decline when the log-ratios contract.
  std::optional<double> extrapolated_lower;
  double effective_lower = 0.0;  // value the verdict is based on
  double zero_threshold = 1e-13;
  bool verdict = false;
  std::string rule;
};

inline RieszReport riesz_bounds(const ExponentialSystem& sys) {
  const std::size_t total = sys.lambdas.size();
  if (total < 2) throw domain_error("riesz_bounds: need at least two exponents");
  RieszReport r;
  for (std::size_t n = 2; n <= total; n += 2) r.sizes.push_back(n);
  if (r.sizes.back() != total) r.sizes.push_back(total);
  for (std::size_t n : r.sizes) {
    const auto eig = hermitian_eig(gram_matrix(sys, n));
    r.lower.push_back(eig.values.front());
    r.upper.push_back(eig.values.back());
  }
  for (std::size_t k = 1; k < r.lower.size(); ++k)
    r.ratios.push_back(r.lower[k - 1] > 0.0 ? r.lower[k] / r.lower[k - 1] : 0.0);

  const double last = r.lower.back();
  r.rule = "positive iff effective_lower > 1e-13, where effective_lower is the last lambda_min when the "
           "last ratio of consecutive lambda_min is >= 0.9, the geometric extrapolation of the decline when "
           "the log-decrements contract (quotient <= 0.8), and 0 otherwise";
  if (r.ratios.empty() || r.ratios.back() >= 0.9) {
    r.effective_lower = last;
  } else if (r.ratios.size() >= 2 && r.ratios[r.ratios.size() - 2] > 0.0 && r.ratios.back() > 0.0) {
    const double d1 = -std::log(r.ratios[r.ratios.size() - 2]);
    const double d2 = -std::log(r.ratios.back());
    if (d1 > 0.0 && d2 <= 0.8 * d1) {
      const double q = d2 / d1;
      r.extrapolated_lower = last * std::exp(-d2 * q / (1.0 - q));
      r.effective_lower = *r.extrapolated_lower;
    }
  }
  r.verdict = r.effective_lower > r.zero_threshold;
  return r;
}

}  // namespace halfcalc
