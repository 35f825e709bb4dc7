#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "halfcalc/functions.hpp"
#include "halfcalc/semigroup.hpp"

namespace halfcalc {

struct NamedSymbol {
  std::string name;
  HalfPlaneFunction symbol;
};

struct NamedGenerator {
  std::string name;
  Generator generator;
};

inline Generator golden_diagonal() { return make_diagonal_generator({-1.0, -2.0}); }

// Sheared spectral form: kappa(V) about 9.5, ||e^A|| about 2.8 > 1.
inline Generator golden_nonnormal() {
  CMatrix v{{1.0, 1.5, 1.0, 0.0}, {0.0, 1.0, 1.5, 0.5}, {0.0, 0.0, 1.0, 1.2}, {0.0, 0.0, 0.0, 1.0}};
  auto s = make_spectral_form({-0.5, cplx(-1.0, 2.0), cplx(-1.0, -2.0), -3.0}, std::move(v));
  CMatrix a = reconstruct(s);
  return make_generator(std::move(a), std::move(s));
}

inline std::vector<NamedGenerator> golden_generators() {
  return {{"diag(-1,-2)", golden_diagonal()}, {"nonnormal4", golden_nonnormal()}};
}

inline std::vector<NamedSymbol> golden_symbols() {
  return {{"g_mu(1)", resolvent_kernel(1.0)},
          {"g_mu(2+i)", resolvent_kernel(cplx(2.0, 1.0))},
          {"g_t(0.25)", exponential_kernel(0.25)},
          {"g_t(0.5)", exponential_kernel(0.5)},
          {"g_t(1)", exponential_kernel(1.0)},
          {"e", regularizer()},
          {"(2-z)^-2", rational(1.0, {}, {2.0, 2.0})},
          {"allpass", rational(1.0, {-1.0}, {1.0})},
          {"one", identity_symbol()}};
}

struct GoldenPair {
  std::string symbol;
  std::string generator;
};

inline std::vector<GoldenPair> golden_pairs() {
  return {{"g_mu(1)", "diag(-1,-2)"},  {"g_mu(2+i)", "nonnormal4"}, {"e", "nonnormal4"},
          {"(2-z)^-2", "diag(-1,-2)"}, {"g_t(0.5)", "nonnormal4"},  {"allpass", "diag(-1,-2)"}};
}

inline HalfPlaneFunction golden_symbol(const std::string& name) {
  for (auto& s : golden_symbols())
    if (s.name == name) return s.symbol;
  throw domain_error("unknown golden symbol '" + name + "'");
}

inline Generator golden_generator(const std::string& name) {
  for (auto& g : golden_generators())
    if (g.name == name) return g.generator;
  throw domain_error("unknown golden generator '" + name + "'");
}

// U diag(lambda) U^H with U unitary (Gram-Schmidt on a Gaussian matrix),
// Re lambda in [-3, -0.2], Im lambda in [-2, 2].
inline Generator random_stable_normal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> re(-3.0, -0.2), im(-2.0, 2.0);
  CMatrix u(n, n);
  for (auto& z : u.entries()) {
    const double a = nd(rng);
    z = cplx(a, nd(rng));
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        cplx p = 0.0;
        for (std::size_t i = 0; i < n; ++i) p += std::conj(u(i, k)) * u(i, j);
        for (std::size_t i = 0; i < n; ++i) u(i, j) -= p * u(i, k);
      }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += std::norm(u(i, j));
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < n; ++i) u(i, j) /= nrm;
  }
  CVector eig(n);
  for (auto& l : eig) {
    const double a = re(rng);
    l = cplx(a, im(rng));
  }
  SpectralForm s{eig, u, u.adjoint()};
  CMatrix a = reconstruct(s);
  return make_generator(std::move(a), std::move(s));
}

}  // namespace halfcalc
