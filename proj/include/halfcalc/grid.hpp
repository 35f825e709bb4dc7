#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "halfcalc/errors.hpp"
#include "halfcalc/linalg.hpp"

namespace halfcalc {

// Uniform nodes t_k = k * step, k = 0..count-1, standing in for (0, inf).
struct TimeGrid {
  double step = 1.0 / 128.0;
  std::size_t count = std::size_t{1} << 14;
  double tail_tolerance = 1e-10;

  double horizon() const { return step * double(count); }
  double node(std::size_t k) const { return step * double(k); }

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw domain_error("TimeGrid: step must be > 0");
    if (count < 2 || !std::has_single_bit(count))
      throw shape_error("TimeGrid: count must be a power of two >= 2");
  }

  // True when e^{omega T} is below the recorded tail tolerance.
  bool covers_decay(double omega) const {
    return omega < 0.0 && std::exp(omega * horizon()) <= tail_tolerance;
  }

  bool operator==(const TimeGrid&) const = default;
};

inline constexpr double default_grid_step = 1.0 / 128.0;
inline constexpr std::size_t default_grid_count = std::size_t{1} << 14;

// N = 2^14 and step 1/128, with N doubled until e^{omega T} <= tail.
inline TimeGrid default_grid(double omega, double tail = 1e-10) {
  if (!(omega < 0.0)) throw instability_error("default_grid: growth bound must be negative");
  TimeGrid g{default_grid_step, default_grid_count, tail};
  const double needed = std::log(1.0 / tail) / -omega;
  while (g.horizon() < needed) {
    if (g.count >= (std::size_t{1} << 22))
      throw size_error("default_grid: decay too slow for a 2^22-point grid");
    g.count *= 2;
  }
  return g;
}

// Same horizon, half the step.
inline TimeGrid refine(const TimeGrid& g) { return {g.step / 2.0, g.count * 2, g.tail_tolerance}; }

struct SampledSignal {
  TimeGrid grid;
  CVector values;
  std::vector<std::string> warnings;

  SampledSignal() = default;
  SampledSignal(TimeGrid g, CVector v) : grid(g), values(std::move(v)) {
    grid.validate();
    if (values.size() != grid.count) throw shape_error("SampledSignal: length != grid count");
  }

  // sqrt(step * sum |f_k|^2)
  double l2_norm() const {
    double s = 0.0;
    for (const auto& z : values) s += std::norm(z);
    return std::sqrt(grid.step * s);
  }

  double last_quarter_energy_fraction() const {
    double total = 0.0, tail = 0.0;
    const std::size_t start = values.size() - values.size() / 4;
    for (std::size_t k = 0; k < values.size(); ++k) {
      total += std::norm(values[k]);
      if (k >= start) tail += std::norm(values[k]);
    }
    return total > 0.0 ? tail / total : 0.0;
  }

  bool truncation_flagged() const { return last_quarter_energy_fraction() > 1e-6; }
};

inline SampledSignal sample(const TimeGrid& grid, auto&& fn) {
  grid.validate();
  CVector v(grid.count);
  for (std::size_t k = 0; k < grid.count; ++k) v[k] = fn(grid.node(k));
  return SampledSignal(grid, std::move(v));
}

inline SampledSignal operator-(const SampledSignal& a, const SampledSignal& b) {
  if (!(a.grid == b.grid)) throw shape_error("SampledSignal: grid mismatch");
  CVector v(a.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values[k] - b.values[k];
  return SampledSignal(a.grid, std::move(v));
}

}  // namespace halfcalc
