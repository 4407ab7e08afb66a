#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mixdens {

/// Trapezoid rule on an increasing grid.
inline double trapezoid(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw std::invalid_argument("trapezoid: grid and values differ in length");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return acc;
}

inline std::vector<double> trapezoid_weights(std::span<const double> x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double half = 0.5 * (x[i] - x[i - 1]);
    w[i - 1] += half;
    w[i] += half;
  }
  return w;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count < 2) throw std::invalid_argument("linspace needs at least two points");
  std::vector<double> x(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) x[i] = lo + step * static_cast<double>(i);
  x.back() = hi;
  return x;
}

}  // namespace mixdens
