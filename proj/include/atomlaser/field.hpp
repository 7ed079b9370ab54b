#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "atomlaser/errors.hpp"

namespace atomlaser {

using cplx = std::complex<double>;

// Uniform grid including both endpoints: x_i = x_min + i dx, dx = (x_max - x_min)/(n - 1).
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_points = 2;

  double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  double length() const { return x_max - x_min; }

  void validate(std::size_t min_points = 2) const {
    if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
      throw Error(ErrorKind::precondition, "grid requires finite x_max > x_min");
    }
    if (n_points < min_points) {
      throw Error(ErrorKind::precondition, "grid requires at least " + std::to_string(min_points) + " points");
    }
  }

  bool same_as(const Grid1D& other, double rel_tol = 1e-12) const {
    const double scale = std::max(std::fabs(x_max - x_min), 1e-300);
    return n_points == other.n_points && std::fabs(x_min - other.x_min) <= rel_tol * scale &&
           std::fabs(x_max - other.x_max) <= rel_tol * scale;
  }

  // Sub-grid of the points with x in [lo, hi], widened by `pad` points each side.
  Grid1D crop(double lo, double hi, std::size_t pad, std::size_t& first_index) const {
    const double h = dx();
    auto clamp_index = [&](double v) {
      const double idx = std::floor((v - x_min) / h);
      if (idx < 0) return std::size_t{0};
      if (idx > static_cast<double>(n_points - 1)) return n_points - 1;
      return static_cast<std::size_t>(idx);
    };
    std::size_t i0 = clamp_index(lo);
    std::size_t i1 = std::min(n_points - 1, clamp_index(hi) + 1);
    i0 = i0 > pad ? i0 - pad : 0;
    i1 = std::min(n_points - 1, i1 + pad);
    if (i1 <= i0) i1 = std::min(n_points - 1, i0 + 1);
    first_index = i0;
    return Grid1D{x(i0), x(i1), i1 - i0 + 1};
  }
};

inline std::vector<double> grid_points(const Grid1D& g) {
  std::vector<double> xs(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) xs[i] = g.x(i);
  return xs;
}

// Complex amplitude on a uniform grid (SI: m^-1/2).
struct ComplexField {
  Grid1D grid{};
  std::vector<cplx> samples{};
  double timestamp = 0.0;

  ComplexField() = default;
  ComplexField(Grid1D g, double t = 0.0) : grid(g), samples(g.n_points, cplx{}), timestamp(t) {}
  ComplexField(Grid1D g, std::vector<cplx> s, double t) : grid(g), samples(std::move(s)), timestamp(t) {
    if (samples.size() != grid.n_points) throw Error(ErrorKind::precondition, "sample count does not match grid");
  }

  std::size_t size() const { return samples.size(); }

  // Trapezoid-rule integral of |psi|^2.
  double norm_squared() const {
    const std::size_t n = samples.size();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (const auto& v : samples) sum += std::norm(v);
    sum -= 0.5 * (std::norm(samples.front()) + std::norm(samples.back()));
    return sum * grid.dx();
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : samples) m = std::max(m, std::abs(v));
    return m;
  }
};

// ||a - b|| / ||a|| for fields on the same grid (trapezoid weights).
inline double relative_l2_error(const ComplexField& a, const ComplexField& b) {
  if (!a.grid.same_as(b.grid)) throw Error(ErrorKind::grid_mismatch, "fields live on different grids");
  ComplexField diff(a.grid, a.timestamp);
  for (std::size_t i = 0; i < a.size(); ++i) diff.samples[i] = a.samples[i] - b.samples[i];
  const double ref = a.norm_squared();
  const double d = diff.norm_squared();
  if (ref == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(d / ref);
}

}  // namespace atomlaser
