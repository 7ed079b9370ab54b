#pragma once

// Continuum eigenstates of the gravitational potential -m g x and the
// transforms between position space and this energy basis.
//
// With the fall pointing toward +x the eigenfunction of energy E is
// psi_E(x) = N Ai(-(x + E/mg)/l), N = 1/(l sqrt(mg)), delta-normalized in E.
// Its classical turning point is x = -E/mg; the oscillatory side is x > -E/mg.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "atomlaser/airy.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/field.hpp"
#include "atomlaser/parallel.hpp"
#include "atomlaser/physconfig.hpp"
#include "atomlaser/quadrature.hpp"

namespace atomlaser {

struct GeneralizedEigenstate {
  double energy_E = 0.0;         // J
  double normalization_N = 0.0;  // (J m)^-1/2
  double length_l = 0.0;         // m
  double slope_mg = 0.0;         // N

  // Dimensionless Airy argument at position x.
  double argument(double x) const { return -(x + energy_E / slope_mg) / length_l; }
  double turning_point() const { return -energy_E / slope_mg; }
};

inline GeneralizedEigenstate make_eigenstate(double energy, const AtomSpecies& species, const PhysicalConstants& c) {
  const NaturalUnits u = derive_natural_units(species, c);
  GeneralizedEigenstate s;
  s.energy_E = energy;
  s.length_l = u.length_l;
  s.slope_mg = species.mass * c.g_earth;
  s.normalization_N = 1.0 / (s.length_l * std::sqrt(s.slope_mg));
  return s;
}

inline double eigenstate_eval(const GeneralizedEigenstate& state, double x) {
  return state.normalization_N * airy_ai(state.argument(x));
}

struct OverlapOptions {
  double samples_per_period = 8.0;  // resolution guard on the local Airy period
  double negligible = 1e-8;         // |phi| below this fraction of max is ignored by the guard
  unsigned threads = default_thread_count();
};

namespace detail {

// Shortest local Airy wavelength (m) over [x_lo, x_hi] for a state.
inline double shortest_airy_wavelength(const GeneralizedEigenstate& s, double x_lo, double x_hi) {
  const double z = std::min(s.argument(x_lo), s.argument(x_hi));
  if (z >= -1.0) return 2.0 * std::numbers::pi * s.length_l;  // no oscillation deeper than the first lobe
  return 2.0 * std::numbers::pi * s.length_l / std::sqrt(-z);
}

struct SupportWindow {
  std::size_t first = 0;
  std::size_t last = 0;
};

inline SupportWindow support_window(const ComplexField& phi, double fraction) {
  const double peak = phi.max_abs();
  SupportWindow w{0, phi.size() - 1};
  if (peak == 0.0) return w;
  const double cut = fraction * peak;
  while (w.first < w.last && std::abs(phi.samples[w.first]) <= cut) ++w.first;
  while (w.last > w.first && std::abs(phi.samples[w.last]) <= cut) --w.last;
  return w;
}

inline void require_decay_at_edges(const ComplexField& phi, double fraction) {
  const double peak = phi.max_abs();
  if (peak == 0.0) return;
  if (std::abs(phi.samples.front()) > fraction * peak || std::abs(phi.samples.back()) > fraction * peak) {
    throw Error(ErrorKind::precondition, "field does not decay below " + std::to_string(fraction) +
                                             " of its maximum at the grid ends");
  }
}

inline void require_resolved(const ComplexField& phi, const GeneralizedEigenstate& s, const SupportWindow& w,
                             double samples_per_period) {
  const double lambda = shortest_airy_wavelength(s, phi.grid.x(w.first), phi.grid.x(w.last));
  if (lambda < samples_per_period * phi.grid.dx()) {
    throw Error(ErrorKind::unconverged_quadrature,
                "Airy period " + std::to_string(lambda) + " m spans fewer than " +
                    std::to_string(samples_per_period) + " grid spacings at E = " + std::to_string(s.energy_E) + " J");
  }
}

// Trapezoid sum of psi_E * phi over [first, last] (the field is negligible outside).
inline cplx overlap_sum(const ComplexField& phi, const GeneralizedEigenstate& s, std::size_t first, std::size_t last) {
  const double dx = phi.grid.dx();
  cplx sum{};
  for (std::size_t i = first; i <= last; ++i) {
    sum += airy_ai(s.argument(phi.grid.x(i))) * phi.samples[i] * trapezoid_weight(i, phi.size());
  }
  return sum * (s.normalization_N * dx);
}

}  // namespace detail

// <psi_E | phi> by the trapezoid rule on phi's grid, J^-1/2.
inline cplx overlap_numeric(const ComplexField& phi, const GeneralizedEigenstate& state, const OverlapOptions& opt = {}) {
  phi.grid.validate();
  detail::require_decay_at_edges(phi, opt.negligible);
  const auto w = detail::support_window(phi, opt.negligible);
  detail::require_resolved(phi, state, w, opt.samples_per_period);
  const auto all = detail::support_window(phi, 0.0);
  return detail::overlap_sum(phi, state, all.first, all.last);
}

// Closed-form Gaussian approximation [pi (mg sigma)^2]^-1/4 exp(-(E + mg x0)^2 / 2 (mg sigma)^2).
inline double overlap_gaussian_approx(double sigma, double x0, double energy, const AtomSpecies& species,
                                      const PhysicalConstants& c) {
  const NaturalUnits u = derive_natural_units(species, c);
  if (sigma < 5.0 * u.length_l) {
    warn("approximation-validity", "overlap_gaussian_approx: sigma = " + std::to_string(sigma) +
                                       " m is below 5 l = " + std::to_string(5.0 * u.length_l) + " m");
  }
  const double mg = species.mass * c.g_earth;
  const double width = mg * sigma;
  const double d = energy + mg * x0;
  return std::pow(std::numbers::pi * width * width, -0.25) * std::exp(-d * d / (2.0 * width * width));
}

// Uniform energy grid including both endpoints.
struct EnergyGrid {
  double E_min = 0.0;
  double E_max = 0.0;
  std::size_t n_points = 0;

  double spacing() const { return (E_max - E_min) / static_cast<double>(n_points - 1); }
  double energy(std::size_t i) const { return E_min + static_cast<double>(i) * spacing(); }

  void validate() const {
    if (!(E_max > E_min) || n_points < 2) throw Error(ErrorKind::precondition, "energy grid needs E_max > E_min and >= 2 points");
  }
};

// Centered on the overlap peak -mg x0, spanning +-half_width_sigmas mg sigma0.
inline EnergyGrid default_energy_grid(const Experiment& e, double half_width_sigmas = 8.0, std::size_t n_points = 4096) {
  const double mg = e.species.mass * e.constants.g_earth;
  const double center = -mg * e.sag();
  const double half = half_width_sigmas * mg * e.sigma0();
  return EnergyGrid{center - half, center + half, n_points};
}

struct EnergySpectrum {
  std::vector<double> energies{};
  std::vector<cplx> amplitudes{};  // J^-1/2
  double grid_spacing = 0.0;

  EnergySpectrum() = default;
  explicit EnergySpectrum(const EnergyGrid& g) : energies(g.n_points), amplitudes(g.n_points), grid_spacing(g.spacing()) {
    for (std::size_t i = 0; i < g.n_points; ++i) energies[i] = g.energy(i);
  }

  std::size_t size() const { return energies.size(); }

  // Trapezoid integral of |f(E)|^2 dE.
  double norm_squared() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < amplitudes.size(); ++i) sum += std::norm(amplitudes[i]) * trapezoid_weight(i, size());
    return sum * grid_spacing;
  }

  std::size_t peak_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < amplitudes.size(); ++i) {
      if (std::abs(amplitudes[i]) > std::abs(amplitudes[best])) best = i;
    }
    return best;
  }

  double peak_abs() const { return amplitudes.empty() ? 0.0 : std::abs(amplitudes[peak_index()]); }
};

struct SpectralOptions {
  OverlapOptions overlap{};
  double truncation_tolerance = 1e-6;  // boundary |f| relative to the peak
};

namespace detail {
inline void require_untruncated(const EnergySpectrum& s, double tolerance) {
  const double peak = s.peak_abs();
  if (peak == 0.0) return;
  const double edge = std::max(std::abs(s.amplitudes.front()), std::abs(s.amplitudes.back()));
  if (edge > tolerance * peak) {
    throw Error(ErrorKind::truncated_spectrum, "spectrum boundary amplitude is " + std::to_string(edge / peak) +
                                                   " of the peak (limit " + std::to_string(tolerance) + ")");
  }
}
}  // namespace detail

// f(E) = <psi_E | phi> on every point of the energy grid.
inline EnergySpectrum spectral_transform(const ComplexField& phi, const EnergyGrid& grid, const AtomSpecies& species,
                                         const PhysicalConstants& c, const SpectralOptions& opt = {}) {
  phi.grid.validate();
  grid.validate();
  EnergySpectrum out(grid);
  if (phi.max_abs() == 0.0) return out;
  detail::require_decay_at_edges(phi, opt.overlap.negligible);
  const auto guard = detail::support_window(phi, opt.overlap.negligible);
  // Samples below 1e-17 of the peak cannot change a double-precision sum.
  const auto sum_window = detail::support_window(phi, 1e-17);
  // The deepest oscillation on the grid belongs to the highest energy.
  detail::require_resolved(phi, make_eigenstate(grid.E_max, species, c), guard, opt.overlap.samples_per_period);
  parallel_for(
      grid.n_points,
      [&](std::size_t i) {
        out.amplitudes[i] = detail::overlap_sum(phi, make_eigenstate(grid.energy(i), species, c), sum_window.first,
                                                sum_window.last);
      },
      opt.overlap.threads);
  detail::require_untruncated(out, opt.truncation_tolerance);
  return out;
}

// phi(x) = int dE f(E) psi_E(x), trapezoid rule in E. Throws
// unconverged-quadrature when the energy spacing does not resolve the Airy
// oscillation in E at some requested x.
inline ComplexField inverse_transform(const EnergySpectrum& spectrum, const Grid1D& x_grid, const AtomSpecies& species,
                                      const PhysicalConstants& c, double timestamp = 0.0,
                                      const OverlapOptions& opt = {}) {
  x_grid.validate();
  if (spectrum.size() < 2) throw Error(ErrorKind::precondition, "spectrum needs >= 2 energies");
  ComplexField out(x_grid, timestamp);
  const auto low = make_eigenstate(spectrum.energies.front(), species, c);
  const auto high = make_eigenstate(spectrum.energies.back(), species, c);
  // Phase advance of Ai(-(x + E/mg)/l) per energy step is sqrt(-z) dE / (mg l).
  const double z_deep = std::min(high.argument(x_grid.x_max), low.argument(x_grid.x_max));
  const double phase_step = std::sqrt(std::max(0.0, -z_deep)) * spectrum.grid_spacing / (high.slope_mg * high.length_l);
  if (phase_step > 2.0 * std::numbers::pi / opt.samples_per_period) {
    throw Error(ErrorKind::unconverged_quadrature, "energy spacing under-resolves the Airy oscillation at x = " +
                                                       std::to_string(x_grid.x_max) + " m");
  }
  std::vector<cplx> weighted(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    weighted[k] = spectrum.amplitudes[k] * (trapezoid_weight(k, spectrum.size()) * spectrum.grid_spacing);
  }
  parallel_for(
      x_grid.n_points,
      [&](std::size_t i) {
        const double x = x_grid.x(i);
        cplx sum{};
        for (std::size_t k = 0; k < spectrum.size(); ++k) {
          if (weighted[k] == cplx{}) continue;
          sum += weighted[k] * airy_ai(-(x + spectrum.energies[k] / low.slope_mg) / low.length_l);
        }
        out.samples[i] = sum * low.normalization_N;
      },
      opt.threads);
  return out;
}

// Normalized Gaussian (pi sigma^2)^-1/4 exp(-(x - x0)^2 / 2 sigma^2) sampled on a grid.
inline ComplexField gaussian_field(const Grid1D& grid, double sigma, double center, double timestamp = 0.0) {
  ComplexField f(grid, timestamp);
  const double amp = std::pow(std::numbers::pi * sigma * sigma, -0.25);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double d = (grid.x(i) - center) / sigma;
    f.samples[i] = amp * std::exp(-0.5 * d * d);
  }
  return f;
}

}  // namespace atomlaser
