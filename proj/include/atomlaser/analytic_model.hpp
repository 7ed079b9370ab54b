#pragma once

// Weak-coupling outcoupled beam: Psi_U(t) = int_0^t ds Omega(s) Phi(t - s),
// where Omega is the outcoupling rate function and Phi the freely falling
// trapped state. Two evaluation routes are provided: direct convolution over
// s with a closed-form Gaussian Phi, and the energy-basis route that loads
// each Airy eigenstate with a sinc-shaped amplitude.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "atomlaser/airy_basis.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/field.hpp"
#include "atomlaser/parallel.hpp"
#include "atomlaser/physconfig.hpp"
#include "atomlaser/quadrature.hpp"

namespace atomlaser {

inline constexpr cplx kI{0.0, 1.0};

struct RateTerm {
  double coupling = 0.0;  // effective Rabi rate, rad/s
  double omega_rf = 0.0;  // rad/s
  double theta = 0.0;
  Envelope envelope = BoxEnvelope{};
};

struct RateFunction {
  std::vector<RateTerm> components{};
  double E0 = 0.0;  // trapped-state energy, J
  double hbar = PhysicalConstants{}.hbar;

  // Residual angular frequency E0/hbar - omega_rf of one component.
  double detuning(const RateTerm& c) const { return E0 / hbar - c.omega_rf; }

  double start() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& c : components) s = std::min(s, envelope_start(c.envelope));
    return s;
  }
  double end() const {
    double e = -std::numeric_limits<double>::infinity();
    for (const auto& c : components) e = std::max(e, envelope_end(c.envelope));
    return e;
  }

  // Shortest beat period 2 pi / |w_i - w_j| over distinct tones; infinity for one tone.
  double beat_period() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < components.size(); ++i) {
      for (std::size_t j = i + 1; j < components.size(); ++j) {
        const double d = std::fabs(components[i].omega_rf - components[j].omega_rf);
        if (d > 0.0) best = std::min(best, kTwoPi / d);
      }
    }
    return best;
  }
};

// Default E0 is the non-interacting displaced-oscillator ground energy.
inline RateFunction make_rate_function(const Experiment& e, std::optional<double> E0 = std::nullopt) {
  RateFunction r;
  r.E0 = E0.value_or(e.E0());
  r.hbar = e.constants.hbar;
  for (const auto& rf : e.rf) r.components.push_back({effective_coupling(rf, e.species), rf.omega_rf, rf.theta, rf.envelope});
  return r;
}

// Omega(t) = sum_i -i W_i env_i(t) exp(-i[(E0/hbar - w_i) t + theta_i]), rad/s.
inline cplx rate_function_eval(const RateFunction& rate, double t) {
  if (!std::isfinite(t)) throw Error(ErrorKind::precondition, "rate function time must be finite");
  cplx sum{};
  for (const auto& c : rate.components) {
    const double env = envelope_value(c.envelope, t);
    if (env == 0.0) continue;
    sum += -kI * (c.coupling * env) * std::polar(1.0, -(rate.detuning(c) * t + c.theta));
  }
  return sum;
}

// Gaussian released at t_offset from width sigma0 around x0, then evolving
// under p^2/2m - m g x.
struct FreeFallGaussian {
  double sigma0 = 0.0;
  double x0 = 0.0;
  double t_offset = 0.0;
  double mass = 0.0;
  double g = 0.0;
  double hbar = PhysicalConstants{}.hbar;

  static FreeFallGaussian from_experiment(const Experiment& e, double t_offset = 0.0) {
    return {e.sigma0(), e.sag(), t_offset, e.species.mass, e.constants.g_earth, e.constants.hbar};
  }

  double center(double tau) const { return x0 + 0.5 * g * tau * tau; }
  double width(double tau) const {
    const double r = hbar * tau / (mass * sigma0 * sigma0);
    return sigma0 * std::sqrt(1.0 + r * r);
  }
  double velocity(double tau) const { return g * tau; }
};

namespace detail {

// Phi at elapsed time tau, decomposed as pre * exp(-(x - c)^2 * a + i k x):
// pre = (pi sigma0^2)^-1/4 q^-1/2 exp(-i m g^2 tau^3 / 6 hbar), a = 1/(2 sigma0^2 q),
// k = m g tau / hbar, q = 1 + i hbar tau / (m sigma0^2).
struct FreeFallCoefficients {
  cplx pre;
  cplx a;
  double c;
  double k;
  double width;
};

inline FreeFallCoefficients free_fall_coefficients(const FreeFallGaussian& wp, double tau) {
  const cplx q{1.0, wp.hbar * tau / (wp.mass * wp.sigma0 * wp.sigma0)};
  FreeFallCoefficients f;
  f.pre = std::pow(std::numbers::pi * wp.sigma0 * wp.sigma0, -0.25) / std::sqrt(q) *
          std::polar(1.0, -wp.mass * wp.g * wp.g * tau * tau * tau / (6.0 * wp.hbar));
  f.a = 1.0 / (2.0 * wp.sigma0 * wp.sigma0 * q);
  f.c = wp.center(tau);
  f.k = wp.mass * wp.g * tau / wp.hbar;
  f.width = wp.width(tau);
  return f;
}

inline cplx free_fall_value(const FreeFallCoefficients& f, double x) {
  const double d = x - f.c;
  return f.pre * std::exp(-d * d * f.a + kI * (f.k * x));
}

}  // namespace detail

// Full complex amplitude of the falling Gaussian, m^-1/2.
inline cplx free_fall_eval(const FreeFallGaussian& wp, double x, double t) {
  const double tau = t - wp.t_offset;
  if (!(tau >= 0.0)) throw Error(ErrorKind::precondition, "free_fall_eval requires t >= t_offset");
  return detail::free_fall_value(detail::free_fall_coefficients(wp, tau), x);
}

inline ComplexField free_fall_field(const FreeFallGaussian& wp, const Grid1D& grid, double t) {
  const double tau = t - wp.t_offset;
  if (!(tau >= 0.0)) throw Error(ErrorKind::precondition, "free_fall_field requires t >= t_offset");
  const auto f = detail::free_fall_coefficients(wp, tau);
  ComplexField out(grid, t);
  for (std::size_t i = 0; i < grid.n_points; ++i) out.samples[i] = detail::free_fall_value(f, grid.x(i));
  return out;
}

// Passing time of the falling packet at a fixed point, hbar / (m g sigma0).
inline double smoothing_time(double sigma0, const AtomSpecies& species, const PhysicalConstants& c) {
  if (!(sigma0 > 0)) throw Error(ErrorKind::precondition, "sigma0 must be > 0");
  return c.hbar / (species.mass * c.g_earth * sigma0);
}

struct ConvolutionOptions {
  double node_spacing = 0.0;           // s; 0 selects min(beat period, tau_s) / 40
  double overflow_tolerance = 1e-6;    // edge amplitude relative to max
  double negligible_exponent = 60.0;   // skip Gaussian tails below exp(-60)
  unsigned threads = default_thread_count();
};

namespace detail {

inline double resolution_scale(const RateFunction& rate, const FreeFallGaussian& wp) {
  const double tau_s = wp.hbar / (wp.mass * wp.g * wp.sigma0);
  return std::min(rate.beat_period(), tau_s);
}

inline void require_no_overflow(const ComplexField& f, double tolerance, const char* what) {
  const double peak = f.max_abs();
  if (peak == 0.0) return;
  const double edge = std::max(std::abs(f.samples.front()), std::abs(f.samples.back()));
  if (edge > tolerance * peak) {
    throw Error(ErrorKind::grid_overflow, std::string(what) + ": amplitude at the grid edge is " +
                                              std::to_string(edge / peak) + " of the maximum");
  }
}

// Quadrature nodes in s over [0, t], split at every envelope edge so that box
// discontinuities never fall inside a panel.
inline std::vector<QuadratureNode> convolution_nodes(const RateFunction& rate, double t, double spacing) {
  std::vector<double> breaks{0.0, t};
  for (const auto& c : rate.components) {
    breaks.push_back(envelope_start(c.envelope));
    breaks.push_back(envelope_end(c.envelope));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<QuadratureNode> nodes;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    const double a = std::max(0.0, breaks[j]);
    const double b = std::min(t, breaks[j + 1]);
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b);
    bool active = false;
    for (const auto& c : rate.components) active = active || envelope_value(c.envelope, mid) != 0.0;
    if (!active) continue;
    auto panel = gauss_legendre_panels(a, b, 8.0 * spacing);
    nodes.insert(nodes.end(), panel.begin(), panel.end());
  }
  return nodes;
}

}  // namespace detail

// Psi_U(x, t) on x_grid by quadrature over the outcoupling time s.
inline ComplexField outcoupled_convolution(const RateFunction& rate, const FreeFallGaussian& wp, double t,
                                           const Grid1D& x_grid, const ConvolutionOptions& opt = {}) {
  if (!(t >= 0.0)) throw Error(ErrorKind::precondition, "outcoupled_convolution requires t >= 0");
  x_grid.validate();
  const double scale = detail::resolution_scale(rate, wp);
  double spacing = opt.node_spacing;
  if (spacing <= 0.0) {
    spacing = scale / 40.0;
  } else if (spacing > scale / 20.0) {
    throw Error(ErrorKind::unresolved_beat, "quadrature step " + std::to_string(spacing) +
                                                " s exceeds 1/20 of the shortest beat/smoothing period " +
                                                std::to_string(scale) + " s");
  }
  ComplexField out(x_grid, t);
  const auto nodes = detail::convolution_nodes(rate, t, spacing);
  if (nodes.empty()) return out;

  struct NodeTerm {
    detail::FreeFallCoefficients f;
    cplx weight;
    double reach;
  };
  std::vector<NodeTerm> terms;
  terms.reserve(nodes.size());
  for (const auto& n : nodes) {
    const cplx omega = rate_function_eval(rate, n.position);
    if (omega == cplx{}) continue;
    const auto f = detail::free_fall_coefficients(wp, (t - wp.t_offset) - n.position);
    terms.push_back({f, n.weight * omega, std::sqrt(2.0 * opt.negligible_exponent) * f.width});
  }

  const double dx = x_grid.dx();
  const std::size_t chunk = 256;
  const std::size_t chunks = (x_grid.n_points + chunk - 1) / chunk;
  parallel_for(
      chunks,
      [&](std::size_t ci) {
        const std::size_t begin = ci * chunk;
        const std::size_t end = std::min(x_grid.n_points, begin + chunk);
        const double x_lo = x_grid.x(begin);
        const double x_hi = x_grid.x(end - 1);
        for (const auto& term : terms) {
          if (term.f.c + term.reach < x_lo || term.f.c - term.reach > x_hi) continue;
          const double lo = std::max(x_lo, term.f.c - term.reach);
          const double hi = std::min(x_hi, term.f.c + term.reach);
          const auto i0 = begin + static_cast<std::size_t>(std::max(0.0, std::floor((lo - x_lo) / dx)));
          const auto i1 = std::min(end - 1, begin + static_cast<std::size_t>(std::ceil((hi - x_lo) / dx)));
          const cplx pre = term.weight * term.f.pre;
          for (std::size_t i = i0; i <= i1; ++i) {
            const double x = x_grid.x(i);
            const double d = x - term.f.c;
            out.samples[i] += pre * std::exp(-d * d * term.f.a + kI * (term.f.k * x));
          }
        }
      },
      opt.threads);
  detail::require_no_overflow(out, opt.overflow_tolerance, "outcoupled_convolution");
  return out;
}

struct SpectralRouteOptions {
  bool counter_rotating = false;  // also load the E0 + hbar w_rf resonance
  double samples_per_period = 8.0;
  double overflow_tolerance = 1e-6;
  std::size_t envelope_nodes_per_period = 40;  // quadrature for non-box envelopes
  unsigned threads = default_thread_count();
};

namespace detail {

// int_a^b exp(-i kappa s) ds.
inline cplx box_integral(double kappa, double a, double b) {
  const double half = 0.5 * kappa * (b - a);
  const double sinc = std::fabs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  return std::polar((b - a) * sinc, -0.5 * kappa * (a + b));
}

// int_a^b env(s) exp(-i kappa s) ds by Gauss-Legendre panels.
inline cplx envelope_integral(const Envelope& env, double kappa, double a, double b, std::size_t per_period) {
  const double period = std::fabs(kappa) > 0.0 ? kTwoPi / std::fabs(kappa) : (b - a);
  const double panel = std::min(b - a, 8.0 * period / static_cast<double>(per_period));
  cplx sum{};
  for (const auto& n : gauss_legendre_panels(a, b, panel)) {
    sum += n.weight * envelope_value(env, n.position) * std::polar(1.0, -kappa * n.position);
  }
  return sum;
}

}  // namespace detail

// c_E(t) e^{+iEt/hbar}: the time integral int_0^t Omega(s) e^{iEs/hbar} ds times f(E).
// Multiplying by e^{-iEt/hbar} gives the Schrodinger-picture coefficient.
inline EnergySpectrum outcoupled_coefficients(const RateFunction& rate, const EnergySpectrum& phi0, double t,
                                              const SpectralRouteOptions& opt = {}) {
  if (!(t >= 0.0)) throw Error(ErrorKind::precondition, "outcoupled_spectral requires t >= 0");
  if (phi0.size() < 2) throw Error(ErrorKind::precondition, "source spectrum needs >= 2 energies");
  for (const auto& c : rate.components) {
    const double duration = envelope_duration(c.envelope);
    const double limit = kTwoPi * rate.hbar / (10.0 * duration);
    if (phi0.grid_spacing >= limit) {
      throw Error(ErrorKind::unresolved_sinc, "energy spacing " + std::to_string(phi0.grid_spacing) +
                                                  " J does not resolve the sinc lobe h/(10 T) = " + std::to_string(limit) +
                                                  " J");
    }
  }
  EnergySpectrum c = phi0;
  parallel_for(
      phi0.size(),
      [&](std::size_t k) {
        const double energy = phi0.energies[k] / rate.hbar;
        cplx sum{};
        for (const auto& comp : rate.components) {
          const double a = std::max(0.0, envelope_start(comp.envelope));
          const double b = std::min(t, envelope_end(comp.envelope));
          if (!(b > a)) continue;
          const double kappa = rate.detuning(comp) - energy;
          const cplx time_part = is_box(comp.envelope)
                                     ? detail::box_integral(kappa, a, b)
                                     : detail::envelope_integral(comp.envelope, kappa, a, b, opt.envelope_nodes_per_period);
          sum += -kI * comp.coupling * std::polar(1.0, -comp.theta) * time_part;
          if (opt.counter_rotating) {
            const double kappa_cr = rate.E0 / rate.hbar + comp.omega_rf - energy;
            const cplx cr = is_box(comp.envelope)
                                ? detail::box_integral(kappa_cr, a, b)
                                : detail::envelope_integral(comp.envelope, kappa_cr, a, b, opt.envelope_nodes_per_period);
            sum += -kI * comp.coupling * std::polar(1.0, comp.theta) * cr;
          }
        }
        c.amplitudes[k] = phi0.amplitudes[k] * sum;
      },
      opt.threads);
  return c;
}

// Psi_U(x, t) = int dE f(E) e^{-iEt/hbar} [int_0^t Omega(s) e^{iEs/hbar} ds] psi_E(x).
inline ComplexField outcoupled_spectral(const RateFunction& rate, const EnergySpectrum& phi0, double t,
                                        const Grid1D& x_grid, const AtomSpecies& species, const PhysicalConstants& c,
                                        const SpectralRouteOptions& opt = {}) {
  x_grid.validate();
  auto coeff = outcoupled_coefficients(rate, phi0, t, opt);
  // Nyquist in E: Airy phase sqrt(-z) dE/(mg l) plus the time phase t dE/hbar.
  const auto deepest = make_eigenstate(coeff.energies.back(), species, c);
  const double z = deepest.argument(x_grid.x_max);
  const double step_phase =
      (std::sqrt(std::max(0.0, -z)) / (deepest.slope_mg * deepest.length_l) + t / c.hbar) * coeff.grid_spacing;
  if (step_phase > kTwoPi / opt.samples_per_period) {
    throw Error(ErrorKind::unconverged_quadrature,
                "energy spacing under-resolves the outcoupled state at t = " + std::to_string(t) + " s");
  }
  for (std::size_t k = 0; k < coeff.size(); ++k) {
    coeff.amplitudes[k] *= std::polar(1.0, -coeff.energies[k] * t / c.hbar);
  }
  OverlapOptions inverse_opt;
  inverse_opt.samples_per_period = 0.0;  // resolution checked above with the time phase included
  inverse_opt.threads = opt.threads;
  auto out = inverse_transform(coeff, x_grid, species, c, t, inverse_opt);
  detail::require_no_overflow(out, opt.overflow_tolerance, "outcoupled_spectral");
  return out;
}

// ||Psi_U(t)||^2 from the energy coefficients (Parseval), no position grid needed.
inline double implied_outcoupled_norm(const RateFunction& rate, const EnergySpectrum& phi0, double t,
                                      const SpectralRouteOptions& opt = {}) {
  return outcoupled_coefficients(rate, phi0, t, opt).norm_squared();
}

inline constexpr double kWeakCouplingLimit = 0.10;

// Warns when the outcoupled fraction undermines the intact-trap assumption.
inline bool check_weak_coupling(double outcoupled_norm, double limit = kWeakCouplingLimit) {
  if (outcoupled_norm > limit) {
    warn("weak-coupling", "outcoupled norm " + std::to_string(outcoupled_norm) + " exceeds " + std::to_string(limit) +
                              "; the intact-trap assumption is not self-consistent");
    return false;
  }
  return true;
}

// Untrapped-component snapshots from either engine.
struct StreamResult {
  std::vector<double> times{};
  std::vector<ComplexField> fields{};
  std::vector<RfComponent> rf{};
  std::string engine{};

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != fields.size()) throw Error(ErrorKind::precondition, "stream times and fields differ in count");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw Error(ErrorKind::precondition, "stream times must be strictly increasing");
      if (!fields[i].grid.same_as(fields[0].grid)) throw Error(ErrorKind::grid_mismatch, "stream fields use different grids");
    }
  }

  void push(ComplexField f) {
    times.push_back(f.timestamp);
    fields.push_back(std::move(f));
  }
};

// Convolution-route snapshots of e.rf at the given times. A window that cuts
// through the stream (a detector probe) needs overflow_tolerance = infinity.
inline StreamResult analytic_stream(const Experiment& e, const std::vector<double>& times, const Grid1D& grid,
                                    const ConvolutionOptions& opt = {}) {
  const auto rate = make_rate_function(e);
  const auto wp = FreeFallGaussian::from_experiment(e);
  StreamResult out;
  out.engine = "analytic";
  out.rf = e.rf;
  for (double t : times) out.push(outcoupled_convolution(rate, wp, t, grid, opt));
  return out;
}

// Pointwise complex sum of streams sharing grid and time stamps.
inline StreamResult superpose_streams(const std::vector<StreamResult>& streams) {
  if (streams.empty()) throw Error(ErrorKind::precondition, "superpose_streams needs at least one stream");
  StreamResult out = streams.front();
  for (std::size_t s = 1; s < streams.size(); ++s) {
    const auto& other = streams[s];
    if (other.times.size() != out.times.size()) throw Error(ErrorKind::grid_mismatch, "streams have different snapshot counts");
    for (std::size_t i = 0; i < out.times.size(); ++i) {
      if (other.times[i] != out.times[i]) throw Error(ErrorKind::grid_mismatch, "streams have different time stamps");
      if (!other.fields[i].grid.same_as(out.fields[i].grid)) throw Error(ErrorKind::grid_mismatch, "streams use different grids");
      for (std::size_t k = 0; k < out.fields[i].size(); ++k) out.fields[i].samples[k] += other.fields[i].samples[k];
    }
    out.rf.insert(out.rf.end(), other.rf.begin(), other.rf.end());
    if (out.engine != other.engine) out.engine += "+" + other.engine;
  }
  return out;
}

// Reduces an angle to (-pi, pi].
inline double wrap_phase(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

// Relative phase of the circular components driving the transition. The
// projections polarization_factor are real and positive, so only theta
// contributes.
inline double relative_phase(const RfComponent& f1, const RfComponent& f2) {
  if (!(f1.polarization_factor > 0.0) || !(f2.polarization_factor > 0.0)) {
    throw Error(ErrorKind::zero_projection, "rf component has no projection on the coupling polarization");
  }
  return wrap_phase(f1.theta - f2.theta);
}

}  // namespace atomlaser
