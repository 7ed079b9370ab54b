#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "atomlaser/analytic_model.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/fft.hpp"
#include "atomlaser/field.hpp"
#include "atomlaser/physconfig.hpp"

namespace atomlaser {

// Spinor storage index for magnetic sublevel M in {-1, 0, +1}.
inline std::size_t sublevel_index(int M) {
  if (M < -1 || M > 1) throw Error(ErrorKind::unsupported_sublevel, "M_F = " + std::to_string(M) + " outside F = 1");
  return static_cast<std::size_t>(M + 1);
}

inline void require_spin_one(const AtomSpecies& species) {
  if (species.F != 1) throw Error(ErrorKind::unsupported_sublevel, "the three-state solver supports F = 1 only");
}

// sgn(g_F) M (m w_x^2 x^2 / 2 + hbar w_bias) - m g x, in joules.
inline double potentials(int M, double x, const TrapConfig& trap, const AtomSpecies& species,
                         const PhysicalConstants& c) {
  require_spin_one(species);
  sublevel_index(M);
  const double zeeman = 0.5 * species.mass * trap.omega_x * trap.omega_x * x * x + c.hbar * trap.omega_bias;
  return sign_of(species.g_F) * M * zeeman - species.mass * c.g_earth * x;
}

// Sublevels in the trapped, untrapped and anti-trapped roles.
inline int trapped_sublevel(const AtomSpecies& s) { return sign_of(s.g_F); }
inline int anti_trapped_sublevel(const AtomSpecies& s) { return -sign_of(s.g_F); }

using Matrix3 = std::array<std::array<cplx, 3>, 3>;

// Which rf transitions are switched on: trapped <-> untrapped (lower) and
// untrapped <-> anti-trapped (upper).
struct TransitionMask {
  bool lower = true;
  bool upper = true;
};

// RWA coupling in the frame rotating at omega_frame, in joules. Every active
// transition M -> M - sgn(g_F) carries hbar W env(t) exp(i[(w_rf - w_frame)t - theta]).
inline Matrix3 coupling_matrix(const std::vector<RfComponent>& fields, double t, double omega_frame,
                               const AtomSpecies& species, const PhysicalConstants& c,
                               TransitionMask mask = {}) {
  require_spin_one(species);
  Matrix3 m{};
  cplx a{0.0, 0.0};
  for (const auto& rf : fields) {
    if (std::abs(rf.omega_rf - omega_frame) > 0.1 * omega_frame) {
      warn("rwa-violation", "rf detuning from the rotating frame is not small against the frame frequency");
    }
    const double env = envelope_value(rf.envelope, t);
    if (env == 0.0) continue;
    a += c.hbar * effective_coupling(rf, species) * env *
         std::polar(1.0, (rf.omega_rf - omega_frame) * t - rf.theta);
  }
  const int s = sign_of(species.g_F);
  const std::size_t T = sublevel_index(s), U = sublevel_index(0), A = sublevel_index(-s);
  if (mask.lower) {
    m[U][T] = a;
    m[T][U] = std::conj(a);
  }
  if (mask.upper) {
    m[A][U] = a;
    m[U][A] = std::conj(a);
  }
  return m;
}

// (sqrt(w1 w2) m / 2 pi hbar) 4 pi hbar^2 a N / m = 2 hbar sqrt(w1 w2) a N.
inline double g1d_coefficient(const AtomSpecies& species, double omega_t1, double omega_t2, double atom_number,
                              const PhysicalConstants& c) {
  if (!(omega_t1 > 0) || !(omega_t2 > 0) || !(atom_number > 0) || species.scattering_length < 0) {
    throw Error(ErrorKind::precondition, "g1d_coefficient needs positive frequencies and atom number");
  }
  return 2.0 * c.hbar * std::sqrt(omega_t1 * omega_t2) * species.scattering_length * atom_number;
}

// Thomas-Fermi chemical potential of the 1D harmonic trap (norm 1), measured
// from the potential minimum.
inline double thomas_fermi_mu(double g1d, const TrapConfig& trap, const AtomSpecies& species) {
  const double k = species.mass * trap.omega_x * trap.omega_x;
  return std::pow(0.75 * g1d * std::sqrt(0.5 * k), 2.0 / 3.0);
}

inline double thomas_fermi_radius(double g1d, const TrapConfig& trap, const AtomSpecies& species) {
  return std::sqrt(2.0 * thomas_fermi_mu(g1d, trap, species) / (species.mass * trap.omega_x * trap.omega_x));
}

struct GroundStateOptions {
  std::vector<double> dtau_schedule{0.02, 0.005, 0.002};  // natural time units
  double energy_tolerance = 1e-12;  // per-step energy change relative to the energy
  double state_tolerance = 1e-10;   // per-step L2 change of the normalized state
  std::size_t max_iterations = 200000;
};

struct GroundState {
  ComplexField field;
  double energy = 0.0;             // J, excluding the constant hbar w_bias
  double chemical_potential = 0.0;  // J, same reference
  std::size_t iterations = 0;
};

namespace detail {

struct NaturalGrid {
  std::vector<double> x;   // natural positions
  std::vector<double> k2;  // squared natural wavenumbers in FFT order
  double dx = 0.0;
};

inline NaturalGrid natural_grid(const Grid1D& g, double length_l) {
  NaturalGrid n;
  n.dx = g.dx() / length_l;
  n.x.resize(g.n_points);
  n.k2.resize(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) {
    n.x[i] = g.x(i) / length_l;
    const double k = fft_wavenumber(i, g.n_points, n.dx);
    n.k2[i] = k * k;
  }
  return n;
}

inline double plain_norm(const cplx* psi, std::size_t n, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::norm(psi[i]);
  return s * dx;
}

}  // namespace detail

// Imaginary-time split-step relaxation of the trapped component, with mean
// field g1d |psi|^2 (norm 1). Runs on a window around x0 with the grid's own
// spacing and embeds the result in the full grid.
inline GroundState ground_state_imaginary_time(const TrapConfig& trap, const AtomSpecies& species, double g1d,
                                               const Grid1D& grid, const PhysicalConstants& c = {},
                                               const GroundStateOptions& opt = {}) {
  trap.validate();
  species.validate();
  grid.validate(256);
  if (g1d < 0) throw Error(ErrorKind::precondition, "ground state needs g1d >= 0");
  const auto u = derive_natural_units(species, c);
  const double x0 = gravitational_sag(trap, c);
  const double sigma0 = ground_state_width(trap, species, c);
  const double r_tf = g1d > 0 ? thomas_fermi_radius(g1d, trap, species) : 0.0;
  const double margin = std::max(10.0 * sigma0, 1.5 * r_tf);
  if (x0 - margin < grid.x_min || x0 + margin > grid.x_max) {
    throw Error(ErrorKind::precondition, "grid must contain x0 with a 10 sigma0 (or Thomas-Fermi radius) margin");
  }
  const double half = std::max(15.0 * sigma0, 2.0 * r_tf + 10.0 * sigma0);
  std::size_t first = 0;
  const Grid1D sub = grid.crop(std::max(grid.x_min, x0 - half), std::min(grid.x_max, x0 + half), 0, first);
  const std::size_t n = sub.n_points;
  const auto ng = detail::natural_grid(sub, u.length_l);
  const double g = g1d / (u.energy_unit * u.length_l);
  const double kx = species.mass * trap.omega_x * trap.omega_x;

  std::vector<double> V(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sub.x(i);
    V[i] = (0.5 * kx * x * x - species.mass * c.g_earth * x) / u.energy_unit;
  }

  FftBuffer psi(n);
  const double mu_tf = g > 0 ? thomas_fermi_mu(g1d, trap, species) / u.energy_unit : 0.0;
  const double v_min = -0.5 * species.mass * c.g_earth * x0 / u.energy_unit;
  const double s_nat = sigma0 / u.length_l, x0_nat = x0 / u.length_l;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = ng.x[i] - x0_nat;
    double amp = std::exp(-d * d / (2.0 * s_nat * s_nat));
    if (g > 0) amp = std::sqrt(std::max(mu_tf - (V[i] - v_min), 0.0) / g) + 1e-3 * amp;
    psi[i] = amp;
  }
  auto normalize = [&] {
    const double s = 1.0 / std::sqrt(detail::plain_norm(psi.data(), n, ng.dx));
    for (std::size_t i = 0; i < n; ++i) psi[i] *= s;
  };
  normalize();

  FftBuffer work(n);
  auto energy_and_mu = [&](double& mu) {
    for (std::size_t i = 0; i < n; ++i) work[i] = psi[i];
    work.forward();
    double kin = 0.0;
    for (std::size_t i = 0; i < n; ++i) kin += ng.k2[i] * std::norm(work[i]);
    kin *= ng.dx / static_cast<double>(n);
    double pot = 0.0, inter = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::norm(psi[i]);
      pot += V[i] * d;
      inter += g * d * d;
    }
    pot *= ng.dx;
    inter *= ng.dx;
    mu = kin + pot + inter;
    return kin + pot + 0.5 * inter;
  };

  std::vector<cplx> previous(n);
  std::size_t iterations = 0;
  double mu = 0.0;
  double energy = energy_and_mu(mu);
  for (const double dtau : opt.dtau_schedule) {
    std::vector<double> kin(n);
    for (std::size_t i = 0; i < n; ++i) kin[i] = std::exp(-ng.k2[i] * dtau) / static_cast<double>(n);
    bool converged = false;
    while (!converged) {
      if (iterations++ >= opt.max_iterations) {
        throw Error(ErrorKind::non_convergence, "imaginary-time relaxation did not converge");
      }
      for (std::size_t i = 0; i < n; ++i) previous[i] = psi[i];
      for (std::size_t i = 0; i < n; ++i) psi[i] *= std::exp(-0.5 * dtau * (V[i] + g * std::norm(psi[i])));
      psi.forward();
      for (std::size_t i = 0; i < n; ++i) psi[i] *= kin[i];
      psi.backward();
      for (std::size_t i = 0; i < n; ++i) psi[i] *= std::exp(-0.5 * dtau * (V[i] + g * std::norm(psi[i])));
      normalize();
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) change += std::norm(psi[i] - previous[i]);
      change = std::sqrt(change * ng.dx);
      const double e = energy_and_mu(mu);
      converged = std::abs(e - energy) < opt.energy_tolerance * std::abs(e) && change < opt.state_tolerance;
      energy = e;
    }
  }

  GroundState out{ComplexField(grid, 0.0), energy * u.energy_unit, mu * u.energy_unit, iterations};
  const double to_si = 1.0 / std::sqrt(u.length_l);
  for (std::size_t i = 0; i < n; ++i) out.field.samples[first + i] = cplx(std::abs(psi[i]) * to_si, 0.0);
  return out;
}

// Three-component wavefunction on one grid; components indexed by M_F + 1.
struct SpinorField {
  Grid1D grid{};
  std::array<std::vector<cplx>, 3> components{};
  double time = 0.0;

  SpinorField() = default;
  explicit SpinorField(const Grid1D& g, double t = 0.0) : grid(g), time(t) {
    for (auto& c : components) c.assign(g.n_points, cplx{});
  }

  static SpinorField from_component(int M, const ComplexField& f) {
    SpinorField s(f.grid, f.timestamp);
    s.components[sublevel_index(M)] = f.samples;
    return s;
  }

  std::vector<cplx>& component(int M) { return components[sublevel_index(M)]; }
  const std::vector<cplx>& component(int M) const { return components[sublevel_index(M)]; }
  ComplexField field(int M) const { return ComplexField(grid, component(M), time); }

  // Rectangle-rule norms, the quantity the FFT propagation conserves.
  double norm(int M) const { return detail::plain_norm(component(M).data(), grid.n_points, grid.dx()); }
  double total_norm() const { return norm(-1) + norm(0) + norm(1); }
};

// Cosine-ramp loss near x_max: rate strength * sin^2 rising over width.
struct Absorber {
  double width = 0.0;     // m
  double strength = 0.0;  // 1/s
  bool enabled() const { return width > 0.0 && strength > 0.0; }
};

// Removes trapped and anti-trapped amplitude farther than `radius` from
// `center`. Neither can physically get there (the trapped state is confined,
// the anti-trapped one never returns), but numerical noise there outruns the
// grid's momentum range, wraps through the periodic boundary and is amplified
// by the mean field. The untrapped component is left alone.
struct OuterSink {
  double center = 0.0;    // m
  double radius = 0.0;    // m
  double width = 0.0;     // m, sin^2 ramp
  double strength = 0.0;  // 1/s
  bool enabled() const { return radius > 0.0 && width > 0.0 && strength > 0.0; }
};

struct ProbeWindow {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double interval = 0.0;  // s; 0 disables
  bool enabled() const { return interval > 0.0 && x_hi > x_lo; }
};

struct EvolutionParams {
  double dt = 1.0e-6;
  double t_final = 8.0e-3;
  double rotating_frame_omega = 0.0;
  double interaction_g1d = 0.0;
  Absorber absorber{};
  OuterSink sink{};
  double snapshot_interval = 1.0e-4;
  ProbeWindow probe{};
  TransitionMask mask{};
  double overflow_tolerance = 1e-6;
  double instability_tolerance = 1e-6;
  std::size_t overflow_check_stride = 100;
};

struct NumericRun {
  StreamResult stream;  // untrapped component snapshots
  StreamResult probe;   // untrapped component in the probe window
  std::vector<double> norm_history;  // total norm after each step, entry 0 is the initial norm
  std::vector<double> snapshot_times;
  std::vector<std::array<double, 3>> snapshot_norms;  // per sublevel at each snapshot
  SpinorField final_state;
  std::size_t steps = 0;
};

namespace detail {

// exp(-i C h) for Hermitian C with zero diagonal and nonzero entries only next
// to the diagonal, using C^3 = w^2 C.
inline Matrix3 coupling_exponential(const Matrix3& C, double h) {
  Matrix3 out{};
  for (std::size_t i = 0; i < 3; ++i) out[i][i] = 1.0;
  const double w2 = std::norm(C[1][0]) + std::norm(C[2][1]);
  if (w2 == 0.0) return out;
  const double w = std::sqrt(w2);
  const double a = std::sin(w * h) / w;
  const double b = (1.0 - std::cos(w * h)) / w2;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      cplx c2{};
      for (std::size_t k = 0; k < 3; ++k) c2 += C[i][k] * C[k][j];
      out[i][j] += cplx(0.0, -a) * C[i][j] - b * c2;
    }
  }
  return out;
}

inline double max_residual_frequency(const std::vector<RfComponent>& fields, const TrapConfig& trap,
                                     double omega_frame) {
  double r = std::abs(trap.omega_bias - omega_frame);
  for (const auto& f : fields) r = std::max(r, std::abs(f.omega_rf - omega_frame));
  return r;
}

inline std::size_t steps_for(double interval, double dt, const char* what) {
  const double ratio = interval / dt;
  const double k = std::round(ratio);
  if (k < 1.0 || std::abs(ratio - k) > 1e-6 * k) {
    throw Error(ErrorKind::precondition, std::string(what) + " must be a positive multiple of dt");
  }
  return static_cast<std::size_t>(k);
}

}  // namespace detail

// Symmetric split-step propagation of the three sublevels in the frame
// rotating at rotating_frame_omega.
inline NumericRun evolve(const SpinorField& initial, const std::vector<RfComponent>& fields,
                         const EvolutionParams& p, const TrapConfig& trap, const AtomSpecies& species,
                         const PhysicalConstants& c = {}) {
  require_spin_one(species);
  trap.validate();
  for (const auto& f : fields) f.validate();
  const Grid1D& grid = initial.grid;
  grid.validate(256);
  const std::size_t n = grid.n_points;
  for (const auto& comp : initial.components) {
    if (comp.size() != n) throw Error(ErrorKind::grid_mismatch, "spinor component size differs from its grid");
  }
  if (!(p.dt > 0) || !(p.t_final >= 0) || !(p.rotating_frame_omega > 0)) {
    throw Error(ErrorKind::precondition, "evolution needs dt > 0, t_final >= 0 and a rotating frame");
  }
  const double residual = detail::max_residual_frequency(fields, trap, p.rotating_frame_omega);
  if (residual > 0 && !(p.dt < kTwoPi / (20.0 * residual))) {
    throw Error(ErrorKind::precondition, "dt does not resolve the largest rotating-frame detuning");
  }
  if (p.interaction_g1d != 0.0) {
    // Split-step with a nonlinearity amplifies modes whose kinetic phase per step passes pi.
    const double k_max = std::numbers::pi / grid.dx();
    if (c.hbar * k_max * k_max * p.dt / (2.0 * species.mass) >= 0.9 * std::numbers::pi) {
      throw Error(ErrorKind::precondition, "dt exceeds the split-step stability limit 0.9 pi (2m/hbar) dx^2/pi^2 "
                                           "for interacting evolution on this grid");
    }
  }
  const double n0 = initial.total_norm();
  if (std::abs(n0 - 1.0) > 1e-6) throw Error(ErrorKind::precondition, "initial spinor must be normalized");
  const std::size_t total_steps = static_cast<std::size_t>(std::llround(p.t_final / p.dt));
  const std::size_t snap_every = detail::steps_for(p.snapshot_interval, p.dt, "snapshot interval");
  const std::size_t probe_every = p.probe.enabled() ? detail::steps_for(p.probe.interval, p.dt, "probe interval") : 0;

  const auto u = derive_natural_units(species, c);
  const auto ng = detail::natural_grid(grid, u.length_l);
  const double h = u.to_time(p.dt);
  const double g = p.interaction_g1d / (u.energy_unit * u.length_l);
  const bool linear = p.interaction_g1d == 0.0;
  const int s = sign_of(species.g_F);
  const std::size_t T = sublevel_index(s), U = sublevel_index(0);

  // Diagonal rotating-frame potentials in natural units and their half-stage phases.
  const double kx = species.mass * trap.omega_x * trap.omega_x;
  std::array<std::vector<cplx>, 3> half_phase;
  for (int M = -1; M <= 1; ++M) {
    auto& ph = half_phase[sublevel_index(M)];
    ph.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = grid.x(i);
      const double v = (s * M * (0.5 * kx * x * x + c.hbar * (trap.omega_bias - p.rotating_frame_omega)) -
                        species.mass * c.g_earth * x) /
                       u.energy_unit;
      ph[i] = std::polar(1.0, -0.25 * v * h);
    }
  }
  std::vector<cplx> kinetic(n);
  for (std::size_t i = 0; i < n; ++i) kinetic[i] = std::polar(1.0 / static_cast<double>(n), -ng.k2[i] * h);
  std::vector<double> absorb;
  if (p.absorber.enabled()) {
    absorb.assign(n, 1.0);
    const double start = grid.x_max - p.absorber.width;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = grid.x(i);
      if (x <= start) continue;
      const double r = std::sin(0.5 * std::numbers::pi * (x - start) / p.absorber.width);
      absorb[i] = std::exp(-p.absorber.strength * r * r * p.dt);
    }
  }

  std::vector<double> sink;
  if (p.sink.enabled()) {
    const auto& a = p.sink;
    sink.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::fabs(grid.x(i) - a.center) - a.radius;
      if (d <= 0.0) continue;
      const double r = d >= a.width ? 1.0 : std::sin(0.5 * std::numbers::pi * d / a.width);
      sink[i] = std::exp(-a.strength * r * r * p.dt);
    }
  }

  // Components that can ever hold amplitude.
  std::array<bool, 3> active{};
  for (std::size_t k = 0; k < 3; ++k) {
    active[k] = std::any_of(initial.components[k].begin(), initial.components[k].end(),
                            [](cplx v) { return v != cplx{}; });
  }
  if (!fields.empty()) {
    const std::size_t A = sublevel_index(-s);
    for (int pass = 0; pass < 2; ++pass) {
      if (p.mask.lower && (active[T] || active[U])) active[T] = active[U] = true;
      if (p.mask.upper && (active[U] || active[A])) active[U] = active[A] = true;
    }
  }

  std::array<std::unique_ptr<FftBuffer>, 3> psi;
  for (std::size_t k = 0; k < 3; ++k) {
    psi[k] = std::make_unique<FftBuffer>(n);
    for (std::size_t i = 0; i < n; ++i) (*psi[k])[i] = initial.components[k][i];
  }
  auto total_norm = [&] {
    double t = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (active[k]) t += detail::plain_norm(psi[k]->data(), n, grid.dx());
    }
    return t;
  };

  // Potential, mean-field and coupling over h/2 centred at tc (seconds).
  auto potential_stage = [&](double tc) {
    const Matrix3 Cj = coupling_matrix(fields, tc, p.rotating_frame_omega, species, c, p.mask);
    Matrix3 C{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) C[i][j] = Cj[i][j] / u.energy_unit;
    const Matrix3 M = detail::coupling_exponential(C, 0.5 * h);
    const bool coupled = std::norm(C[1][0]) + std::norm(C[2][1]) > 0.0;
    cplx* d[3] = {psi[0]->data(), psi[1]->data(), psi[2]->data()};
    for (std::size_t i = 0; i < n; ++i) {
      cplx v[3];
      double dens = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        v[k] = active[k] ? d[k][i] * half_phase[k][i] : cplx{};
        dens += std::norm(v[k]);
      }
      if (coupled) {
        cplx w[3];
        for (std::size_t r = 0; r < 3; ++r) w[r] = M[r][0] * v[0] + M[r][1] * v[1] + M[r][2] * v[2];
        for (std::size_t k = 0; k < 3; ++k) v[k] = w[k];
      }
      // The coupling is unitary per point, so the total density is unchanged.
      const cplx mf = linear ? cplx(1.0, 0.0) : std::polar(1.0, -0.5 * g * dens * u.length_l * h);
      for (std::size_t k = 0; k < 3; ++k) {
        if (active[k]) d[k][i] = v[k] * half_phase[k][i] * mf;
      }
    }
  };

  auto kinetic_stage = [&] {
    for (std::size_t k = 0; k < 3; ++k) {
      if (!active[k]) continue;
      auto& b = *psi[k];
      b.forward();
      for (std::size_t i = 0; i < n; ++i) b[i] *= kinetic[i];
      b.backward();
    }
  };

  auto check_overflow = [&](double t) {
    if (p.absorber.enabled()) return;
    for (std::size_t k : {T, U}) {
      if (!active[k]) continue;
      const auto& b = *psi[k];
      double peak = 0.0, edge = 0.0;
      for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(b[i]));
      for (std::size_t i = 0; i < 4; ++i) edge = std::max({edge, std::abs(b[i]), std::abs(b[n - 1 - i])});
      if (peak > 0 && edge > p.overflow_tolerance * peak) {
        throw Error(ErrorKind::grid_overflow, "sublevel amplitude reached the grid edge at t = " + std::to_string(t) +
                                                  " s (" + std::to_string(edge / peak) + " of the maximum)");
      }
    }
  };

  NumericRun run;
  run.stream.engine = "numeric";
  run.stream.rf = fields;
  run.probe.engine = "numeric";
  run.probe.rf = fields;
  std::size_t probe_first = 0;
  Grid1D probe_grid{};
  if (p.probe.enabled()) probe_grid = grid.crop(p.probe.x_lo, p.probe.x_hi, 0, probe_first);
  const double t0 = initial.time;

  auto record = [&](std::size_t step) {
    const double t = t0 + static_cast<double>(step) * p.dt;
    if (step % snap_every == 0 || step == total_steps) {
      ComplexField f(grid, t);
      for (std::size_t i = 0; i < n; ++i) f.samples[i] = (*psi[U])[i];
      run.stream.push(std::move(f));
      run.snapshot_times.push_back(t);
      std::array<double, 3> norms{};
      for (std::size_t k = 0; k < 3; ++k) norms[k] = detail::plain_norm(psi[k]->data(), n, grid.dx());
      run.snapshot_norms.push_back(norms);
    }
    if (probe_every != 0 && (step % probe_every == 0 || step == total_steps)) {
      ComplexField f(probe_grid, t);
      for (std::size_t i = 0; i < probe_grid.n_points; ++i) f.samples[i] = (*psi[U])[probe_first + i];
      run.probe.push(std::move(f));
    }
  };

  run.norm_history.reserve(total_steps + 1);
  run.norm_history.push_back(total_norm());
  record(0);
  for (std::size_t step = 0; step < total_steps; ++step) {
    const double t = t0 + static_cast<double>(step) * p.dt;
    potential_stage(t + 0.25 * p.dt);
    kinetic_stage();
    potential_stage(t + 0.75 * p.dt);
    if (!absorb.empty()) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (!active[k]) continue;
        for (std::size_t i = 0; i < n; ++i) (*psi[k])[i] *= absorb[i];
      }
    }
    if (!sink.empty()) {
      for (std::size_t k : {T, sublevel_index(-s)}) {
        if (!active[k]) continue;
        auto& b = *psi[k];
        for (std::size_t i = 0; i < n; ++i) b[i] *= sink[i];
      }
    }
    const double norm = total_norm();
    if (!std::isfinite(norm)) throw Error(ErrorKind::instability, "norm became non-finite");
    if (linear && absorb.empty() && sink.empty() && std::abs(norm - run.norm_history.back()) > p.instability_tolerance) {
      throw Error(ErrorKind::instability, "norm drift per step exceeded tolerance at t = " + std::to_string(t));
    }
    run.norm_history.push_back(norm);
    if ((step + 1) % p.overflow_check_stride == 0 || step + 1 == total_steps) check_overflow(t + p.dt);
    record(step + 1);
  }
  run.steps = total_steps;
  run.final_state = SpinorField(grid, t0 + static_cast<double>(total_steps) * p.dt);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < n; ++i) run.final_state.components[k][i] = (*psi[k])[i];
  }
  return run;
}

// Default numeric grid: [x0 - 30 um, x0 + 390 um], 16384 points.
inline Grid1D default_numeric_grid(const Experiment& e) {
  const double x0 = e.sag();
  return Grid1D{x0 - 30e-6, x0 + 390e-6, 16384};
}

inline EvolutionParams default_evolution_params(const Experiment& e) {
  EvolutionParams p;
  p.rotating_frame_omega = e.trap.omega_bias;
  return p;
}

}  // namespace atomlaser
