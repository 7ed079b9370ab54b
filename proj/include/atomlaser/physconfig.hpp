#pragma once

// Physical constants, atom/trap/rf parameter sets and the quantities derived
// from them that both engines share. Everything here is SI.

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "atomlaser/errors.hpp"

namespace atomlaser {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PhysicalConstants {
  double hbar = 1.054571817e-34;            // J s
  double g_earth = 9.81;                    // m / s^2
  double bohr_magneton = 9.2740100783e-24;  // J / T
  double atomic_mass_unit = 1.66053906660e-27;  // kg
  double bohr_radius = 5.5e-11;             // m, value quoted with the reference parameters

  void validate() const {
    if (!(hbar > 0 && g_earth > 0 && bohr_magneton > 0 && atomic_mass_unit > 0 && bohr_radius > 0)) {
      throw Error(ErrorKind::config_invalid, "physical constants must be strictly positive");
    }
  }
};

struct AtomSpecies {
  double mass = 0.0;               // kg
  int F = 1;
  double g_F = -0.5;
  double scattering_length = 0.0;  // m

  void validate() const {
    if (!(mass > 0)) throw Error(ErrorKind::config_invalid, "species.mass must be > 0");
    if (F < 1) throw Error(ErrorKind::config_invalid, "species.F must be >= 1");
    if (g_F == 0.0 || !std::isfinite(g_F)) throw Error(ErrorKind::config_invalid, "species.g_F must be nonzero");
    if (!(scattering_length >= 0)) throw Error(ErrorKind::config_invalid, "species.scattering_length must be >= 0");
  }

  // 87Rb in F = 1 with a = 103 a0.
  static AtomSpecies rubidium87(const PhysicalConstants& c = {}) {
    return AtomSpecies{86.909 * c.atomic_mass_unit, 1, -0.5, 103.0 * c.bohr_radius};
  }
};

inline int sign_of(double v) { return v < 0 ? -1 : 1; }

struct TrapConfig {
  double omega_x = kTwoPi * 160.0;       // fall axis
  double omega_y = kTwoPi * 6.7;
  double omega_z = kTwoPi * 160.0;
  double omega_bias = kTwoPi * 900.0e3;

  void validate() const {
    if (!(omega_x > 0 && omega_y > 0 && omega_z > 0 && omega_bias > 0)) {
      throw Error(ErrorKind::config_invalid, "trap frequencies must be strictly positive");
    }
    if (!(omega_bias > 100.0 * omega_x)) {
      throw Error(ErrorKind::config_invalid, "trap.omega_bias must be >> trap.omega_x (linear Zeeman regime)");
    }
  }

  static TrapConfig reference() { return {}; }
};

// Pulse shapes. All are zero before `start`.
struct BoxEnvelope {
  double start = 0.0;
  double duration = 5.0e-3;

  double operator()(double t) const { return (t >= start && t <= start + duration) ? 1.0 : 0.0; }
};

// sin^2 rise and fall over the whole duration (compact, continuous).
struct SineSquaredEnvelope {
  double start = 0.0;
  double duration = 5.0e-3;

  double operator()(double t) const {
    if (t < start || t > start + duration) return 0.0;
    const double s = std::sin(std::numbers::pi * (t - start) / duration);
    return s * s;
  }
};

using Envelope = std::variant<BoxEnvelope, SineSquaredEnvelope>;

inline double envelope_value(const Envelope& env, double t) {
  return std::visit([t](const auto& e) { return e(t); }, env);
}
inline double envelope_start(const Envelope& env) {
  return std::visit([](const auto& e) { return e.start; }, env);
}
inline double envelope_duration(const Envelope& env) {
  return std::visit([](const auto& e) { return e.duration; }, env);
}
inline double envelope_end(const Envelope& env) { return envelope_start(env) + envelope_duration(env); }
inline bool is_box(const Envelope& env) { return std::holds_alternative<BoxEnvelope>(env); }
inline std::string envelope_name(const Envelope& env) { return is_box(env) ? "box" : "sine2"; }

struct RfComponent {
  double peak_rabi = kTwoPi * 50.0;  // rad/s, before polarization suppression
  double omega_rf = kTwoPi * 910.0e3;
  double theta = 0.0;
  double polarization_factor = 1.0;  // 1 circular, 1/sqrt(2) linear
  Envelope envelope = BoxEnvelope{};

  void validate() const {
    if (!(peak_rabi > 0)) throw Error(ErrorKind::config_invalid, "rf.peak_rabi must be > 0");
    if (!(omega_rf > 0)) throw Error(ErrorKind::config_invalid, "rf.omega_rf must be > 0");
    if (!std::isfinite(theta)) throw Error(ErrorKind::config_invalid, "rf.theta must be finite");
    if (!(polarization_factor > 0 && polarization_factor <= 1)) {
      throw Error(ErrorKind::config_invalid, "rf.polarization_factor must lie in (0, 1]");
    }
    if (!(envelope_duration(envelope) > 0)) throw Error(ErrorKind::config_invalid, "rf envelope duration must be > 0");
  }
};

// l = (hbar^2 / 2 g m^2)^(1/3), energy m g l, time hbar / (m g l). In these
// units the untrapped Hamiltonian is -d^2/dx^2 - x (hbar = 1, m = 1/2, g = 2).
struct NaturalUnits {
  double length_l = 0.0;
  double energy_unit = 0.0;
  double time_unit = 0.0;

  double to_length(double x_m) const { return x_m / length_l; }
  double from_length(double x) const { return x * length_l; }
  double to_energy(double e_joule) const { return e_joule / energy_unit; }
  double from_energy(double e) const { return e * energy_unit; }
  double to_time(double t_s) const { return t_s / time_unit; }
  double from_time(double t) const { return t * time_unit; }
  double to_rate(double omega) const { return omega * time_unit; }
  double from_rate(double w) const { return w / time_unit; }
};

inline NaturalUnits derive_natural_units(const AtomSpecies& species, const PhysicalConstants& c) {
  if (!(species.mass > 0)) throw Error(ErrorKind::precondition, "mass must be > 0");
  NaturalUnits u;
  u.length_l = std::cbrt(c.hbar * c.hbar / (2.0 * c.g_earth * species.mass * species.mass));
  u.energy_unit = species.mass * c.g_earth * u.length_l;
  u.time_unit = c.hbar / u.energy_unit;
  return u;
}

/// Coupling rate of the |F, sgn(g_F)> -> |F, 0> transition.
///
/// Convention: peak_rabi is the rate for pure circular polarization in an
/// F = 1 manifold. The F_alpha matrix element sqrt(F(F+1)) hbar and the
/// 1/sqrt(2) of the circular projection combine into sqrt(F(F+1)/2), which is
/// exactly 1 for F = 1. The returned value is |<U|H_I|T>| / hbar.
inline double effective_coupling(const RfComponent& rf, const AtomSpecies& species) {
  if (species.F < 1) throw Error(ErrorKind::precondition, "F = 0 has no M_F = +-1 sublevel");
  const double F = species.F;
  return rf.peak_rabi * rf.polarization_factor * std::sqrt(F * (F + 1.0) / 2.0);
}

inline double gravitational_sag(const TrapConfig& trap, const PhysicalConstants& c) {
  return c.g_earth / (trap.omega_x * trap.omega_x);
}

// Harmonic-oscillator length along the fall axis, the ground-state Gaussian width.
inline double ground_state_width(const TrapConfig& trap, const AtomSpecies& species, const PhysicalConstants& c) {
  return std::sqrt(c.hbar / (species.mass * trap.omega_x));
}

// Non-interacting trapped ground-state energy, lab frame:
// hbar w_bias + hbar w_x / 2 - m g x0 / 2.
inline double trapped_ground_energy(const TrapConfig& trap, const AtomSpecies& species, const PhysicalConstants& c) {
  const double x0 = gravitational_sag(trap, c);
  return c.hbar * trap.omega_bias + 0.5 * c.hbar * trap.omega_x - 0.5 * species.mass * c.g_earth * x0;
}

// rf frequency that puts E0 - hbar w_rf on the overlap peak E = -m g x0.
inline double predict_resonance(const TrapConfig& trap, const AtomSpecies& species, const PhysicalConstants& c) {
  const double x0 = gravitational_sag(trap, c);
  return trap.omega_bias + 0.5 * trap.omega_x + species.mass * c.g_earth * x0 / (2.0 * c.hbar);
}

// Complete physical setup shared by both engines.
struct Experiment {
  PhysicalConstants constants{};
  AtomSpecies species = AtomSpecies::rubidium87();
  TrapConfig trap{};
  std::vector<RfComponent> rf{};
  double atom_number = 1.0e5;

  void validate() const {
    constants.validate();
    species.validate();
    trap.validate();
    for (const auto& r : rf) r.validate();
    if (!(atom_number > 0)) throw Error(ErrorKind::config_invalid, "condensate.atom_number must be > 0");
  }

  NaturalUnits units() const { return derive_natural_units(species, constants); }
  double sag() const { return gravitational_sag(trap, constants); }
  double sigma0() const { return ground_state_width(trap, species, constants); }
  double E0() const { return trapped_ground_energy(trap, species, constants); }
};

// Reference tone: linear polarization (1/sqrt 2 suppression), 50 Hz peak Rabi
// frequency, 5 ms box pulse starting at t = 0.
inline RfComponent reference_tone(double frequency_hz, double theta = 0.0) {
  RfComponent rf;
  rf.peak_rabi = kTwoPi * 50.0;
  rf.omega_rf = kTwoPi * frequency_hz;
  rf.theta = theta;
  rf.polarization_factor = 1.0 / std::numbers::sqrt2;
  rf.envelope = BoxEnvelope{0.0, 5.0e-3};
  return rf;
}

inline Experiment reference_experiment(std::vector<RfComponent> rf = {}) {
  Experiment e;
  e.rf = std::move(rf);
  return e;
}

}  // namespace atomlaser
