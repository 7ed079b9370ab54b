#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "atomlaser/physconfig.hpp"

using namespace atomlaser;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent long-double evaluation of the closed-form natural length.
long double reference_length(long double hbar, long double g, long double m) {
  return std::pow(hbar * hbar / (2.0L * g * m * m), 1.0L / 3.0L);
}

}  // namespace

TEST(NaturalUnits, Rubidium87LengthScale) {
  const PhysicalConstants c;
  const auto rb = AtomSpecies::rubidium87(c);
  const auto u = derive_natural_units(rb, c);
  const long double l_ref = reference_length(c.hbar, c.g_earth, rb.mass);
  EXPECT_NEAR(u.length_l, static_cast<double>(l_ref), 1e-15 * u.length_l);
  EXPECT_NEAR(u.length_l, 3.00e-7, 0.01e-7);
}

TEST(NaturalUnits, Rubidium87TimeScale) {
  const PhysicalConstants c;
  const auto rb = AtomSpecies::rubidium87(c);
  const auto u = derive_natural_units(rb, c);
  const long double l_ref = reference_length(c.hbar, c.g_earth, rb.mass);
  const long double t_ref = c.hbar / (rb.mass * c.g_earth * l_ref);
  EXPECT_NEAR(u.time_unit, static_cast<double>(t_ref), 1e-14 * u.time_unit);
  EXPECT_NEAR(u.time_unit, 2.5e-4, 0.05e-4);
  EXPECT_NEAR(u.energy_unit, rb.mass * c.g_earth * u.length_l, 1e-15 * u.energy_unit);
}

TEST(NaturalUnits, LengthScalesAsMassToMinusTwoThirds) {
  const PhysicalConstants c;
  auto rb = AtomSpecies::rubidium87(c);
  const double l1 = derive_natural_units(rb, c).length_l;
  rb.mass *= 8.0;
  const double l8 = derive_natural_units(rb, c).length_l;
  EXPECT_NEAR(l8 / l1, 0.25, 1e-14);
}

TEST(NaturalUnits, RoundTripIsExact) {
  const PhysicalConstants c;
  const auto u = derive_natural_units(AtomSpecies::rubidium87(c), c);
  for (double v : {1e-9, 3.7e-6, 4.2e-4, 1.0, 123.0}) {
    EXPECT_NEAR(u.from_length(u.to_length(v)), v, 1e-12 * v);
    EXPECT_NEAR(u.from_time(u.to_time(v)), v, 1e-12 * v);
    EXPECT_NEAR(u.from_energy(u.to_energy(v * 1e-30)), v * 1e-30, 1e-12 * v * 1e-30);
    EXPECT_NEAR(u.from_rate(u.to_rate(v)), v, 1e-12 * v);
  }
}

TEST(NaturalUnits, RejectsNonPositiveMass) {
  AtomSpecies s;
  s.mass = 0.0;
  EXPECT_THROW(derive_natural_units(s, PhysicalConstants{}), Error);
}

TEST(EffectiveCoupling, ReferenceSetupLinearPolarization) {
  const auto rf = reference_tone(910e3);
  const double w = effective_coupling(rf, AtomSpecies::rubidium87());
  EXPECT_NEAR(w, 2.0 * kPi * 50.0 / std::sqrt(2.0), 1e-12 * w);
}

TEST(EffectiveCoupling, CircularPolarizationIsUnsuppressed) {
  auto rf = reference_tone(910e3);
  rf.polarization_factor = 1.0;
  EXPECT_DOUBLE_EQ(effective_coupling(rf, AtomSpecies::rubidium87()), rf.peak_rabi);
}

TEST(EffectiveCoupling, LinearInPeakRabiAndPolarization) {
  const auto rb = AtomSpecies::rubidium87();
  auto rf = reference_tone(910e3);
  const double base = effective_coupling(rf, rb);
  rf.peak_rabi *= 3.0;
  EXPECT_NEAR(effective_coupling(rf, rb), 3.0 * base, 1e-12 * base);
  rf.polarization_factor *= 0.5;
  EXPECT_NEAR(effective_coupling(rf, rb), 1.5 * base, 1e-12 * base);
}

TEST(EffectiveCoupling, DeterministicForIdenticalInputs) {
  const auto rb = AtomSpecies::rubidium87();
  EXPECT_EQ(effective_coupling(reference_tone(905e3), rb), effective_coupling(reference_tone(905e3), rb));
}

TEST(EffectiveCoupling, RejectsFZero) {
  auto s = AtomSpecies::rubidium87();
  s.F = 0;
  try {
    effective_coupling(reference_tone(910e3), s);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(Resonance, ReferenceSetupNearPublishedValue) {
  const PhysicalConstants c;
  const double w = predict_resonance(TrapConfig::reference(), AtomSpecies::rubidium87(c), c);
  EXPECT_NEAR(w / (2.0 * kPi), 910.3e3, 0.5e3);
}

TEST(Resonance, ReferenceSetupSag) {
  const PhysicalConstants c;
  const double wx = 2.0 * kPi * 160.0;
  EXPECT_NEAR(gravitational_sag(TrapConfig::reference(), c), 9.81 / (wx * wx), 1e-20);
  EXPECT_NEAR(gravitational_sag(TrapConfig::reference(), c), 9.7e-6, 0.05e-6);
}

TEST(Resonance, ZeroGravityLimit) {
  PhysicalConstants c;
  c.g_earth = 1e-300;
  const auto trap = TrapConfig::reference();
  const double w = predict_resonance(trap, AtomSpecies::rubidium87(c), c);
  EXPECT_NEAR(w, trap.omega_bias + 0.5 * trap.omega_x, 1e-9 * w);
}

TEST(Resonance, OverlapWidthInFrequencyUnits) {
  const PhysicalConstants c;
  const auto rb = AtomSpecies::rubidium87(c);
  const double sigma = ground_state_width(TrapConfig::reference(), rb, c);
  const double width_hz = rb.mass * c.g_earth * sigma / (2.0 * kPi * c.hbar);
  EXPECT_NEAR(width_hz, 1.8e3, 0.03 * 1.8e3);
}

TEST(Resonance, GroundEnergyIsBiasPlusZeroPointMinusHalfSag) {
  const PhysicalConstants c;
  const auto rb = AtomSpecies::rubidium87(c);
  const auto trap = TrapConfig::reference();
  const double x0 = gravitational_sag(trap, c);
  // Minimum of (1/2) m w^2 x^2 - m g x is -(1/2) m g x0.
  const double v_min = 0.5 * rb.mass * trap.omega_x * trap.omega_x * x0 * x0 - rb.mass * c.g_earth * x0;
  const double expected = c.hbar * trap.omega_bias + 0.5 * c.hbar * trap.omega_x + v_min;
  EXPECT_NEAR(trapped_ground_energy(trap, rb, c), expected, 1e-12 * expected);
}

TEST(Validation, ConstantsMustBePositive) {
  PhysicalConstants c;
  c.hbar = -1.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(PhysicalConstants{}.validate());
  EXPECT_DOUBLE_EQ(PhysicalConstants{}.bohr_radius, 5.5e-11);
}

TEST(Validation, SpeciesInvariants) {
  auto s = AtomSpecies::rubidium87();
  EXPECT_EQ(s.F, 1);
  EXPECT_DOUBLE_EQ(s.g_F, -0.5);
  EXPECT_NO_THROW(s.validate());
  s.g_F = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = AtomSpecies::rubidium87();
  s.F = 0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Validation, TrapNeedsBiasFarAboveTrapFrequency) {
  TrapConfig t;
  EXPECT_NO_THROW(t.validate());
  t.omega_bias = 10.0 * t.omega_x;
  EXPECT_THROW(t.validate(), Error);
  t = TrapConfig{};
  t.omega_y = 0.0;
  EXPECT_THROW(t.validate(), Error);
}

TEST(Validation, RfComponent) {
  auto rf = reference_tone(910e3);
  EXPECT_NO_THROW(rf.validate());
  rf.peak_rabi = 0.0;
  EXPECT_THROW(rf.validate(), Error);
  rf = reference_tone(910e3);
  rf.envelope = BoxEnvelope{0.0, 0.0};
  EXPECT_THROW(rf.validate(), Error);
  rf = reference_tone(910e3);
  rf.polarization_factor = 1.5;
  EXPECT_THROW(rf.validate(), Error);
}

TEST(Envelope, BoxIsZeroOutsidePulse) {
  const Envelope e = BoxEnvelope{1e-3, 2e-3};
  EXPECT_EQ(envelope_value(e, 0.5e-3), 0.0);
  EXPECT_EQ(envelope_value(e, 1.5e-3), 1.0);
  EXPECT_EQ(envelope_value(e, 3.5e-3), 0.0);
  EXPECT_DOUBLE_EQ(envelope_end(e), 3e-3);
  EXPECT_TRUE(is_box(e));
}

TEST(Envelope, SineSquaredPeaksAtMidpoint) {
  const Envelope e = SineSquaredEnvelope{0.0, 4e-3};
  EXPECT_NEAR(envelope_value(e, 2e-3), 1.0, 1e-15);
  EXPECT_NEAR(envelope_value(e, 1e-3), 0.5, 1e-15);
  EXPECT_EQ(envelope_value(e, -1e-3), 0.0);
  EXPECT_FALSE(is_box(e));
  EXPECT_EQ(envelope_name(e), "sine2");
}
