#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "atomlaser/analytic_model.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/field.hpp"
#include "atomlaser/physconfig.hpp"
#include "atomlaser/quadrature.hpp"

namespace atomlaser {

struct DensityProfile {
  Grid1D grid{};
  std::vector<double> density{};
  double time = 0.0;

  std::size_t size() const { return density.size(); }

  double integral() const {
    double s = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) s += trapezoid_weight(i, density.size()) * density[i];
    return s * grid.dx();
  }

  double peak() const { return density.empty() ? 0.0 : *std::max_element(density.begin(), density.end()); }
};

inline DensityProfile density(const ComplexField& f) {
  DensityProfile p{f.grid, std::vector<double>(f.size()), f.timestamp};
  for (std::size_t i = 0; i < f.size(); ++i) p.density[i] = std::norm(f.samples[i]);
  return p;
}

// Shortest beat period among distinct rf frequencies; infinity for one tone.
inline double drive_beat_period(const std::vector<RfComponent>& fields) {
  double period = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    for (std::size_t j = i + 1; j < fields.size(); ++j) {
      const double dw = std::abs(fields[i].omega_rf - fields[j].omega_rf);
      if (dw > 0) period = std::min(period, kTwoPi / dw);
    }
  }
  return period;
}

// |sum_k W_k env_k(t) exp(-i(w_k t + theta_k))|^2 in (rad/s)^2.
inline double drive_intensity(const std::vector<RfComponent>& fields, double t, const AtomSpecies& species) {
  cplx s{};
  for (const auto& f : fields) {
    const double env = envelope_value(f.envelope, t);
    if (env != 0.0) s += effective_coupling(f, species) * env * std::polar(1.0, -(f.omega_rf * t + f.theta));
  }
  return std::norm(s);
}

struct DetectorTrace {
  double detector_x = 0.0;
  std::vector<double> times{};
  std::vector<double> density{};
  std::vector<double> drive{};  // drive intensity at the same times
};

// Linear interpolation of |psi|^2 at x.
inline double density_at(const ComplexField& f, double x) {
  const double u = (x - f.grid.x_min) / f.grid.dx();
  const auto n = f.size();
  const std::size_t i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), n - 2);
  const double w = u - static_cast<double>(i);
  return (1.0 - w) * std::norm(f.samples[i]) + w * std::norm(f.samples[i + 1]);
}

inline DetectorTrace detector_trace(const StreamResult& stream, double x_d,
                                    const AtomSpecies& species = AtomSpecies::rubidium87()) {
  stream.validate();
  if (stream.size() < 2) throw Error(ErrorKind::precondition, "detector_trace needs at least two snapshots");
  const Grid1D& g = stream.fields.front().grid;
  if (!(x_d >= g.x_min && x_d <= g.x_max)) throw Error(ErrorKind::precondition, "detector position outside the grid");
  const double period = drive_beat_period(stream.rf);
  if (std::isfinite(period)) {
    double cadence = 0.0;
    for (std::size_t i = 1; i < stream.size(); ++i) cadence = std::max(cadence, stream.times[i] - stream.times[i - 1]);
    if (cadence > period / 10.0 * (1.0 + 1e-9)) {
      throw Error(ErrorKind::undersampled_beat, "snapshot cadence gives fewer than 10 samples per beat period");
    }
  }
  DetectorTrace tr;
  tr.detector_x = x_d;
  tr.times = stream.times;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    tr.density.push_back(density_at(stream.fields[i], x_d));
    tr.drive.push_back(drive_intensity(stream.rf, stream.times[i], species));
  }
  return tr;
}

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
};

struct VisibilityReport {
  double detector_x = 0.0;
  TimeWindow window{};
  double V = 0.0;
  double beat_frequency = 0.0;  // rad/s
  double envelope_phase = 0.0;  // rad, I ~ c + A cos(w t - phase)
  std::size_t periods = 0;
};

namespace detail {

struct Extremum {
  double t;
  double value;
  bool is_max;
};

// Interior extrema with parabolic refinement, ignoring wiggles below the
// noise floor. Consecutive extrema alternate in type.
inline std::vector<Extremum> find_extrema(const std::vector<double>& t, const std::vector<double>& y, double floor) {
  std::vector<Extremum> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    const bool is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
    const bool is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
    if (!is_max && !is_min) continue;
    // Parabola through three equally spaced samples.
    const double h = 0.5 * (t[i + 1] - t[i - 1]);
    const double den = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double off = den != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / den : 0.0;
    const double tv = t[i] + off * h;
    const double yv = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * off;
    if (!out.empty() && out.back().is_max == is_max) {
      if ((is_max && yv > out.back().value) || (!is_max && yv < out.back().value)) out.back() = {tv, yv, is_max};
      continue;
    }
    if (!out.empty() && std::abs(yv - out.back().value) <= floor) {
      out.pop_back();
      continue;
    }
    out.push_back({tv, yv, is_max});
  }
  return out;
}

// Hann-weighted projection of the detrended trace onto exp(-i w t).
inline cplx beat_projection(const std::vector<double>& t, const std::vector<double>& y, double w) {
  const std::size_t n = y.size();
  double mean = 0.0, wsum = 0.0;
  std::vector<double> hann(n);
  for (std::size_t i = 0; i < n; ++i) {
    hann[i] = n > 1 ? std::pow(std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)), 2) : 1.0;
    mean += hann[i] * y[i];
    wsum += hann[i];
  }
  mean /= wsum;
  cplx s{};
  for (std::size_t i = 0; i < n; ++i) s += hann[i] * (y[i] - mean) * std::polar(1.0, -w * t[i]);
  return s;
}

}  // namespace detail

// Phase of the beat at angular frequency w: I ~ c + A cos(w t - phase).
inline double envelope_phase_at(const std::vector<double>& times, const std::vector<double>& values, TimeWindow window,
                                double w) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= window.start && times[i] <= window.end) {
      t.push_back(times[i]);
      y.push_back(values[i]);
    }
  }
  return -std::arg(detail::beat_projection(t, y, w));
}

// Extrema-based visibility: the mean over maxima of (I_max - I_min)/(I_max + I_min)
// with I_min the mean of the neighbouring minima. The beat frequency is the
// spectral peak nearest the extrema spacing.
inline VisibilityReport visibility(const std::vector<double>& times, const std::vector<double>& values,
                                   TimeWindow window, double detector_x = 0.0) {
  if (times.size() != values.size()) throw Error(ErrorKind::precondition, "trace times and values differ in count");
  std::vector<double> t, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= window.start && times[i] <= window.end) {
      t.push_back(times[i]);
      y.push_back(values[i]);
    }
  }
  VisibilityReport r;
  r.detector_x = detector_x;
  r.window = window;
  if (t.size() < 3) throw Error(ErrorKind::too_few_periods, "window holds fewer than three samples");
  const double peak = *std::max_element(y.begin(), y.end());
  if (!(peak > 0.0)) return r;
  const auto ext = detail::find_extrema(t, y, 1e-12 * peak);
  if (ext.empty()) return r;
  std::vector<std::size_t> maxima;
  for (std::size_t i = 0; i < ext.size(); ++i) {
    if (ext[i].is_max) maxima.push_back(i);
  }
  if (maxima.size() < 4) throw Error(ErrorKind::too_few_periods, "window holds fewer than three beat periods");
  r.periods = maxima.size() - 1;

  double v_sum = 0.0;
  std::size_t v_count = 0;
  for (std::size_t m : maxima) {
    double lo = 0.0;
    int count = 0;
    if (m > 0) lo += ext[m - 1].value, ++count;
    if (m + 1 < ext.size()) lo += ext[m + 1].value, ++count;
    if (count == 0) continue;
    lo = std::max(0.0, lo / count);
    v_sum += (ext[m].value - lo) / (ext[m].value + lo);
    ++v_count;
  }
  r.V = std::clamp(v_sum / static_cast<double>(v_count), 0.0, 1.0);

  const double spacing = (ext[maxima.back()].t - ext[maxima.front()].t) / static_cast<double>(maxima.size() - 1);
  const double w0 = kTwoPi / spacing;
  const auto power = [&](double w) { return -std::norm(detail::beat_projection(t, y, w)); };
  const auto best = boost::math::tools::brent_find_minima(power, 0.85 * w0, 1.15 * w0, 40);
  r.beat_frequency = best.first;
  r.envelope_phase = -std::arg(detail::beat_projection(t, y, r.beat_frequency));
  return r;
}

inline VisibilityReport visibility(const DetectorTrace& trace, TimeWindow window) {
  return visibility(trace.times, trace.density, window, trace.detector_x);
}

struct ProfileComparison {
  double relative_l2 = 0.0;
  bool rescaled = false;
  double scale = 1.0;  // factor applied to b
};

// ||a - s b|| / ||a||; s matches the integrals when rescale is set, else 1.
// Two zero profiles compare equal.
inline ProfileComparison compare_profiles(const DensityProfile& a, const DensityProfile& b, bool rescale = false) {
  if (!a.grid.same_as(b.grid) || a.size() != b.size()) {
    throw Error(ErrorKind::grid_mismatch, "compare_profiles needs profiles on the same grid");
  }
  ProfileComparison c;
  c.rescaled = rescale;
  if (rescale) {
    const double ib = b.integral();
    c.scale = ib != 0.0 ? a.integral() / ib : 1.0;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = trapezoid_weight(i, a.size());
    const double d = a.density[i] - c.scale * b.density[i];
    num += w * d * d;
    den += w * a.density[i] * a.density[i];
  }
  if (den == 0.0) {
    c.relative_l2 = num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return c;
  }
  c.relative_l2 = std::sqrt(num / den);
  return c;
}

// Two-tone phasor contrast 2 A1 A2 / (A1^2 + A2^2) generalized to n tones:
// maximum |sum| is sum A_k, minimum is max(0, 2 max A_k - sum A_k).
inline double drive_visibility(const std::vector<RfComponent>& fields, const AtomSpecies& species) {
  if (fields.size() < 2) return 0.0;
  double sum = 0.0, top = 0.0;
  for (const auto& f : fields) {
    const double a = effective_coupling(f, species);
    sum += a;
    top = std::max(top, a);
  }
  const double hi = sum * sum;
  const double lo = std::pow(std::max(0.0, 2.0 * top - sum), 2);
  return (hi - lo) / (hi + lo);
}

struct RfStreamReport {
  DetectorTrace trace{};  // drive column sampled at t - drive_delay
  double drive_delay = 0.0;
  double drive_visibility = 0.0;
  VisibilityReport stream{};
};

// Classical fall time from rest at the trap center to the detector.
inline double fall_time(double x_d, double x0, double g) { return std::sqrt(2.0 * std::max(0.0, x_d - x0) / g); }

// Pairs the drive intensity with the stream density at x_d. The drive column
// is delayed by drive_delay (typically fall_time) so both series line up.
inline RfStreamReport rf_vs_stream_report(const std::vector<RfComponent>& fields, const StreamResult& stream,
                                          double x_d, TimeWindow window, double drive_delay = 0.0,
                                          const AtomSpecies& species = AtomSpecies::rubidium87()) {
  StreamResult s = stream;
  s.rf = fields;
  RfStreamReport r;
  r.trace = detector_trace(s, x_d, species);
  r.drive_delay = drive_delay;
  for (std::size_t i = 0; i < r.trace.times.size(); ++i) {
    r.trace.drive[i] = drive_intensity(fields, r.trace.times[i] - drive_delay, species);
  }
  r.drive_visibility = drive_visibility(fields, species);
  r.stream = visibility(r.trace, window);
  return r;
}

// Probability current (hbar/m) Im(psi* d psi/dx) by central differences.
inline std::vector<double> flux(const ComplexField& f, double mass, double hbar) {
  const std::size_t n = f.size();
  std::vector<double> j(n, 0.0);
  const double dx = f.grid.dx();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const cplx d = (f.samples[i + 1] - f.samples[i - 1]) / (2.0 * dx);
    j[i] = hbar / mass * std::imag(std::conj(f.samples[i]) * d);
  }
  return j;
}

}  // namespace atomlaser
