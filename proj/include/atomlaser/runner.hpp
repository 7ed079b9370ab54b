#pragma once

// Executes a RunSpec with the selected engines and renders every requested
// output as deterministic text. Writing files is left to the caller.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/crc.hpp>
#include <json.hpp>

#include "atomlaser/airy_basis.hpp"
#include "atomlaser/analysis.hpp"
#include "atomlaser/analytic_model.hpp"
#include "atomlaser/config.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/gpe_solver.hpp"

namespace atomlaser {

inline constexpr const char* kToolVersion = ATOMLASER_VERSION;

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunMetrics {
  double peak_density = std::numeric_limits<double>::quiet_NaN();     // 1/m, first profile
  double outcoupled_norm = std::numeric_limits<double>::quiet_NaN();  // integral of the first profile
  double visibility = std::numeric_limits<double>::quiet_NaN();       // first visibility output
};

struct CompareEntry {
  std::size_t output = 0;  // 1-based output index
  double time = 0.0;
  double relative_l2 = 0.0;
};

struct RunOutcome {
  RunSpec spec;
  std::vector<OutputFile> files;
  RunMetrics metrics;
  std::vector<CompareEntry> comparisons;  // engine both only
  bool compare_passed = true;
  nlohmann::json derived;
};

inline std::uint32_t crc32_of(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline std::string crc32_hex(const std::string& bytes) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(bytes));
  return buf;
}

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

inline std::string csv_header(const std::string& description, const std::string& columns) {
  return std::string("# atomlaser ") + kToolVersion + "\n# " + description + "\n" + columns + "\n";
}

inline std::string profile_csv(const DensityProfile& p, const std::string& engine) {
  std::string out = csv_header("profile engine=" + engine + " t_s=" + sci(p.time), "x_m,density_per_m");
  for (std::size_t i = 0; i < p.size(); ++i) out += sci(p.grid.x(i)) + "," + sci(p.density[i]) + "\n";
  return out;
}

inline std::string trace_csv(const DetectorTrace& tr, double drive_delay, const std::string& engine) {
  std::string out = csv_header("trace engine=" + engine + " x_m=" + sci(tr.detector_x) +
                                   " drive_delay_s=" + sci(drive_delay),
                               "t_s,density_per_m,drive_intensity");
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    out += sci(tr.times[i]) + "," + sci(tr.density[i]) + "," + sci(tr.drive[i]) + "\n";
  }
  return out;
}

inline std::vector<double> sample_times(const TimeWindow& w, double cadence) {
  const auto n = static_cast<std::size_t>(std::llround((w.end - w.start) / cadence));
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = w.start + static_cast<double>(i) * cadence;
  return t;
}

// Snapshots of s at w.start, w.start + cadence, ... up to w.end.
inline StreamResult slice_stream(const StreamResult& s, const TimeWindow& w, double cadence, const std::string& key) {
  StreamResult out;
  out.engine = s.engine;
  out.rf = s.rf;
  std::size_t j = 0;
  for (double t : sample_times(w, cadence)) {
    const double tol = 1e-9 * std::max(1.0, cadence) + 1e-12;
    while (j < s.size() && s.times[j] < t - tol) ++j;
    if (j == s.size() || std::fabs(s.times[j] - t) > tol) {
      throw config_error(key, "requested time " + sci(t) + " s is not on the numeric snapshot cadence");
    }
    out.push(s.fields[j]);
  }
  return out;
}

inline bool is_multiple(double a, double b) {
  const double r = a / b;
  return std::fabs(r - std::round(r)) < 1e-6;
}

inline std::string output_key(std::size_t i, const char* field) {
  return "output." + std::to_string(i + 1) + "." + field;
}

inline ComplexField source_gaussian(const Experiment& e) {
  const double s = e.sigma0(), x0 = e.sag();
  return gaussian_field(Grid1D{x0 - 12.0 * s, x0 + 12.0 * s, 2049}, s, x0);
}

// Per-engine view of a finished run.
struct EngineResult {
  std::string engine;
  std::vector<std::optional<DensityProfile>> profiles;  // by output index
  std::vector<std::optional<RfStreamReport>> traces;    // trace and visibility outputs
};

inline DetectorTrace delayed_trace(const StreamResult& stream, double x_d, double delay, const Experiment& e) {
  auto tr = detector_trace(stream, x_d, e.species);
  for (std::size_t i = 0; i < tr.times.size(); ++i) tr.drive[i] = drive_intensity(e.rf, tr.times[i] - delay, e.species);
  return tr;
}

inline RfStreamReport make_report(const StreamResult& stream, const OutputRequest& o, const Experiment& e,
                                  bool need_visibility) {
  RfStreamReport r;
  r.drive_delay = fall_time(o.x, e.sag(), e.constants.g_earth);
  r.trace = delayed_trace(stream, o.x, r.drive_delay, e);
  r.drive_visibility = e.rf.empty() ? 0.0 : drive_visibility(e.rf, e.species);
  if (need_visibility) r.stream = visibility(r.trace, o.window);
  return r;
}

inline Grid1D detector_grid(double x, const Grid1D& g) {
  const double h = std::min(g.dx(), 1e-8);
  return Grid1D{x - h, x + h, 3};
}

inline EngineResult run_analytic(const RunSpec& s) {
  const auto& e = s.experiment;
  EngineResult r{"analytic", std::vector<std::optional<DensityProfile>>(s.outputs.size()),
                 std::vector<std::optional<RfStreamReport>>(s.outputs.size())};
  const auto rate = make_rate_function(e);
  const auto wp = FreeFallGaussian::from_experiment(e);
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto& o = s.outputs[i];
    if (o.kind == OutputKind::profile) {
      const auto f = s.mode == RunMode::freefall ? free_fall_field(wp, s.grid, o.time)
                                                 : outcoupled_convolution(rate, wp, o.time, s.grid);
      r.profiles[i] = density(f);
      // The analytic model assumes an undepleted trapped state.
      if (s.mode == RunMode::outcoupled) check_weak_coupling(r.profiles[i]->integral());
    } else if (o.kind == OutputKind::trace || o.kind == OutputKind::visibility) {
      const auto times = sample_times(o.window, o.cadence);
      const Grid1D dg = detector_grid(o.x, s.grid);
      StreamResult stream;
      if (s.mode == RunMode::freefall) {
        stream.engine = "analytic";
        for (double t : times) stream.push(free_fall_field(wp, dg, t));
      } else {
        ConvolutionOptions opt;
        opt.overflow_tolerance = std::numeric_limits<double>::infinity();
        stream = analytic_stream(e, times, dg, opt);
      }
      r.traces[i] = make_report(stream, o, e, o.kind == OutputKind::visibility);
    }
  }
  return r;
}

inline SpinorField numeric_initial_state(const RunSpec& s, nlohmann::json* derived) {
  const auto& e = s.experiment;
  if (s.mode == RunMode::freefall) {
    return SpinorField::from_component(0, gaussian_field(s.grid, e.sigma0(), e.sag()));
  }
  const int trapped = trapped_sublevel(e.species);
  if (!s.interacting) return SpinorField::from_component(trapped, gaussian_field(s.grid, e.sigma0(), e.sag()));
  const auto gs = ground_state_imaginary_time(e.trap, e.species, s.g1d(), s.grid, e.constants);
  if (derived) {
    (*derived)["ground_state_chemical_potential_J"] = gs.chemical_potential;
    (*derived)["ground_state_iterations"] = gs.iterations;
  }
  return SpinorField::from_component(trapped, gs.field);
}

inline EngineResult run_numeric(const RunSpec& s, nlohmann::json* derived) {
  const auto& e = s.experiment;
  EngineResult r{"numeric", std::vector<std::optional<DensityProfile>>(s.outputs.size()),
                 std::vector<std::optional<RfStreamReport>>(s.outputs.size())};
  EvolutionParams p;
  p.dt = s.dt;
  p.t_final = s.final_time();
  p.rotating_frame_omega = s.frame_omega();
  p.interaction_g1d = s.g1d();
  p.absorber = s.absorber;
  p.sink = OuterSink{e.sag(), s.sink_radius, s.sink_width, s.sink_strength};
  p.snapshot_interval = s.snapshot_interval;
  if (s.absorber.enabled()) p.overflow_tolerance = std::numeric_limits<double>::infinity();
  double cadence = 0.0, x_lo = s.grid.x_max, x_hi = s.grid.x_min;
  for (const auto& o : s.outputs) {
    if (o.kind != OutputKind::trace && o.kind != OutputKind::visibility) continue;
    cadence = cadence == 0.0 ? o.cadence : std::min(cadence, o.cadence);
    x_lo = std::min(x_lo, o.x);
    x_hi = std::max(x_hi, o.x);
  }
  if (cadence > 0.0) {
    const double pad = 2.0 * s.grid.dx();
    p.probe = ProbeWindow{std::max(s.grid.x_min, x_lo - pad), std::min(s.grid.x_max, x_hi + pad), cadence};
    // The probe cuts through the stream, so edge checks are meaningless there.
  }
  if (!is_multiple(p.t_final, p.dt)) throw config_error("evolution.t_final", "must be a multiple of evolution.dt");
  const auto initial = numeric_initial_state(s, derived);
  const std::vector<RfComponent> fields = s.mode == RunMode::freefall ? std::vector<RfComponent>{} : e.rf;
  const auto run = evolve(initial, fields, p, e.trap, e.species, e.constants);
  if (derived) {
    double drift = 0.0;
    for (double n : run.norm_history) drift = std::max(drift, std::fabs(n - run.norm_history.front()));
    (*derived)["numeric_steps"] = run.steps;
    (*derived)["numeric_max_norm_change"] = drift;
  }
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto& o = s.outputs[i];
    if (o.kind == OutputKind::profile) {
      const auto one = slice_stream(run.stream, TimeWindow{o.time, o.time}, s.snapshot_interval, output_key(i, "time"));
      r.profiles[i] = density(one.fields.front());
    } else if (o.kind == OutputKind::trace || o.kind == OutputKind::visibility) {
      if (!is_multiple(o.cadence, cadence)) {
        throw config_error(output_key(i, "cadence"), "numeric traces need cadences that are multiples of the finest one");
      }
      auto stream = slice_stream(run.probe, o.window, o.cadence, output_key(i, "window_start"));
      stream.rf = e.rf;
      r.traces[i] = make_report(stream, o, e, o.kind == OutputKind::visibility);
    }
  }
  return r;
}

inline std::string visibility_json(const RfStreamReport& r, const OutputRequest& o, const std::string& engine) {
  nlohmann::ordered_json j;
  j["tool"] = std::string("atomlaser ") + kToolVersion;
  j["engine"] = engine;
  j["detector_x"] = o.x;
  j["window"] = {o.window.start, o.window.end};
  j["V"] = r.stream.V;
  j["beat_hz"] = r.stream.beat_frequency / kTwoPi;
  j["phase_rad"] = r.stream.envelope_phase;
  j["periods"] = r.stream.periods;
  j["drive_visibility"] = r.drive_visibility;
  j["drive_delay_s"] = r.drive_delay;
  return j.dump(2) + "\n";
}

inline std::string overlap_sweep_csv(const RunSpec& s, const OutputRequest& o) {
  const auto& e = s.experiment;
  const auto phi = source_gaussian(e);
  const double E0 = e.E0();
  std::string out = csv_header("overlap-sweep E = E0 - hbar w_rf", "f_rf_hz,overlap_per_sqrt_J");
  std::vector<double> re(o.n_points);
  const double step = (o.f_max_hz - o.f_min_hz) / static_cast<double>(o.n_points - 1);
  parallel_for(o.n_points, [&](std::size_t k) {
    const double E = E0 - e.constants.hbar * kTwoPi * (o.f_min_hz + step * static_cast<double>(k));
    re[k] = overlap_numeric(phi, make_eigenstate(E, e.species, e.constants)).real();
  });
  for (std::size_t k = 0; k < o.n_points; ++k) {
    out += sci(o.f_min_hz + step * static_cast<double>(k)) + "," + sci(re[k]) + "\n";
  }
  return out;
}

inline std::string spectrum_csv(const RunSpec& s, const OutputRequest& o) {
  const auto& e = s.experiment;
  const auto phi0 = spectral_transform(source_gaussian(e), default_energy_grid(e), e.species, e.constants);
  const auto c = outcoupled_coefficients(make_rate_function(e), phi0, o.time);
  std::string out = csv_header("spectrum t_s=" + sci(o.time), "E_over_h_Hz,re_amplitude,im_amplitude");
  const double h = kTwoPi * e.constants.hbar;
  for (std::size_t k = 0; k < c.size(); ++k) {
    out += sci(c.energies[k] / h) + "," + sci(c.amplitudes[k].real()) + "," + sci(c.amplitudes[k].imag()) + "\n";
  }
  return out;
}

inline void require_basis_source(const RunSpec& s) {
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto k = s.outputs[i].kind;
    if ((k == OutputKind::spectrum || k == OutputKind::overlap_sweep) && s.interacting) {
      throw config_error(output_key(i, "type"), "energy-basis outputs use the non-interacting Gaussian source");
    }
  }
}

}  // namespace detail

inline nlohmann::json derived_quantities(const RunSpec& s) {
  const auto& e = s.experiment;
  const auto u = e.units();
  nlohmann::json d;
  d["sigma0_m"] = e.sigma0();
  d["x0_m"] = e.sag();
  d["length_l_m"] = u.length_l;
  d["tau_s_s"] = e.constants.hbar / (e.species.mass * e.constants.g_earth * e.sigma0());
  d["g1d_J_m"] = g1d_coefficient(e.species, e.trap.omega_y, e.trap.omega_z, e.atom_number, e.constants);
  d["g1d_used_J_m"] = s.g1d();
  d["predicted_resonance_hz"] = predict_resonance(e.trap, e.species, e.constants) / kTwoPi;
  d["E0_J"] = e.E0();
  return d;
}

inline RunOutcome execute(const RunSpec& spec) {
  validate_run_spec(spec);
  if (spec.mode == RunMode::freefall && !spec.experiment.rf.empty()) {
    throw detail::config_error("rf", "freefall mode takes no rf sections");
  }
  for (char ch : spec.name) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-' && ch != '.') {
      throw detail::config_error("run.name", "use only letters, digits, '.', '_' and '-'");
    }
  }
  detail::require_basis_source(spec);
  RunOutcome out;
  out.spec = spec;
  out.derived = derived_quantities(spec);
  std::vector<detail::EngineResult> engines;
  if (spec.engine != Engine::numeric) engines.push_back(detail::run_analytic(spec));
  if (spec.engine != Engine::analytic) engines.push_back(detail::run_numeric(spec, &out.derived));

  const auto base = [&](const std::string& engine, const char* kind, std::size_t i, const char* ext) {
    return spec.name + "." + (engine.empty() ? "" : engine + ".") + kind + "." + std::to_string(i + 1) + ext;
  };
  for (std::size_t i = 0; i < spec.outputs.size(); ++i) {
    const auto& o = spec.outputs[i];
    if (o.kind == OutputKind::overlap_sweep) {
      out.files.push_back({base("", "overlap", i, ".csv"), detail::overlap_sweep_csv(spec, o)});
    } else if (o.kind == OutputKind::spectrum) {
      out.files.push_back({base("", "spectrum", i, ".csv"), detail::spectrum_csv(spec, o)});
    }
    for (const auto& r : engines) {
      if (r.profiles[i]) out.files.push_back({base(r.engine, "profile", i, ".csv"), detail::profile_csv(*r.profiles[i], r.engine)});
      if (r.traces[i]) {
        out.files.push_back({base(r.engine, "trace", i, ".csv"),
                             detail::trace_csv(r.traces[i]->trace, r.traces[i]->drive_delay, r.engine)});
        if (o.kind == OutputKind::visibility) {
          out.files.push_back({base(r.engine, "visibility", i, ".json"), detail::visibility_json(*r.traces[i], o, r.engine)});
        }
      }
    }
  }
  // Metrics come from the first engine listed (analytic when present).
  const auto& primary = engines.front();
  for (std::size_t i = 0; i < spec.outputs.size(); ++i) {
    if (std::isnan(out.metrics.peak_density) && primary.profiles[i]) {
      out.metrics.peak_density = primary.profiles[i]->peak();
      out.metrics.outcoupled_norm = primary.profiles[i]->integral();
    }
    if (std::isnan(out.metrics.visibility) && spec.outputs[i].kind == OutputKind::visibility && primary.traces[i]) {
      out.metrics.visibility = primary.traces[i]->stream.V;
    }
  }
  if (engines.size() == 2) {
    nlohmann::ordered_json report;
    report["tool"] = std::string("atomlaser ") + kToolVersion;
    report["tolerance"] = spec.compare_tolerance;
    report["profiles"] = nlohmann::ordered_json::array();
    double worst = 0.0;
    for (std::size_t i = 0; i < spec.outputs.size(); ++i) {
      if (!engines[0].profiles[i]) continue;
      const auto c = compare_profiles(*engines[0].profiles[i], *engines[1].profiles[i]);
      out.comparisons.push_back({i + 1, spec.outputs[i].time, c.relative_l2});
      worst = std::max(worst, c.relative_l2);
      report["profiles"].push_back({{"output", i + 1}, {"time_s", spec.outputs[i].time}, {"relative_l2", c.relative_l2}});
    }
    out.compare_passed = worst <= spec.compare_tolerance;
    report["max_relative_l2"] = worst;
    report["pass"] = out.compare_passed;
    out.files.push_back({spec.name + ".compare.json", report.dump(2) + "\n"});
  }
  return out;
}

// Manifest describing a finished run; its "config" entry alone regenerates it.
inline std::string manifest_json(const RunOutcome& r, const std::string& preset = "") {
  const std::string ini = to_ini(r.spec);
  nlohmann::ordered_json m;
  m["tool"] = "atomlaser";
  m["version"] = kToolVersion;
  m["run"] = r.spec.name;
  if (!preset.empty()) m["preset"] = preset;
  m["engine"] = to_string(r.spec.engine);
  m["config_crc32"] = crc32_hex(ini);
  m["derived"] = r.derived;
  auto outputs = nlohmann::ordered_json::array();
  for (const auto& f : r.files) {
    outputs.push_back({{"file", f.name}, {"crc32", crc32_hex(f.content)}, {"bytes", f.content.size()}});
  }
  m["outputs"] = outputs;
  const auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  m["metrics"] = {{"peak_density_per_m", num(r.metrics.peak_density)},
                  {"outcoupled_norm", num(r.metrics.outcoupled_norm)},
                  {"visibility", num(r.metrics.visibility)}};
  m["config"] = ini;
  return m.dump(2) + "\n";
}

inline RunSpec spec_from_manifest(const std::string& manifest_text) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_invalid, std::string("manifest: ") + e.what());
  }
  if (!m.contains("config") || !m["config"].is_string()) {
    throw Error(ErrorKind::config_invalid, "manifest.config: missing resolved configuration");
  }
  const std::string ini = m["config"].get<std::string>();
  if (m.contains("config_crc32") && m["config_crc32"] != crc32_hex(ini)) {
    throw Error(ErrorKind::config_invalid, "manifest.config_crc32: does not match the embedded configuration");
  }
  return parse_run_spec_text(ini);
}

// Runs independent specs on up to `jobs` worker threads; results keep input order.
inline std::vector<RunOutcome> execute_all(const std::vector<RunSpec>& specs, unsigned jobs) {
  std::vector<RunOutcome> results(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        results[i] = execute(specs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(specs.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace atomlaser
