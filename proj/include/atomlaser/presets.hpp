#pragma once

// Read-only run bundles for the reference scenarios, built on the reference
// parameter set.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "atomlaser/config.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/physconfig.hpp"

namespace atomlaser {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
  return names;
}

namespace detail {

inline RunSpec base_spec(const std::string& name, std::vector<RfComponent> rf) {
  RunSpec s;
  s.name = name;
  s.experiment = reference_experiment(std::move(rf));
  s.grid = default_run_grid(s.experiment);
  return s;
}

inline OutputRequest profile_at(double t) {
  OutputRequest o;
  o.kind = OutputKind::profile;
  o.time = t;
  return o;
}

// Detector 100 um below the trap center, window covering the stream passage.
inline OutputRequest detector_output(const Experiment& e, OutputKind kind) {
  OutputRequest o;
  o.kind = kind;
  o.x = e.sag() + 100e-6;
  o.window = TimeWindow{5.0e-3, 9.0e-3};
  o.cadence = 2.0e-5;
  return o;
}

inline std::string khz_label(double f_hz) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fkHz", f_hz / 1e3);
  return buf;
}

inline std::vector<RfComponent> pi_pair(double f1_hz, double f2_hz) {
  return {reference_tone(f1_hz), reference_tone(f2_hz, std::numbers::pi)};
}

}  // namespace detail

inline std::vector<RunSpec> preset(const std::string& name) {
  using namespace detail;
  std::vector<RunSpec> runs;
  if (name == "fig2") {
    auto s = base_spec("fig2", {});
    OutputRequest o;
    o.kind = OutputKind::overlap_sweep;
    o.f_min_hz = 900e3;
    o.f_max_hz = 920e3;
    o.n_points = 401;
    s.outputs = {o};
    runs.push_back(s);
  } else if (name == "fig3") {
    auto s = base_spec("fig3", {});
    s.mode = RunMode::freefall;
    s.engine = Engine::both;
    s.compare_tolerance = 1e-3;
    for (double t : {0.0, 2e-3, 4e-3, 6e-3, 8e-3}) s.outputs.push_back(profile_at(t));
    runs.push_back(s);
  } else if (name == "fig4") {
    auto s = base_spec("fig4", {reference_tone(910e3)});
    for (int k = 1; k <= 8; ++k) s.outputs.push_back(profile_at(1e-3 * k));
    s.outputs.push_back(detector_output(s.experiment, OutputKind::trace));
    runs.push_back(s);
  } else if (name == "fig5") {
    for (int k = 0; k < 8; ++k) {
      const double f = 907e3 + 500.0 * k;
      auto s = base_spec("fig5_" + khz_label(f), {reference_tone(f)});
      s.outputs = {profile_at(8e-3)};
      runs.push_back(s);
    }
  } else if (name == "fig6") {
    auto s = base_spec("fig6", pi_pair(910e3, 911e3));
    for (int k = 1; k <= 8; ++k) s.outputs.push_back(profile_at(1e-3 * k));
    s.outputs.push_back(detector_output(s.experiment, OutputKind::visibility));
    runs.push_back(s);
  } else if (name == "fig7") {
    auto s = base_spec("fig7", pi_pair(909e3, 908e3));
    s.engine = Engine::both;
    s.outputs = {profile_at(8e-3)};
    runs.push_back(s);
  } else if (name == "fig8") {
    struct Case {
      const char* label;
      std::vector<RfComponent> rf;
    };
    const std::vector<Case> cases{{"903kHz", {reference_tone(903e3)}},
                                  {"901kHz", {reference_tone(901e3)}},
                                  {"902kHz", {reference_tone(902e3)}},
                                  {"joint", pi_pair(903e3, 901e3)}};
    for (const auto& c : cases) {
      auto s = base_spec(std::string("fig8_") + c.label, c.rf);
      s.engine = Engine::numeric;
      s.interacting = true;
      s.dt = 4e-7;  // split-step stability with the mean field on the default grid
      auto probe = detector_output(s.experiment, c.rf.size() == 2 ? OutputKind::visibility : OutputKind::trace);
      probe.window = TimeWindow{4.5e-3, 8.0e-3};  // the stream front leaves the default grid near 9 ms
      s.outputs = {profile_at(8e-3), probe};
      runs.push_back(s);
    }
  } else if (name == "fig9") {
    for (double f2 : {906e3, 908e3, 910e3}) {
      auto s = base_spec("fig9_911_" + khz_label(f2), pi_pair(911e3, f2));
      s.outputs = {profile_at(8e-3), detector_output(s.experiment, OutputKind::visibility)};
      runs.push_back(s);
    }
  } else {
    throw Error(ErrorKind::config_invalid, "preset: unknown name '" + name + "' (expected fig2 ... fig9)");
  }
  for (const auto& s : runs) validate_run_spec(s);
  return runs;
}

}  // namespace atomlaser
