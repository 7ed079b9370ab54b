#pragma once

// INI run configuration. Sections: [run], [constants], [species], [trap],
// [condensate], [rf.N], [grid], [evolution], [output.N]. Keys carry SI units;
// every angular frequency key X also accepts X_hz (value times 2 pi).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "atomlaser/analysis.hpp"
#include "atomlaser/errors.hpp"
#include "atomlaser/gpe_solver.hpp"
#include "atomlaser/physconfig.hpp"

namespace atomlaser {

enum class Engine { analytic, numeric, both };
enum class RunMode { outcoupled, freefall };
enum class OutputKind { profile, trace, visibility, spectrum, overlap_sweep };

inline std::string to_string(Engine e) {
  switch (e) {
    case Engine::analytic: return "analytic";
    case Engine::numeric: return "numeric";
    case Engine::both: return "both";
  }
  return "analytic";
}

inline std::string to_string(RunMode m) { return m == RunMode::freefall ? "freefall" : "outcoupled"; }

inline std::string to_string(OutputKind k) {
  switch (k) {
    case OutputKind::profile: return "profile";
    case OutputKind::trace: return "trace";
    case OutputKind::visibility: return "visibility";
    case OutputKind::spectrum: return "spectrum";
    case OutputKind::overlap_sweep: return "overlap-sweep";
  }
  return "profile";
}

struct OutputRequest {
  OutputKind kind = OutputKind::profile;
  double time = 8.0e-3;                 // profile and spectrum
  double x = 0.0;                       // detector position, m
  TimeWindow window{5.0e-3, 9.0e-3};    // trace and visibility
  double cadence = 2.0e-5;              // trace sampling, s
  double f_min_hz = 900.0e3;            // overlap sweep
  double f_max_hz = 920.0e3;
  std::size_t n_points = 401;
};

struct RunSpec {
  std::string name = "run";
  Engine engine = Engine::analytic;
  RunMode mode = RunMode::outcoupled;
  double compare_tolerance = 0.05;
  Experiment experiment = reference_experiment();
  bool interacting = false;
  std::string transverse = "yz";  // trap axes entering g1d
  Grid1D grid{};
  double dt = 1.0e-6;
  double snapshot_interval = 1.0e-4;
  double rotating_frame_omega = 0.0;  // 0 selects omega_bias
  double t_final = 0.0;               // 0 selects the latest requested time
  Absorber absorber{};
  // Trapped and anti-trapped sink beyond this distance from the trap center; radius 0 disables it.
  double sink_radius = 20e-6;
  double sink_width = 10e-6;
  double sink_strength = 1e5;
  std::vector<OutputRequest> outputs{};

  double g1d() const {
    if (!interacting) return 0.0;
    const auto& t = experiment.trap;
    const auto pick = [&](char a) { return a == 'x' ? t.omega_x : a == 'y' ? t.omega_y : t.omega_z; };
    return g1d_coefficient(experiment.species, pick(transverse[0]), pick(transverse[1]), experiment.atom_number,
                           experiment.constants);
  }

  double frame_omega() const { return rotating_frame_omega > 0 ? rotating_frame_omega : experiment.trap.omega_bias; }

  double final_time() const {
    if (t_final > 0) return t_final;
    double t = 0.0;
    for (const auto& o : outputs) {
      if (o.kind == OutputKind::profile || o.kind == OutputKind::spectrum) t = std::max(t, o.time);
      if (o.kind == OutputKind::trace || o.kind == OutputKind::visibility) t = std::max(t, o.window.end);
    }
    return t;
  }
};

namespace detail {

using ptree = boost::property_tree::ptree;

inline Error config_error(const std::string& key, const std::string& what) {
  return Error(ErrorKind::config_invalid, key + ": " + what);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reads typed keys from one section and rejects unknown ones.
class SectionReader {
 public:
  SectionReader(std::string name, const ptree& tree) : name_(std::move(name)), tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return std::nullopt;
    return it->second.data();
  }

  std::optional<double> number(const std::string& key) {
    const auto s = raw(key);
    if (!s) return std::nullopt;
    try {
      std::size_t pos = 0;
      const double v = std::stod(*s, &pos);
      if (pos != s->size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw config_error(qualified(key), "expected a finite number, got '" + *s + "'");
    }
  }

  void read(const std::string& key, double& out) {
    if (auto v = number(key)) out = *v;
  }

  // key in rad/s or key_hz in Hz.
  void read_angular(const std::string& key, double& out) {
    const auto rad = number(key);
    const auto hz = number(key + "_hz");
    if (rad && hz) throw config_error(qualified(key), "give either " + key + " or " + key + "_hz, not both");
    if (rad) out = *rad;
    if (hz) out = kTwoPi * *hz;
  }

  void read(const std::string& key, std::size_t& out) {
    if (auto v = number(key)) {
      if (*v < 0 || std::floor(*v) != *v) throw config_error(qualified(key), "expected a non-negative integer");
      out = static_cast<std::size_t>(*v);
    }
  }

  void read(const std::string& key, int& out) {
    if (auto v = number(key)) {
      if (std::floor(*v) != *v) throw config_error(qualified(key), "expected an integer");
      out = static_cast<int>(*v);
    }
  }

  void read(const std::string& key, bool& out) {
    if (auto s = raw(key)) {
      if (*s == "true" || *s == "1" || *s == "yes") out = true;
      else if (*s == "false" || *s == "0" || *s == "no") out = false;
      else throw config_error(qualified(key), "expected true or false");
    }
  }

  void read(const std::string& key, std::string& out) {
    if (auto s = raw(key)) out = *s;
  }

  void finish() const {
    for (const auto& kv : tree_) {
      if (!used_.count(kv.first)) throw config_error(qualified(kv.first), "unknown key");
    }
  }

  std::string qualified(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  const ptree& tree_;
  std::set<std::string> used_;
};

inline int section_index(const std::string& section, const std::string& prefix) {
  const std::string digits = section.substr(prefix.size());
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
    throw config_error(section, "section index must be a positive integer");
  }
  const int n = std::stoi(digits);
  if (n < 1) throw config_error(section, "section index must be >= 1");
  return n;
}

inline Engine parse_engine(const std::string& s, const std::string& key) {
  if (s == "analytic") return Engine::analytic;
  if (s == "numeric") return Engine::numeric;
  if (s == "both") return Engine::both;
  throw config_error(key, "expected analytic, numeric or both");
}

inline OutputKind parse_output_kind(const std::string& s, const std::string& key) {
  if (s == "profile") return OutputKind::profile;
  if (s == "trace") return OutputKind::trace;
  if (s == "visibility") return OutputKind::visibility;
  if (s == "spectrum") return OutputKind::spectrum;
  if (s == "overlap-sweep") return OutputKind::overlap_sweep;
  throw config_error(key, "expected profile, trace, visibility, spectrum or overlap-sweep");
}

}  // namespace detail

// Default numeric grid for a run: [x0 - 30 um, x0 + 390 um], 16384 points.
inline Grid1D default_run_grid(const Experiment& e) { return default_numeric_grid(e); }

inline void validate_run_spec(const RunSpec& s) {
  using detail::config_error;
  try {
    s.experiment.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config_invalid, e.what());
  }
  if (s.outputs.empty()) throw config_error("output", "at least one [output.N] section is required");
  if (s.interacting && s.engine != Engine::numeric) {
    throw config_error("condensate.interacting", "interactions are modelled by the numeric engine only");
  }
  if (s.transverse.size() != 2 || s.transverse[0] == s.transverse[1] ||
      s.transverse.find_first_not_of("xyz") != std::string::npos) {
    throw config_error("condensate.transverse", "expected two distinct axes out of x, y, z");
  }
  if (s.experiment.species.F != 1 && s.engine != Engine::analytic) {
    throw config_error("species.F", "the numeric engine supports F = 1 only");
  }
  try {
    s.grid.validate(256);
  } catch (const Error& e) {
    throw config_error("grid", e.what());
  }
  if (!(s.dt > 0)) throw config_error("evolution.dt", "must be > 0");
  if (!(s.snapshot_interval > 0)) throw config_error("evolution.snapshot_interval", "must be > 0");
  if (s.sink_radius < 0 || s.sink_width < 0 || s.sink_strength < 0) {
    throw config_error("evolution.sink_radius", "sink radius, width and strength must be >= 0");
  }
  if (!(s.compare_tolerance > 0)) throw config_error("run.compare_tolerance", "must be > 0");
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto& o = s.outputs[i];
    const std::string key = "output." + std::to_string(i + 1);
    if ((o.kind == OutputKind::profile || o.kind == OutputKind::spectrum) && !(o.time >= 0)) {
      throw config_error(key + ".time", "must be >= 0");
    }
    if (o.kind == OutputKind::trace || o.kind == OutputKind::visibility) {
      if (!(o.window.end > o.window.start) || o.window.start < 0) {
        throw config_error(key + ".window_end", "window must satisfy 0 <= window_start < window_end");
      }
      if (!(o.cadence > 0)) throw config_error(key + ".cadence", "must be > 0");
      if (!(o.x > s.grid.x_min && o.x < s.grid.x_max)) throw config_error(key + ".x", "detector outside the grid");
    }
    if (o.kind == OutputKind::overlap_sweep && (!(o.f_max_hz > o.f_min_hz) || o.n_points < 2)) {
      throw config_error(key + ".f_max_hz", "needs f_max_hz > f_min_hz and n_points >= 2");
    }
    if (o.kind == OutputKind::spectrum && s.mode != RunMode::outcoupled) {
      throw config_error(key + ".type", "spectrum output needs mode = outcoupled");
    }
  }
}

inline RunSpec parse_run_spec(const boost::property_tree::ptree& pt) {
  using detail::config_error;
  using detail::SectionReader;
  RunSpec s;
  s.experiment.rf.clear();
  std::map<int, RfComponent> rf;
  std::map<int, OutputRequest> outputs;
  std::optional<double> x_lo, x_hi;
  std::size_t n_points = 0;

  // Physical sections first so that relative positions resolve against the final sag.
  std::vector<std::pair<std::string, const boost::property_tree::ptree*>> deferred;
  for (const auto& [section, tree] : pt) {
    if (!tree.data().empty()) throw config_error(section, "key outside any section");
    SectionReader r(section, tree);
    if (section == "run") {
      r.read("name", s.name);
      std::string engine = to_string(s.engine), mode = to_string(s.mode);
      r.read("engine", engine);
      s.engine = detail::parse_engine(engine, "run.engine");
      r.read("mode", mode);
      if (mode != "outcoupled" && mode != "freefall") throw config_error("run.mode", "expected outcoupled or freefall");
      s.mode = mode == "freefall" ? RunMode::freefall : RunMode::outcoupled;
      r.read("compare_tolerance", s.compare_tolerance);
    } else if (section == "constants") {
      auto& c = s.experiment.constants;
      r.read("hbar", c.hbar);
      r.read("g_earth", c.g_earth);
      r.read("bohr_magneton", c.bohr_magneton);
      r.read("atomic_mass_unit", c.atomic_mass_unit);
      r.read("bohr_radius", c.bohr_radius);
    } else if (section == "species" || section == "trap" || section == "condensate" || section == "grid" ||
               section == "evolution" || section.rfind("rf.", 0) == 0 || section.rfind("output.", 0) == 0) {
      deferred.emplace_back(section, &tree);
      continue;
    } else {
      throw config_error(section, "unknown section");
    }
    r.finish();
  }
  const auto& c = s.experiment.constants;
  s.experiment.species = AtomSpecies::rubidium87(c);
  for (const auto& [section, tree] : deferred) {
    SectionReader r(section, *tree);
    if (section == "species") {
      auto& sp = s.experiment.species;
      r.read("mass", sp.mass);
      if (auto u = r.number("mass_u")) sp.mass = *u * c.atomic_mass_unit;
      r.read("F", sp.F);
      r.read("g_F", sp.g_F);
      r.read("scattering_length", sp.scattering_length);
      if (auto a = r.number("scattering_length_a0")) sp.scattering_length = *a * c.bohr_radius;
    } else if (section == "trap") {
      auto& t = s.experiment.trap;
      r.read_angular("omega_x", t.omega_x);
      r.read_angular("omega_y", t.omega_y);
      r.read_angular("omega_z", t.omega_z);
      r.read_angular("omega_bias", t.omega_bias);
    } else if (section == "condensate") {
      r.read("atom_number", s.experiment.atom_number);
      r.read("interacting", s.interacting);
      r.read("transverse", s.transverse);
    }
    if (section == "species" || section == "trap" || section == "condensate") r.finish();
  }
  for (const auto& [section, tree] : deferred) {
    SectionReader r(section, *tree);
    if (section.rfind("rf.", 0) == 0) {
      const int n = detail::section_index(section, "rf.");
      RfComponent f = reference_tone(910e3);
      r.read_angular("peak_rabi", f.peak_rabi);
      r.read_angular("omega_rf", f.omega_rf);
      r.read("theta", f.theta);
      r.read("polarization_factor", f.polarization_factor);
      std::string env = "box";
      double start = 0.0, duration = 5e-3;
      r.read("envelope", env);
      r.read("start", start);
      r.read("duration", duration);
      if (env == "box") f.envelope = BoxEnvelope{start, duration};
      else if (env == "sine2") f.envelope = SineSquaredEnvelope{start, duration};
      else throw config_error(section + ".envelope", "expected box or sine2");
      try {
        f.validate();
      } catch (const Error& e) {
        throw config_error(section, e.what());
      }
      rf[n] = f;
    } else if (section == "grid") {
      if (auto v = r.number("x_min")) x_lo = *v;
      if (auto v = r.number("x_max")) x_hi = *v;
      r.read("n_points", n_points);
    } else if (section == "evolution") {
      r.read("dt", s.dt);
      r.read("snapshot_interval", s.snapshot_interval);
      r.read("t_final", s.t_final);
      r.read_angular("rotating_frame_omega", s.rotating_frame_omega);
      r.read("absorber_width", s.absorber.width);
      r.read("absorber_strength", s.absorber.strength);
      r.read("sink_radius", s.sink_radius);
      r.read("sink_width", s.sink_width);
      r.read("sink_strength", s.sink_strength);
    } else if (section.rfind("output.", 0) == 0) {
      const int n = detail::section_index(section, "output.");
      OutputRequest o;
      std::string type = "profile";
      r.read("type", type);
      o.kind = detail::parse_output_kind(type, section + ".type");
      r.read("time", o.time);
      const auto x = r.number("x");
      const auto below = r.number("x_below_trap");
      if (x && below) throw config_error(section + ".x", "give either x or x_below_trap, not both");
      o.x = x ? *x : s.experiment.sag() + below.value_or(100e-6);
      r.read("window_start", o.window.start);
      r.read("window_end", o.window.end);
      r.read("cadence", o.cadence);
      r.read("f_min_hz", o.f_min_hz);
      r.read("f_max_hz", o.f_max_hz);
      r.read("n_points", o.n_points);
      outputs[n] = o;
    } else {
      continue;
    }
    r.finish();
  }
  for (auto& [n, f] : rf) s.experiment.rf.push_back(f);
  for (auto& [n, o] : outputs) s.outputs.push_back(o);
  const Grid1D def = default_run_grid(s.experiment);
  s.grid = Grid1D{x_lo.value_or(def.x_min), x_hi.value_or(def.x_max), n_points ? n_points : def.n_points};
  validate_run_spec(s);
  return s;
}

inline RunSpec parse_run_spec_text(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::config_invalid, std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  return parse_run_spec(pt);
}

inline RunSpec load_run_spec(const std::string& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::config_invalid, path + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  return parse_run_spec(pt);
}

// Fully resolved configuration; parse_run_spec_text(to_ini(s)) reproduces s.
inline std::string to_ini(const RunSpec& s) {
  using detail::format_double;
  std::ostringstream os;
  const auto& e = s.experiment;
  os << "[run]\nname = " << s.name << "\nengine = " << to_string(s.engine) << "\nmode = " << to_string(s.mode)
     << "\ncompare_tolerance = " << format_double(s.compare_tolerance) << "\n\n";
  os << "[constants]\nhbar = " << format_double(e.constants.hbar) << "\ng_earth = " << format_double(e.constants.g_earth)
     << "\nbohr_magneton = " << format_double(e.constants.bohr_magneton)
     << "\natomic_mass_unit = " << format_double(e.constants.atomic_mass_unit)
     << "\nbohr_radius = " << format_double(e.constants.bohr_radius) << "\n\n";
  os << "[species]\nmass = " << format_double(e.species.mass) << "\nF = " << e.species.F
     << "\ng_F = " << format_double(e.species.g_F)
     << "\nscattering_length = " << format_double(e.species.scattering_length) << "\n\n";
  os << "[trap]\nomega_x = " << format_double(e.trap.omega_x) << "\nomega_y = " << format_double(e.trap.omega_y)
     << "\nomega_z = " << format_double(e.trap.omega_z) << "\nomega_bias = " << format_double(e.trap.omega_bias)
     << "\n\n";
  os << "[condensate]\natom_number = " << format_double(e.atom_number)
     << "\ninteracting = " << (s.interacting ? "true" : "false") << "\ntransverse = " << s.transverse << "\n\n";
  for (std::size_t i = 0; i < e.rf.size(); ++i) {
    const auto& f = e.rf[i];
    os << "[rf." << i + 1 << "]\npeak_rabi = " << format_double(f.peak_rabi)
       << "\nomega_rf = " << format_double(f.omega_rf) << "\ntheta = " << format_double(f.theta)
       << "\npolarization_factor = " << format_double(f.polarization_factor)
       << "\nenvelope = " << envelope_name(f.envelope) << "\nstart = " << format_double(envelope_start(f.envelope))
       << "\nduration = " << format_double(envelope_duration(f.envelope)) << "\n\n";
  }
  os << "[grid]\nx_min = " << format_double(s.grid.x_min) << "\nx_max = " << format_double(s.grid.x_max)
     << "\nn_points = " << s.grid.n_points << "\n\n";
  os << "[evolution]\ndt = " << format_double(s.dt) << "\nsnapshot_interval = " << format_double(s.snapshot_interval)
     << "\nt_final = " << format_double(s.t_final)
     << "\nrotating_frame_omega = " << format_double(s.rotating_frame_omega)
     << "\nabsorber_width = " << format_double(s.absorber.width)
     << "\nabsorber_strength = " << format_double(s.absorber.strength)
     << "\nsink_radius = " << format_double(s.sink_radius)
     << "\nsink_width = " << format_double(s.sink_width)
     << "\nsink_strength = " << format_double(s.sink_strength) << "\n";
  for (std::size_t i = 0; i < s.outputs.size(); ++i) {
    const auto& o = s.outputs[i];
    os << "\n[output." << i + 1 << "]\ntype = " << to_string(o.kind) << "\ntime = " << format_double(o.time)
       << "\nx = " << format_double(o.x) << "\nwindow_start = " << format_double(o.window.start)
       << "\nwindow_end = " << format_double(o.window.end) << "\ncadence = " << format_double(o.cadence)
       << "\nf_min_hz = " << format_double(o.f_min_hz) << "\nf_max_hz = " << format_double(o.f_max_hz)
       << "\nn_points = " << o.n_points << "\n";
  }
  return os.str();
}

// Replaces one "section.key" entry of an INI text; used by parameter sweeps.
inline std::string override_ini(const std::string& text, const std::string& path, const std::string& value) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  boost::property_tree::ini_parser::read_ini(is, pt);
  const auto dot = path.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == path.size()) {
    throw Error(ErrorKind::config_invalid, path + ": sweep axis must look like section.key");
  }
  const std::string section = path.substr(0, dot), key = path.substr(dot + 1);
  auto it = pt.find(section);
  if (it == pt.not_found()) throw Error(ErrorKind::config_invalid, path + ": no such section");
  auto& tree = it->second;
  // Swapping between X and X_hz spellings keeps a single definition.
  const std::string twin = key.size() > 3 && key.compare(key.size() - 3, 3, "_hz") == 0 ? key.substr(0, key.size() - 3)
                                                                                          : key + "_hz";
  if (tree.find(key) == tree.not_found() && tree.find(twin) == tree.not_found()) {
    throw Error(ErrorKind::config_invalid, path + ": no such key");
  }
  tree.erase(twin);
  tree.put(boost::property_tree::ptree::path_type(key, '\0'), value);
  std::ostringstream os;
  boost::property_tree::ini_parser::write_ini(os, pt);
  return os.str();
}

}  // namespace atomlaser
