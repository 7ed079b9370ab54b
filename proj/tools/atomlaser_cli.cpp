// Command-line front end: single runs, parameter sweeps and cross-engine
// comparisons. Exit codes: 0 ok, 2 invalid configuration, 3 numerical
// failure, 4 comparison over tolerance.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomlaser/checkpoint.hpp"
#include "atomlaser/config.hpp"
#include "atomlaser/presets.hpp"
#include "atomlaser/runner.hpp"

namespace fs = std::filesystem;
using namespace atomlaser;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitTolerance = 4;

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string manifest;
  std::string out = "atomlaser_out";
  std::string engine;
  unsigned jobs = 1;
  bool strict = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_manifest) {
  auto* cfg = cmd->add_option("--config", o.config, "INI run configuration");
  auto* pre = cmd->add_option("--preset", o.preset, "preset name: fig2 ... fig9");
  cfg->excludes(pre);
  if (with_manifest) {
    auto* man = cmd->add_option("--manifest", o.manifest, "rerun from a manifest written by an earlier run");
    man->excludes(cfg)->excludes(pre);
  }
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--engine", o.engine, "override the engine")->check(CLI::IsMember({"analytic", "numeric", "both"}));
  cmd->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_flag("--strict", o.strict, "treat warnings as errors");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::config_invalid, path + ": cannot open");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<RunSpec> load_specs(const CommonOptions& o) {
  std::vector<RunSpec> specs;
  if (!o.manifest.empty()) specs = {spec_from_manifest(read_text(o.manifest))};
  else if (!o.config.empty()) specs = {load_run_spec(o.config)};
  else if (!o.preset.empty()) specs = preset(o.preset);
  else throw Error(ErrorKind::config_invalid, "run: one of --config, --preset or --manifest is required");
  if (!o.engine.empty()) {
    for (auto& s : specs) {
      s.engine = detail::parse_engine(o.engine, "--engine");
      validate_run_spec(s);
    }
  }
  return specs;
}

void write_outcome(const fs::path& dir, const RunOutcome& r, const std::string& preset_name) {
  fs::create_directories(dir);
  for (const auto& f : r.files) detail::write_file_atomic(dir / f.name, f.content);
  detail::write_file_atomic(dir / (r.spec.name + ".manifest.json"), manifest_json(r, preset_name));
}

void print_summary(const RunOutcome& r) {
  std::cout << r.spec.name << ": " << r.files.size() << " output file(s)";
  if (!std::isnan(r.metrics.peak_density)) std::cout << ", peak density " << r.metrics.peak_density << " 1/m";
  if (!std::isnan(r.metrics.visibility)) std::cout << ", V = " << r.metrics.visibility;
  for (const auto& c : r.comparisons) {
    std::cout << ", rel. L2 (t = " << c.time << " s) = " << c.relative_l2;
  }
  std::cout << '\n';
}

int cmd_run(const CommonOptions& o, bool compare_mode) {
  auto specs = load_specs(o);
  if (compare_mode) {
    for (auto& s : specs) {
      s.engine = Engine::both;
      validate_run_spec(s);
    }
  }
  const auto results = execute_all(specs, o.jobs);
  bool ok = true;
  for (const auto& r : results) {
    write_outcome(o.out, r, o.preset);
    print_summary(r);
    ok = ok && r.compare_passed;
  }
  if (compare_mode && !ok) {
    std::cerr << "compare: relative L2 error above tolerance\n";
    return kExitTolerance;
  }
  return kExitOk;
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> v;
  for (const auto& s : raw) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
      x = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || !std::isfinite(x)) throw Error(ErrorKind::config_invalid, "--values: '" + s + "' is not a finite number");
    v.push_back(x);
  }
  if (v.empty()) throw Error(ErrorKind::config_invalid, "--values: at least one value is required");
  return v;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis, const std::vector<std::string>& raw_values) {
  const auto base = load_specs(o);
  if (base.size() != 1) {
    throw Error(ErrorKind::config_invalid, "sweep: the base configuration must describe a single run");
  }
  const auto values = parse_values(raw_values);
  const std::string ini = to_ini(base.front());
  std::vector<RunSpec> specs;
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto s = parse_run_spec_text(override_ini(ini, axis, detail::format_double(values[k])));
    s.name = base.front().name + ".sweep" + std::to_string(k + 1);
    specs.push_back(s);
  }
  const auto results = execute_all(specs, o.jobs);
  std::string summary = std::string("# atomlaser ") + kToolVersion + "\n# sweep axis=" + axis + "\n" +
                        "value,peak_density,outcoupled_norm,visibility\n";
  for (std::size_t k = 0; k < results.size(); ++k) {
    write_outcome(o.out, results[k], o.preset);
    const auto& m = results[k].metrics;
    summary += detail::sci(values[k]) + "," + detail::sci(m.peak_density) + "," + detail::sci(m.outcoupled_norm) + "," +
               detail::sci(m.visibility) + "\n";
  }
  fs::create_directories(o.out);
  detail::write_file_atomic(fs::path(o.out) / (base.front().name + ".sweep.csv"), summary);
  std::cout << "sweep " << axis << ": " << results.size() << " run(s), summary " << base.front().name << ".sweep.csv\n";
  return kExitOk;
}

int cmd_config(const CommonOptions& o) {
  for (const auto& s : load_specs(o)) std::cout << "; run " << s.name << "\n" << to_ini(s) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atomlaser: rf-outcoupled atom laser simulations"};
  app.set_version_flag("--version", std::string("atomlaser ") + kToolVersion);
  app.require_subcommand(1);

  CommonOptions run_opt, sweep_opt, cmp_opt, cfg_opt;
  auto* run = app.add_subcommand("run", "execute a configuration, preset or manifest");
  add_common(run, run_opt, true);
  auto* sweep = app.add_subcommand("sweep", "repeat a run over values of one parameter");
  add_common(sweep, sweep_opt, true);
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "parameter path section.key, e.g. rf.1.omega_rf_hz")->required();
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  auto* compare = app.add_subcommand("compare", "run both engines and compare the profiles");
  add_common(compare, cmp_opt, true);
  auto* config = app.add_subcommand("config", "print the fully resolved configuration");
  add_common(config, cfg_opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const CommonOptions& active = run->parsed()       ? run_opt
                                : sweep->parsed()   ? sweep_opt
                                : compare->parsed() ? cmp_opt
                                                    : cfg_opt;
  std::optional<ScopedWarningHandler> strict;
  if (active.strict) {
    strict.emplace([](std::string_view kind, std::string_view message) {
      throw Error(ErrorKind::strict_warning, std::string(kind) + ": " + std::string(message));
    });
  }
  try {
    if (run->parsed()) return cmd_run(run_opt, false);
    if (compare->parsed()) return cmd_run(cmp_opt, true);
    if (sweep->parsed()) return cmd_sweep(sweep_opt, axis, values);
    return cmd_config(cfg_opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::config_invalid ? kExitConfig : kExitNumeric;
  } catch (const boost::property_tree::ptree_error& e) {
    std::cerr << "error: config-invalid: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
