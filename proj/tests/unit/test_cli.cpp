#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "atomlaser/config.hpp"
#include "atomlaser/presets.hpp"
#include "atomlaser/runner.hpp"

using namespace atomlaser;
namespace fs = std::filesystem;

namespace {

// Small analytic scenario: one 910 kHz tone, a profile and a detector trace.
const char* kSmallConfig = R"([run]
name = small
engine = analytic

[rf.1]
omega_rf_hz = 910e3
peak_rabi_hz = 50
polarization_factor = 0.70710678118654757
envelope = box
start = 0
duration = 1e-3

[grid]
x_min = -1e-5
x_max = 8e-5
n_points = 2048

[output.1]
type = profile
time = 1.5e-3

[output.2]
type = trace
x_below_trap = 20e-6
window_start = 1.5e-3
window_end = 2.5e-3
cadence = 5e-5
)";

std::string with(const std::string& base, const std::string& extra) { return base + "\n" + extra + "\n"; }

ErrorKind kind_of(const std::string& text) {
  try {
    parse_run_spec_text(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a configuration error";
  return ErrorKind::precondition;
}

std::string message_of(const std::string& text) {
  try {
    parse_run_spec_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("atomlaser_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

struct CliResult {
  int code;
  std::string output;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(ATOMLASER_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

// Analytic-only outputs never use the numeric grid resolution, so a coarse
// both-engine scenario stays cheap.
std::string both_engine_config(const std::string& rf, double tolerance) {
  return std::string("[run]\nname = both\nengine = both\ncompare_tolerance = ") + detail::format_double(tolerance) +
         "\n\n" + rf + "[grid]\nx_min = -1e-5\nx_max = 8e-5\nn_points = 2048\n\n[output.1]\ntype = profile\ntime = 1e-3\n";
}

const char* kShortTone = "[rf.1]\nomega_rf_hz = 910e3\nduration = 5e-4\n\n";

}  // namespace

TEST(Config, ParsesUnitsAndAliases) {
  const auto s = parse_run_spec_text(kSmallConfig);
  EXPECT_EQ(s.name, "small");
  EXPECT_EQ(s.engine, Engine::analytic);
  ASSERT_EQ(s.experiment.rf.size(), 1u);
  EXPECT_NEAR(s.experiment.rf[0].omega_rf, kTwoPi * 910e3, 1e-6);
  EXPECT_NEAR(s.experiment.rf[0].peak_rabi, kTwoPi * 50.0, 1e-12);
  EXPECT_EQ(envelope_duration(s.experiment.rf[0].envelope), 1e-3);
  ASSERT_EQ(s.outputs.size(), 2u);
  EXPECT_EQ(s.outputs[1].kind, OutputKind::trace);
  EXPECT_NEAR(s.outputs[1].x, s.experiment.sag() + 20e-6, 1e-15);
  EXPECT_EQ(s.grid.n_points, 2048u);
}

TEST(Config, DefaultsFollowTheReferenceParameters) {
  const auto s = parse_run_spec_text("[output.1]\ntype = profile\ntime = 1e-3\n");
  const auto ref = reference_experiment();
  EXPECT_EQ(s.experiment.trap.omega_x, ref.trap.omega_x);
  EXPECT_EQ(s.experiment.species.mass, ref.species.mass);
  EXPECT_TRUE(s.grid.same_as(default_numeric_grid(ref)));
}

TEST(Config, RejectsUnknownKeysByName) {
  EXPECT_EQ(kind_of(with(kSmallConfig, "[trap]\nomega_q = 3")), ErrorKind::config_invalid);
  EXPECT_NE(message_of(with(kSmallConfig, "[trap]\nomega_q = 3")).find("trap.omega_q"), std::string::npos);
  EXPECT_NE(message_of(with(kSmallConfig, "[laser]\npower = 1")).find("laser"), std::string::npos);
  EXPECT_NE(message_of(with(kSmallConfig, "[rf.2]\nomega_rf_hz = 9e5\nomega_rf = 1")).find("rf.2.omega_rf"),
            std::string::npos);
  EXPECT_NE(message_of(with(kSmallConfig, "[species]\nmass = heavy")).find("species.mass"), std::string::npos);
  EXPECT_NE(message_of(with(kSmallConfig, "[rf.x]\ntheta = 1")).find("rf.x"), std::string::npos);
}

TEST(Config, RejectsEmptyOutputList) {
  const std::string text = "[rf.1]\nomega_rf_hz = 910e3\n";
  EXPECT_EQ(kind_of(text), ErrorKind::config_invalid);
  EXPECT_NE(message_of(text).find("output"), std::string::npos);
}

TEST(Config, RejectsAnalyticInteractions) {
  EXPECT_NE(message_of(with(kSmallConfig, "[condensate]\ninteracting = true")).find("condensate.interacting"),
            std::string::npos);
}

TEST(Config, ResolvedIniRoundTrips) {
  for (const auto& name : preset_names()) {
    for (const auto& s : preset(name)) {
      const std::string ini = to_ini(s);
      EXPECT_EQ(to_ini(parse_run_spec_text(ini)), ini) << s.name;
    }
  }
}

TEST(Config, OverrideReplacesOneKey) {
  const std::string ini = to_ini(parse_run_spec_text(kSmallConfig));
  const auto s = parse_run_spec_text(override_ini(ini, "rf.1.omega_rf_hz", "908000"));
  EXPECT_NEAR(s.experiment.rf[0].omega_rf, kTwoPi * 908e3, 1e-6);
  EXPECT_THROW(override_ini(ini, "rf.1.nope", "1"), Error);
  EXPECT_THROW(override_ini(ini, "rf.7.theta", "1"), Error);
}

TEST(Presets, PinReferenceParameters) {
  const auto fig5 = preset("fig5");
  ASSERT_EQ(fig5.size(), 8u);
  for (std::size_t k = 0; k < fig5.size(); ++k) {
    const auto& rf = fig5[k].experiment.rf;
    ASSERT_EQ(rf.size(), 1u);
    EXPECT_NEAR(rf[0].omega_rf / kTwoPi, 907e3 + 500.0 * k, 1e-6);
    EXPECT_NEAR(rf[0].peak_rabi / kTwoPi, 50.0, 1e-12);
    EXPECT_NEAR(rf[0].polarization_factor, 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_TRUE(is_box(rf[0].envelope));
    EXPECT_EQ(envelope_duration(rf[0].envelope), 5e-3);
    EXPECT_EQ(fig5[k].outputs.front().time, 8e-3);
  }
  const auto fig7 = preset("fig7").front();
  EXPECT_EQ(fig7.engine, Engine::both);
  EXPECT_NEAR(fig7.experiment.rf[1].theta - fig7.experiment.rf[0].theta, std::numbers::pi, 1e-15);
  const auto fig8 = preset("fig8");
  ASSERT_EQ(fig8.size(), 4u);
  for (const auto& s : fig8) EXPECT_TRUE(s.interacting);
  EXPECT_EQ(fig8.back().experiment.rf.size(), 2u);
  EXPECT_EQ(preset("fig9").size(), 3u);
  EXPECT_THROW(preset("fig1"), Error);
}

TEST(Runner, OutputsAreDeterministic) {
  const auto spec = parse_run_spec_text(kSmallConfig);
  const auto a = execute(spec);
  const auto b = execute(spec);
  ASSERT_EQ(a.files.size(), 2u);
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].name, b.files[i].name);
    EXPECT_EQ(a.files[i].content, b.files[i].content);
  }
  EXPECT_EQ(manifest_json(a), manifest_json(b));
  EXPECT_EQ(a.files[0].content.rfind("# atomlaser ", 0), 0u);
  EXPECT_NE(a.files[0].content.find("\nx_m,density_per_m\n"), std::string::npos);
  EXPECT_NE(a.files[1].content.find("\nt_s,density_per_m,drive_intensity\n"), std::string::npos);
}

TEST(Runner, ManifestAloneRegeneratesOutputs) {
  const auto r = execute(parse_run_spec_text(kSmallConfig));
  const auto m = nlohmann::json::parse(manifest_json(r));
  for (const char* key : {"sigma0_m", "x0_m", "length_l_m", "tau_s_s", "g1d_J_m", "predicted_resonance_hz"}) {
    EXPECT_TRUE(m["derived"].contains(key)) << key;
  }
  EXPECT_EQ(m["config_crc32"], crc32_hex(m["config"].get<std::string>()));
  const auto again = execute(spec_from_manifest(manifest_json(r)));
  ASSERT_EQ(again.files.size(), r.files.size());
  for (std::size_t i = 0; i < r.files.size(); ++i) {
    EXPECT_EQ(again.files[i].content, r.files[i].content);
    EXPECT_EQ(m["outputs"][i]["crc32"], crc32_hex(again.files[i].content));
  }
  auto tampered = m;
  tampered["config"] = m["config"].get<std::string>() + "\n";
  EXPECT_THROW(spec_from_manifest(tampered.dump()), Error);
}

TEST(Runner, CouplingsOffGiveZeroStreamsAndZeroError) {
  const auto r = execute(parse_run_spec_text(both_engine_config("", 0.05)));
  ASSERT_EQ(r.comparisons.size(), 1u);
  EXPECT_EQ(r.comparisons[0].relative_l2, 0.0);
  EXPECT_TRUE(r.compare_passed);
  EXPECT_EQ(r.metrics.peak_density, 0.0);
}

TEST(Runner, BothEnginesAgreeOnShortPulse) {
  const auto r = execute(parse_run_spec_text(both_engine_config(kShortTone, 0.05)));
  ASSERT_EQ(r.comparisons.size(), 1u);
  EXPECT_LT(r.comparisons[0].relative_l2, 0.05);
  EXPECT_GT(r.metrics.peak_density, 0.0);
}

TEST(Runner, ConcurrentRunsMatchSequentialRuns) {
  std::vector<RunSpec> specs;
  for (double f : {909e3, 910e3, 911e3}) {
    auto s = parse_run_spec_text(kSmallConfig);
    s.experiment.rf[0].omega_rf = kTwoPi * f;
    specs.push_back(s);
  }
  const auto seq = execute_all(specs, 1);
  const auto par = execute_all(specs, 3);
  for (std::size_t i = 0; i < specs.size(); ++i) EXPECT_EQ(seq[i].files[0].content, par[i].files[0].content);
}

TEST(Cli, RunWritesOutputsAndManifest) {
  const auto dir = fresh_dir("run");
  write_file(dir / "small.ini", kSmallConfig);
  const auto r = cli("run --config " + (dir / "small.ini").string() + " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "small.analytic.profile.1.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "small.analytic.trace.2.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "small.manifest.json"));
  for (const auto& e : fs::directory_iterator(dir / "out")) EXPECT_NE(e.path().extension(), ".tmp");

  const auto again = cli("run --manifest " + (dir / "out" / "small.manifest.json").string() + " --out " +
                         (dir / "again").string());
  ASSERT_EQ(again.code, 0) << again.output;
  EXPECT_EQ(read_file(dir / "again" / "small.analytic.profile.1.csv"), read_file(dir / "out" / "small.analytic.profile.1.csv"));
}

TEST(Cli, PresetEmitsOverlapCurve) {
  const auto dir = fresh_dir("fig2");
  const auto r = cli("run --preset fig2 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream is(read_file(dir / "fig2.overlap.1.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("# atomlaser", 0), 0u);
  std::getline(is, line);
  std::getline(is, line);
  EXPECT_EQ(line, "f_rf_hz,overlap_per_sqrt_J");
  double f_first = 0.0, f_last = 0.0, v = 0.0;
  std::size_t rows = 0;
  char comma;
  while (is >> f_last >> comma >> v) {
    if (rows++ == 0) f_first = f_last;
  }
  EXPECT_EQ(rows, 401u);
  EXPECT_EQ(f_first, 900e3);
  EXPECT_EQ(f_last, 920e3);
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("codes");
  write_file(dir / "bad.ini", with(kSmallConfig, "[trap]\nomega_q = 3"));
  const auto bad = cli("run --config " + (dir / "bad.ini").string() + " --out " + dir.string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("trap.omega_q"), std::string::npos);

  EXPECT_EQ(cli("run --preset fig42 --out " + dir.string()).code, 2);
  EXPECT_EQ(cli("run --config /nonexistent.ini --out " + dir.string()).code, 2);

  // Three-point grid over the detector only: the analytic stream overflows it.
  write_file(dir / "overflow.ini", "[grid]\nx_min = 9e-6\nx_max = 1.1e-5\nn_points = 300\n\n[rf.1]\nomega_rf_hz = 910e3\n\n"
                                    "[output.1]\ntype = profile\ntime = 2e-3\n");
  EXPECT_EQ(cli("run --config " + (dir / "overflow.ini").string() + " --out " + dir.string()).code, 3);

}

TEST(Cli, StrictTurnsWarningsIntoFailures) {
  const auto dir = fresh_dir("strict");
  std::string strong = kSmallConfig;
  strong.replace(strong.find("peak_rabi_hz = 50"), 17, "peak_rabi_hz = 3000");
  write_file(dir / "strong.ini", strong);
  const auto lenient = cli("run --config " + (dir / "strong.ini").string() + " --out " + dir.string());
  EXPECT_EQ(lenient.code, 0) << lenient.output;
  EXPECT_NE(lenient.output.find("weak-coupling"), std::string::npos);
  const auto strict = cli("run --strict --config " + (dir / "strong.ini").string() + " --out " + dir.string());
  EXPECT_EQ(strict.code, 3) << strict.output;
}

TEST(Cli, CompareExitsFourOverTolerance) {
  const auto dir = fresh_dir("compare");
  write_file(dir / "loose.ini", both_engine_config(kShortTone, 0.05));
  write_file(dir / "tight.ini", both_engine_config(kShortTone, 1e-12));
  EXPECT_EQ(cli("compare --config " + (dir / "loose.ini").string() + " --out " + dir.string()).code, 0);
  EXPECT_EQ(cli("compare --config " + (dir / "tight.ini").string() + " --out " + dir.string()).code, 4);
  const auto report = nlohmann::json::parse(read_file(dir / "both.compare.json"));
  EXPECT_FALSE(report["pass"].get<bool>());
}

TEST(Cli, SweepSummaryFollowsOverlapOrdering) {
  const auto dir = fresh_dir("sweep");
  std::string cfg = kSmallConfig;
  cfg.replace(cfg.find("duration = 1e-3"), 15, "duration = 3e-3");
  cfg.replace(cfg.find("time = 1.5e-3"), 13, "time = 3e-3");
  write_file(dir / "base.ini", cfg);
  const auto r = cli("sweep --config " + (dir / "base.ini").string() +
                     " --axis rf.1.omega_rf_hz --values 908e3,909e3,910e3 --jobs 2 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream is(read_file(dir / "small.sweep.csv"));
  std::string line;
  for (int k = 0; k < 3; ++k) std::getline(is, line);
  EXPECT_EQ(line, "value,peak_density,outcoupled_norm,visibility");
  std::vector<double> peaks;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string value, peak;
    std::getline(ls, value, ',');
    std::getline(ls, peak, ',');
    peaks.push_back(std::stod(peak));
  }
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_LT(peaks[0], peaks[1]);
  EXPECT_LT(peaks[1], peaks[2]);

  // A single-value sweep reproduces the plain run.
  const auto one = cli("sweep --config " + (dir / "base.ini").string() + " --axis rf.1.omega_rf_hz --values 910e3 --out " +
                       (dir / "one").string());
  ASSERT_EQ(one.code, 0) << one.output;
  ASSERT_EQ(cli("run --config " + (dir / "base.ini").string() + " --out " + (dir / "plain").string()).code, 0);
  EXPECT_EQ(read_file(dir / "one" / "small.sweep1.analytic.profile.1.csv"),
            read_file(dir / "plain" / "small.analytic.profile.1.csv"));
  EXPECT_EQ(cli("sweep --config " + (dir / "base.ini").string() + " --axis rf.1.omega_rf_hz --values nan --out " +
                dir.string())
                .code,
            2);
}
