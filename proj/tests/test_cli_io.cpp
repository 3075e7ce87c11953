#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <limits>
#include <string>

#include "ndepr/ndepr.hpp"

using namespace ndepr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto p = fs::temp_directory_path() /
           ("ndepr_test_" + std::to_string(::getpid()) + "_" + info->name() + (tag.empty() ? "" : "_" + tag));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NDEPR_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const char* kSmallSim = R"({
  "sensor": {"gamma2_nv_mhz": 4.0},
  "target": {"kind": "lines", "lines_mhz": [130.0, 148.0], "gamma2_mhz": 1.0},
  "coupling": {"d_zx_mhz": 1.0},
  "drive": {"mode": "amplitude_modulated", "kappa": 0.5},
  "sweep": {"f_start_mhz": 110.0, "f_stop_mhz": 170.0, "f_step_mhz": 0.5},
  "averaging": {"n_samples": 3000, "seed": 11},
  "output": {"basename": "avg"}
})";

}  // namespace

// ---------------------------------------------------------------------------
// CSV

TEST(SpectrumCsv, RoundTripIsExact) {
  Spectrum s;
  const double xs[] = {0.1, 1.0 / 3.0, 2.0, 1e3 + 1e-9, 5e5};
  const double cs[] = {-0.0, 1e-300, std::nextafter(1.0, 2.0), -2.5e-17, 0.1 + 0.2};
  for (int i = 0; i < 5; ++i) s.points.push_back({xs[i], cs[i], cs[i] * cs[i] + 1e-320});
  const auto back = spectrum_from_csv(spectrum_to_csv(s));
  ASSERT_EQ(back.points.size(), s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    EXPECT_TRUE(same_bits(back.points[i].x, s.points[i].x)) << i;
    EXPECT_TRUE(same_bits(back.points[i].contrast, s.points[i].contrast)) << i;
    EXPECT_TRUE(same_bits(back.points[i].stderr_, s.points[i].stderr_)) << i;
  }
  EXPECT_EQ(spectrum_to_csv(back), spectrum_to_csv(s));
}

TEST(SpectrumCsv, HeaderIsExact) {
  Spectrum s;
  s.points.push_back({1.0, 0.5, 0.0});
  EXPECT_EQ(spectrum_to_csv(s).substr(0, spectrum_to_csv(s).find('\n')), "sweep_value,contrast,stderr");
}

TEST(SpectrumCsv, MalformedRowsNameRowAndColumn) {
  const std::string hdr = "sweep_value,contrast,stderr\n";
  auto msg = message_of([&] { spectrum_from_csv(hdr + "1,0.1,0\n2,abc,0\n", "d.csv"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("contrast"), std::string::npos) << msg;
  msg = message_of([&] { spectrum_from_csv(hdr + "1,0.1,0\n2,0.2\n", "d.csv"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("expected 3 fields"), std::string::npos) << msg;
  msg = message_of([&] { spectrum_from_csv(hdr + "1,0.1,0\n1,0.2,0\n", "d.csv"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("increasing"), std::string::npos) << msg;
  msg = message_of([&] { spectrum_from_csv(hdr + "1,nan,0\n", "d.csv"); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  msg = message_of([&] { spectrum_from_csv("sweep_value,signal,stderr\n1,2,3\n", "d.csv"); });
  EXPECT_NE(msg.find("row 1, column 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'contrast'"), std::string::npos) << msg;
  EXPECT_THROW(spectrum_from_csv(hdr), InvalidInput);
  EXPECT_THROW(spectrum_from_csv(""), InvalidInput);
}

TEST(SpectrumCsv, ToleratesTrailingBlankLineAndCrlf) {
  const auto s = spectrum_from_csv("sweep_value,contrast,stderr\r\n1,0.5,0\r\n2,0.25,0.1\r\n\r\n");
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_EQ(s.points[1].stderr_, 0.1);
}

TEST(DurableWrite, ReplacesAtomicallyAndReportsFailure) {
  const auto dir = fresh_dir("");
  const auto f = dir / "sub" / "x.txt";
  write_file_durable(f, "one");
  write_file_durable(f, "two");
  EXPECT_EQ(read_file(f), "two");
  EXPECT_FALSE(fs::exists(f.string() + ".tmp"));
  EXPECT_THROW(write_file_durable(f / "y.txt", "z"), IoError);  // parent is a regular file
  EXPECT_THROW(read_file(dir / "missing"), IoError);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, UnknownKeysAreErrorsWithPath) {
  auto msg = message_of([] { parse_experiment_config(R"({"sensor": {"gama1_mhz": 0}})", "c.json"); });
  EXPECT_NE(msg.find("sensor.gama1_mhz: unknown key"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config(R"({"sensr": {}})", "c.json"); });
  EXPECT_NE(msg.find("sensr: unknown key"), std::string::npos) << msg;
  // A key that belongs to another drive mode is unknown in this one.
  msg = message_of([] { parse_experiment_config(R"({"drive": {"mode": "direct", "kappa": 0.5}})", "c.json"); });
  EXPECT_NE(msg.find("drive.kappa: unknown key"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorsReportLineAndColumn) {
  const std::string text = "{\n  \"sensor\": {\n    \"gamma2_nv_mhz\": 4,,\n  }\n}\n";
  const auto msg = message_of([&] { parse_experiment_config(text, "c.json"); });
  EXPECT_NE(msg.find("c.json: line 3, column"), std::string::npos) << msg;
  EXPECT_NE(msg.find("syntax error"), std::string::npos) << msg;
}

TEST(Config, FieldDiagnostics) {
  auto msg = message_of([] { parse_experiment_config(R"({"sensor": {"gamma2_nv_mhz": "12"}})", "c.json"); });
  EXPECT_NE(msg.find("sensor.gamma2_nv_mhz: expected a number"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config(R"({"target": {"kind": "lines"}})", "c.json"); });
  EXPECT_NE(msg.find("target.lines_mhz: required key is missing"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config(R"({"drive": {"mode": "am"}})", "c.json"); });
  EXPECT_NE(msg.find("drive.mode"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config(R"({"averaging": {"seed": -3}})", "c.json"); });
  EXPECT_NE(msg.find("averaging.seed: must be non-negative"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config(R"({"sensor": {}, "sensor": {}})", "c.json"); });
  EXPECT_NE(msg.find("duplicate key 'sensor'"), std::string::npos) << msg;
  msg = message_of([] { parse_experiment_config("[1, 2]", "c.json"); });
  EXPECT_NE(msg.find("top level"), std::string::npos) << msg;
}

TEST(Config, SweepInvariants) {
  EXPECT_THROW(parse_experiment_config(R"({"sweep": {"f_start_mhz": 10, "f_stop_mhz": 10, "f_step_mhz": 1}})"),
               InvalidInput);
  EXPECT_THROW(parse_experiment_config(R"({"sweep": {"f_start_mhz": 10, "f_stop_mhz": 20, "f_step_mhz": 0}})"),
               InvalidInput);
  EXPECT_THROW(parse_experiment_config(R"({"sweep": {"f_start_mhz": 10, "f_stop_mhz": 20}})"), InvalidInput);
  EXPECT_THROW(parse_experiment_config(R"({"sweep": {}})"), InvalidInput);
  // Direct drive must sweep B1.
  const auto msg = message_of([] {
    parse_experiment_config(R"({"drive": {"mode": "direct"}, "sweep": {"f_start_mhz": 1, "f_stop_mhz": 2, "f_step_mhz": 1}})");
  });
  EXPECT_NE(msg.find("direct drive sweeps b1"), std::string::npos) << msg;
}

TEST(Config, BackgroundUnitsFollowTheSweep) {
  const auto c = parse_experiment_config(R"({"sweep": {"b1_start_mt": 0.1, "b1_stop_mt": 5, "b1_step_mt": 0.1},
      "signal": {"backgrounds": [{"center_mt": 0.5, "hwhm_mt": 0.2, "amplitude": 0.01}]}})");
  ASSERT_EQ(c.signal.backgrounds.size(), 1u);
  EXPECT_EQ(c.signal.backgrounds[0].center, 0.5);
  EXPECT_THROW(parse_experiment_config(R"({"sweep": {"b1_start_mt": 0.1, "b1_stop_mt": 5, "b1_step_mt": 0.1},
      "signal": {"backgrounds": [{"center_mhz": 0.5, "hwhm_mhz": 0.2, "amplitude": 0.01}]}})"),
               InvalidInput);
}

TEST(Config, EveryBundledRecipeParsesAndResolvedFormRoundTrips) {
  const auto names = bundled_config_names();
  EXPECT_GE(names.size(), 10u);
  for (const auto& n : names) {
    SCOPED_TRACE(n);
    const auto c = load_config(n);
    const auto j1 = to_json(c);
    const auto c2 = parse_experiment_config(j1.dump(), "resolved");
    EXPECT_EQ(to_json(c2), j1);
  }
}

TEST(Config, LoadsFilesAndRejectsUnknownNames) {
  const auto dir = fresh_dir("");
  write_file_durable(dir / "c.json", R"({"budget": {"gamma2_nv_mhz": 1, "r_int_mhz": 1, "r_dip_mhz": 1, "r_rot_mhz": 1}})");
  EXPECT_TRUE(load_config((dir / "c.json").string()).budget.has_value());
  const auto msg = message_of([] { load_config("no-such-recipe"); });
  EXPECT_NE(msg.find("am-theta-scan"), std::string::npos) << msg;
}

TEST(ExitCodes, MapFailureCategories) {
  EXPECT_EQ(exit_code_for(InvalidInput("x")), ExitCode::kConfigError);
  EXPECT_EQ(exit_code_for(NumericError("x")), ExitCode::kNumericFailure);
  EXPECT_EQ(exit_code_for(IoError("x")), ExitCode::kIoFailure);
  EXPECT_EQ(static_cast<int>(ExitCode::kSuccess), 0);
  EXPECT_EQ(static_cast<int>(ExitCode::kConfigError), 2);
  EXPECT_EQ(static_cast<int>(ExitCode::kNumericFailure), 3);
  EXPECT_EQ(static_cast<int>(ExitCode::kIoFailure), 4);
}

// ---------------------------------------------------------------------------
// simulate

TEST(Simulate, CsvIsBitIdenticalAcrossThreadCounts) {
  const auto cfg = parse_experiment_config(kSmallSim, "small");
  const auto d1 = fresh_dir("t1"), d4 = fresh_dir("t4");
  RunContext c1, c4;
  c1.out_dir = d1;
  c1.threads = 1;
  c4.out_dir = d4;
  c4.threads = 4;
  run_simulate(cfg, c1);
  run_simulate(cfg, c4);
  EXPECT_EQ(read_file(d1 / "avg.csv"), read_file(d4 / "avg.csv"));
  EXPECT_EQ(read_file(d1 / "avg.csv.meta.json"), read_file(d4 / "avg.csv.meta.json"));
}

TEST(Simulate, SeedControlsTheSample) {
  const auto cfg = parse_experiment_config(kSmallSim, "small");
  const auto a = fresh_dir("a"), b = fresh_dir("b"), c = fresh_dir("c");
  RunContext ca, cb, cc;
  ca.out_dir = a;
  cb.out_dir = b;
  cc.out_dir = c;
  cc.seed = 12;
  run_simulate(cfg, ca);
  run_simulate(cfg, cb);
  run_simulate(cfg, cc);
  EXPECT_EQ(read_file(a / "avg.csv"), read_file(b / "avg.csv"));
  EXPECT_NE(read_file(a / "avg.csv"), read_file(c / "avg.csv"));
  EXPECT_EQ(Json::parse(read_file(c / "avg.csv.meta.json"))["seed"], 12);
}

TEST(Simulate, SidecarIsEnoughToRerun) {
  const auto cfg = parse_experiment_config(kSmallSim, "small");
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  RunContext ca;
  ca.out_dir = a;
  ca.seed = 99;
  run_simulate(cfg, ca);
  const auto meta = Json::parse(read_file(a / "avg.csv.meta.json"));
  EXPECT_EQ(meta["ndepr_version"], kVersion);
  EXPECT_EQ(meta["command"], "simulate");
  EXPECT_EQ(meta["config"]["averaging"]["seed"], 99);
  // The recorded configuration alone reproduces the file.
  RunContext cb;
  cb.out_dir = b;
  run_simulate(parse_experiment_config(meta["config"].dump(), "sidecar"), cb);
  EXPECT_EQ(read_file(a / "avg.csv"), read_file(b / "avg.csv"));
}

TEST(Simulate, AmThetaScanPeaksCoincide) {
  const auto dir = fresh_dir("");
  RunContext ctx;
  ctx.out_dir = dir;
  const auto res = run_simulate(load_config("am-theta-scan"), ctx);
  double first = NAN;
  for (const char* th : {"30", "60", "90"}) {
    const auto s = read_spectrum_csv(dir / ("am-theta-scan_theta" + std::string(th) + ".csv"));
    const double peak = argmax_x(s);
    if (std::isnan(first)) first = peak;
    EXPECT_NEAR(peak, first, 0.5) << th;
    EXPECT_NEAR(peak, 130.0, 0.5) << th;
    EXPECT_TRUE(fs::exists(dir / ("am-theta-scan_theta" + std::string(th) + ".csv.meta.json")));
  }
  EXPECT_EQ(res.files.size(), 3u);
}

TEST(Simulate, VanadylSimWritesSpectrumAndSticks) {
  const auto dir = fresh_dir("");
  RunContext ctx;
  ctx.out_dir = dir;
  ctx.plot = true;
  run_simulate(load_config("vanadyl-sim"), ctx);
  const auto s = read_spectrum_csv(dir / "vanadyl_sim.csv");
  EXPECT_GT(s.points.size(), 1000u);
  const auto sticks = read_file(dir / "vanadyl_sim_transitions.csv");
  std::set<std::string> freqs;
  std::istringstream in(sticks);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) freqs.insert(fixed3(std::stod(line.substr(0, line.find(',')))));
  EXPECT_EQ(freqs.size(), 12u);
  const auto svg = read_file(dir / "vanadyl_sim.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Simulate, DirectAxialOrientationWarns) {
  auto cfg = parse_experiment_config(R"({"sensor": {}, "target": {"kind": "lines", "lines_mhz": [130]},
      "coupling": {}, "drive": {"mode": "direct", "theta_deg": [0, 90]},
      "sweep": {"b1_start_mt": 1, "b1_stop_mt": 8, "b1_step_mt": 0.5}})");
  RunContext ctx;
  ctx.write_files = false;
  const auto res = run_simulate(cfg, ctx);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("N-V axis"), std::string::npos);
}

TEST(Simulate, MissingBlockIsAConfigError) {
  RunContext ctx;
  ctx.write_files = false;
  const auto msg = message_of([&] { run_simulate(parse_experiment_config(R"({"sensor": {}})", "c"), ctx); });
  EXPECT_NE(msg.find("target: block is required"), std::string::npos) << msg;
}

// ---------------------------------------------------------------------------
// fit

TEST(Fit, SyntheticVanadylRecoversConstants) {
  const auto dir = fresh_dir("");
  RunContext ctx;
  ctx.out_dir = dir;
  const auto res = run_fit(load_config("fit-vanadyl"), std::nullopt, ctx);
  EXPECT_EQ(res.code, ExitCode::kSuccess);
  const auto report = read_file(dir / "fit_vanadyl_report.txt");
  EXPECT_NE(report.find("converged = true"), std::string::npos);
  // Parse the parameter table back.
  auto value = [&](const std::string& name) {
    const auto p = report.find("\n" + name + ",");
    EXPECT_NE(p, std::string::npos) << name;
    return std::stod(report.substr(p + name.size() + 2));
  };
  EXPECT_NEAR(value("a_perp_mhz"), 195.0, 4.0);
  EXPECT_NEAR(value("a_par_mhz"), 579.0, 16.0);
  const auto resid = read_file(dir / "fit_vanadyl_residuals.csv");
  EXPECT_EQ(resid.substr(0, resid.find('\n')), "sweep_value,data,model,residual");
  EXPECT_TRUE(fs::exists(dir / "fit_vanadyl_data.csv.meta.json"));
  EXPECT_TRUE(fs::exists(dir / "fit_vanadyl_report.txt.meta.json"));
}

TEST(Fit, RoundTripOnSimulateOutputConverges) {
  const auto dir = fresh_dir("");
  RunContext ctx;
  ctx.out_dir = dir;
  run_simulate(load_config("am-theta-scan"), ctx);
  const auto res = run_fit(load_config("fit-p1"), dir / "am-theta-scan_theta90.csv", ctx);
  EXPECT_EQ(res.code, ExitCode::kSuccess);
  const auto report = read_file(dir / "fit_p1_report.txt");
  EXPECT_NE(report.find("converged = true"), std::string::npos);
  const auto meta = Json::parse(read_file(dir / "fit_p1_report.txt.meta.json"));
  EXPECT_EQ(meta["data_file"], (dir / "am-theta-scan_theta90.csv").string());
}

TEST(Fit, FlatDataGivesNumericFailure) {
  const auto dir = fresh_dir("");
  Spectrum flat;
  for (int i = 0; i < 200; ++i) flat.points.push_back({700.0 + 3.0 * i, 0.002, 0.0});
  write_file_durable(dir / "flat.csv", spectrum_to_csv(flat));
  RunContext ctx;
  ctx.out_dir = dir;
  auto cfg = load_config("fit-vanadyl");
  cfg.fit->synthetic.reset();
  const auto res = run_fit(cfg, dir / "flat.csv", ctx);
  EXPECT_EQ(res.code, ExitCode::kNumericFailure);
  EXPECT_NE(read_file(dir / "fit_vanadyl_report.txt").find("converged = false"), std::string::npos);
}

TEST(Fit, NeedsData) {
  RunContext ctx;
  ctx.write_files = false;
  auto cfg = load_config("fit-p1");
  EXPECT_THROW(run_fit(cfg, std::nullopt, ctx), InvalidInput);
}

// ---------------------------------------------------------------------------
// budget

TEST(Budget, NanodiamondGlycerolConstants) {
  const auto rep = compute_budget(*load_config("budget-nanodiamond").budget);
  EXPECT_NEAR(rep.budget.fwhm, 65.0, 2.0);
  EXPECT_NEAR(rep.budget.r_dip, 6.8, 1e-12);
  EXPECT_NEAR(rep.budget.r_rot, 1.686, 0.01);
  EXPECT_TRUE(rep.measurement_possible);
  EXPECT_NE(rep.text.find("fwhm_mhz = 64.97"), std::string::npos) << rep.text;
}

TEST(Budget, WaterIsFlaggedImpossible) {
  RunContext ctx;
  ctx.write_files = false;
  const auto res = run_budget(load_config("budget-water"), ctx);
  const auto rep = compute_budget(*load_config("budget-water").budget);
  EXPECT_GT(rep.budget.r_rot, 100.0);
  EXPECT_LT(rep.budget.r_rot, 1000.0);
  EXPECT_FALSE(rep.measurement_possible);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("measurement impossible"), std::string::npos);
  EXPECT_EQ(res.code, ExitCode::kSuccess);
}

TEST(Budget, ZeroConcentrationAndMissingFields) {
  auto c = parse_experiment_config(R"({"budget": {"gamma2_nv_mhz": 12, "r_int_mhz": 12, "concentration_m": 0,
      "r_rot_mhz": 2}})");
  EXPECT_EQ(compute_budget(*c.budget).budget.r_dip, 0.0);
  auto msg = message_of([] { parse_experiment_config(R"({"budget": {"gamma2_nv_mhz": 12}})", "b"); });
  EXPECT_NE(msg.find("budget.r_int_mhz: required key is missing"), std::string::npos) << msg;
  msg = message_of([] {
    parse_experiment_config(R"({"budget": {"gamma2_nv_mhz": 12, "r_int_mhz": 1, "r_dip_mhz": 1, "temperature_k": 293}})", "b");
  });
  EXPECT_NE(msg.find("budget.radius_nm: required key is missing"), std::string::npos) << msg;
}

// ---------------------------------------------------------------------------
// oracle

TEST(Oracle, ReportRowsZeroKappaAndAdjudication) {
  const auto cfg = parse_experiment_config(R"({"oracle": {"kappas": [0.0, 0.2], "detunings_mhz": [-1.0, 0.0, 1.0],
      "spin1_adjudication": true}})");
  const auto dir = fresh_dir("");
  RunContext ctx;
  ctx.out_dir = dir;
  const auto res = run_oracle(cfg, ctx);
  const auto csv = read_file(dir / "oracle.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kappa,detuning_mhz,analytic_rate_mhz,oracle_rate_mhz,rel_deviation");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<double> v;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 5u);
    if (v[0] == 0.0) {
      EXPECT_EQ(v[2], 0.0);
      EXPECT_EQ(v[3], 0.0);
    } else if (v[1] == 0.0) {
      EXPECT_LT(std::abs(v[4]), 0.10);
    }
  }
  EXPECT_EQ(rows, 6);
  const auto summary = read_file(dir / "oracle_summary.txt");
  EXPECT_NE(summary.find("as_printed convention"), std::string::npos);
  EXPECT_NE(summary.find("half_rabi convention"), std::string::npos);
  EXPECT_NE(summary.find("favoured convention = half_rabi"), std::string::npos);
  EXPECT_FALSE(res.warnings.empty());
}

// ---------------------------------------------------------------------------
// transitions

TEST(Transitions, TableAndClosedFormDiscrepancy) {
  RunContext ctx;
  ctx.write_files = false;
  ExperimentConfig cfg;
  const auto res = run_transitions(cfg, ctx);
  EXPECT_NE(res.summary.find("distinct frequencies: 12"), std::string::npos) << res.summary;
  EXPECT_NE(res.summary.find("834.000"), std::string::npos);
  EXPECT_NE(res.summary.find("printed form DIFFERS"), std::string::npos);
  EXPECT_TRUE(res.files.empty());
  auto lines = parse_experiment_config(R"({"target": {"kind": "lines", "lines_mhz": [130]}})");
  EXPECT_THROW(run_transitions(lines, ctx), InvalidInput);
}

// ---------------------------------------------------------------------------
// Command-line binary

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("");
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_cli("budget --config budget-nanodiamond" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "budget_nanodiamond.txt.meta.json"));
  write_file_durable(dir / "empty.json",
                     R"({"sensor": {}, "target": {"kind": "lines", "lines_mhz": [130]}, "coupling": {},
                         "drive": {"mode": "amplitude_modulated"},
                         "sweep": {"f_start_mhz": 150, "f_stop_mhz": 150, "f_step_mhz": 1}})");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "empty.json").string() + out), 2);
  EXPECT_EQ(run_cli("simulate --config no-such-recipe" + out), 2);
  EXPECT_EQ(run_cli("simulate" + out), 2);
  write_file_durable(dir / "bad.csv", "sweep_value,contrast,stderr\n1,0.1,0\n2,x,0\n");
  EXPECT_EQ(run_cli("fit --config fit-p1 --data " + (dir / "bad.csv").string() + out), 2);
  Spectrum flat;
  for (int i = 0; i < 200; ++i) flat.points.push_back({100.0 + i, 0.002, 0.0});
  write_file_durable(dir / "flat.csv", spectrum_to_csv(flat));
  EXPECT_EQ(run_cli("fit --config fit-p1 --data " + (dir / "flat.csv").string() + out), 3);
  write_file_durable(dir / "blocker", "x");
  EXPECT_EQ(run_cli("budget --config budget-nanodiamond --out " + (dir / "blocker" / "sub").string()), 4);
}

TEST(Cli, SimulateCsvIdenticalForOneAndManyThreads) {
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  ASSERT_EQ(run_cli("simulate --config powder-am --threads 1 --out " + a.string()), 0);
  ASSERT_EQ(run_cli("simulate --config powder-am --threads 3 --out " + b.string()), 0);
  EXPECT_EQ(read_file(a / "powder_am.csv"), read_file(b / "powder_am.csv"));
}
