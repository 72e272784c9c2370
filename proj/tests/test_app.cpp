#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "isb/app.hpp"
#include "isb/errors.hpp"

using namespace isb;
using namespace isb::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("isb_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const char* kClosedForm = R"({
  "mode": "simulate", "engine": "closed_form",
  "grid": {"min_hz": -400, "max_hz": 400, "step_hz": 2}
})";

// Synthetic scans: a carrier line plus the single-site sideband at a = -280 a0.
std::vector<std::string> write_scans(const fs::path& dir, int n, double noise) {
  auto cfg = parse_config(R"({"engine": "closed_form"})");
  cfg.grid = {-400, 400, 2};
  const auto th = make_thermal_config(cfg);
  const auto grid = make_grid(cfg);
  const auto sb = isb_closed_form(th, grid);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  std::vector<std::string> paths;
  for (int k = 0; k < n; ++k) {
    const auto p = dir / ("scan" + std::to_string(k) + ".csv");
    std::ofstream out(p);
    out << "detuning_hz,excitation\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double d = cfg.grid.min_hz + cfg.grid.step_hz * static_cast<double>(i);
      const double carrier = 0.8 * 36.0 / (d * d + 36.0);
      out << d << ',' << carrier + sb[i].value + noise * n01(rng) << '\n';
    }
    paths.push_back(p.string());
  }
  return paths;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const auto cfg = parse_config("{}");
  EXPECT_FALSE(cfg.mode.has_value());
  EXPECT_EQ(cfg.trap.omega_z_hz, 800.0);
  EXPECT_EQ(cfg.interaction.a_eg_minus_a0, -280.0);
  const auto again = parse_config(config_to_json(cfg));
  EXPECT_EQ(config_to_json(again), config_to_json(cfg));
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config("[]"), ConfigError);
  EXPECT_THROW(parse_config(R"({"grdi": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"trap": {"omega_q_hz": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"trap": {"eta_z": "big"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"engine": "magic"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"ensemble": {"occupancy": {"two": 1}}})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
}

TEST(Config, ErrorsNameTheOffendingKey) {
  try {
    parse_config(R"({"drive": {"rabi_hz": 6.25, "pulse_areaa": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("pulse_areaa"), std::string::npos) << e.what();
  }
}

TEST(Validate, ClockDefaultsAreValid) {
  const auto r = validate(parse_config(kClosedForm), Mode::Simulate);
  EXPECT_TRUE(r.ok()) << r.to_json();
}

TEST(Validate, Violations) {
  auto bad = [](const char* text, Mode m = Mode::Simulate) { return !validate(parse_config(text), m).ok(); };
  EXPECT_TRUE(bad(R"({"engine": "closed_form", "trap": {"omega_x_hz": -1}})"));
  EXPECT_TRUE(bad(R"({"engine": "closed_form", "drive": {"rabi_hz": 0}})"));
  EXPECT_TRUE(bad(R"({"engine": "closed_form", "grid": {"min_hz": -1, "max_hz": 1, "step_hz": 5}})"));
  EXPECT_TRUE(bad(R"({"engine": "closed_form", "grid": {"min_hz": 1, "max_hz": -1, "step_hz": 0.1}})"));
  EXPECT_TRUE(bad(R"({"grid": {"min_hz": -1, "max_hz": 1, "step_hz": 0.1}})"));  // no engine
  EXPECT_TRUE(bad(R"({"engine": "exact", "spin": {"modes": [1, 1]}})"));
  EXPECT_TRUE(bad(R"({"engine": "closed_form", "temperature": {"t_z_uk": 0}})"));
  EXPECT_TRUE(bad(R"({"engine": "ensemble", "ensemble": {"occupancy": {"3": 1}}})"));
  EXPECT_TRUE(bad(R"({})", Mode::Analyze));  // no scans
  EXPECT_TRUE(bad(R"({"analysis": {"scans": ["x.csv"]}, "engine": "exact"})", Mode::Fit));
}

TEST(Validate, ColdAxisWarnsForClosedForm) {
  const auto r = validate(parse_config(R"({"engine": "closed_form", "temperature": {"t_z_uk": 0.1}})"), Mode::Simulate);
  EXPECT_TRUE(r.ok());
  bool found = false;
  for (const auto& w : r.warnings) found = found || w.find("alpha_z") != std::string::npos;
  EXPECT_TRUE(found) << r.to_json();
}

TEST(Run, ClosedFormWritesSpectrumAndManifest) {
  TempDir tmp;
  const auto out = (tmp.path() / "out").string();
  const auto res = run(parse_config(kClosedForm), Mode::Simulate, out);
  ASSERT_EQ(res.exit_code, 0) << res.message;
  const auto csv = slurp(fs::path(out) / "spectrum.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "detuning_hz,excitation_fraction,sigma");
  int rows = 0;
  double prev = -1e300;
  while (std::getline(in, line)) {
    const double d = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(d, prev);
    prev = d;
    ++rows;
  }
  EXPECT_EQ(rows, 401);
  EXPECT_EQ(prev, 400.0);

  const auto manifest = json::parse(slurp(fs::path(out) / "manifest.json"));
  EXPECT_EQ(manifest.at("mode"), "simulate");
  EXPECT_EQ(manifest.at("seed"), 1);
  EXPECT_TRUE(manifest.at("warnings").is_array());
  EXPECT_FALSE(manifest.at("warnings").empty());  // grid reaches into the carrier region
  EXPECT_EQ(manifest.at("config").at("engine"), "closed_form");
}

TEST(Run, InvalidConfigWritesNothing) {
  TempDir tmp;
  const auto out = tmp.path() / "out";
  const auto res = run(parse_config(R"({"engine": "closed_form", "trap": {"omega_x_hz": -5}})"), Mode::Simulate,
                       out.string());
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_EQ(res.error_category, "config");
  EXPECT_FALSE(fs::exists(out));
}

TEST(Run, OutputsAreIndependentOfThreadCount) {
  TempDir tmp;
  auto cfg = parse_config(R"({"engine": "ensemble", "grid": {"min_hz": -300, "max_hz": -20, "step_hz": 4},
                              "ensemble": {"n_samples": 64}})");
  cfg.threads = 1;
  ASSERT_EQ(run(cfg, Mode::Simulate, (tmp.path() / "a").string()).exit_code, 0);
  cfg.threads = 3;
  ASSERT_EQ(run(cfg, Mode::Simulate, (tmp.path() / "b").string()).exit_code, 0);
  cfg.threads = 1;
  ASSERT_EQ(run(cfg, Mode::Simulate, (tmp.path() / "c").string()).exit_code, 0);
  const auto a = slurp(tmp.path() / "a" / "spectrum.csv");
  EXPECT_EQ(a, slurp(tmp.path() / "b" / "spectrum.csv"));
  EXPECT_EQ(a, slurp(tmp.path() / "c" / "spectrum.csv"));
  cfg.seed = 2;
  ASSERT_EQ(run(cfg, Mode::Simulate, (tmp.path() / "d").string()).exit_code, 0);
  EXPECT_NE(a, slurp(tmp.path() / "d" / "spectrum.csv"));
}

TEST(Run, AnalyzeAndFit) {
  TempDir tmp;
  const auto scans = write_scans(tmp.path(), 4, 0.0);
  auto cfg = parse_config(R"({"fit": {"initial_a_a0": -100}})");
  cfg.analysis.scans = scans;
  cfg.ensemble.n_samples = 1;
  cfg.ensemble.sigma_h_um = 1e-9;
  cfg.ensemble.n_rows = 1;
  const auto a = run(cfg, Mode::Analyze, (tmp.path() / "an").string());
  ASSERT_EQ(a.exit_code, 0) << a.message;
  EXPECT_TRUE(fs::exists(tmp.path() / "an" / "binned.csv"));
  EXPECT_TRUE(fs::exists(tmp.path() / "an" / "reflected.csv"));

  const auto f = run(cfg, Mode::Fit, (tmp.path() / "fit").string());
  ASSERT_EQ(f.exit_code, 0) << f.message;
  const auto fit = json::parse(slurp(tmp.path() / "fit" / "fit.json"));
  const double a_fit = fit.at("parameters").at("a_eg_minus_a0").at("value").get<double>();
  EXPECT_NEAR(a_fit, -280.0, 0.05 * 280.0) << fit.dump(2);
}

TEST(Run, MissingScanIsAnIoError) {
  TempDir tmp;
  auto cfg = parse_config("{}");
  cfg.analysis.scans = {(tmp.path() / "missing.csv").string()};
  EXPECT_TRUE(validate(cfg, Mode::Analyze).ok());
  const auto r = run(cfg, Mode::Analyze, (tmp.path() / "out").string());
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_EQ(r.error_category, "io");
}

TEST(Csv, SpectrumFormatting) {
  const Spectrum s({{to_angular(-1.5), 0.25, 0.01, true}, {to_angular(0.5), 0.125, std::nullopt, true}});
  const std::vector<double> hz{-1.5, 0.5};
  EXPECT_EQ(spectrum_csv(s, &hz), "detuning_hz,excitation_fraction,sigma\n-1.5,0.25,0.01\n0.5,0.125,\n");
}

#ifdef ISBSIM_PATH
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(ISBSIM_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  TempDir tmp;
  const auto good = tmp.path() / "good.json";
  std::ofstream(good) << kClosedForm;
  const auto bad = tmp.path() / "bad.json";
  std::ofstream(bad) << R"({"engine": "closed_form", "drive": {"rabi_hz": -1}})";
  const auto broken = tmp.path() / "broken.json";
  std::ofstream(broken) << "{ not json";

  EXPECT_EQ(run_cli("simulate --config " + good.string() + " --out " + (tmp.path() / "o").string()), 0);
  EXPECT_TRUE(fs::exists(tmp.path() / "o" / "spectrum.csv"));
  EXPECT_EQ(run_cli("simulate --config " + bad.string() + " --out " + (tmp.path() / "p").string()), 2);
  EXPECT_FALSE(fs::exists(tmp.path() / "p"));
  EXPECT_EQ(run_cli("simulate --config " + broken.string()), 2);
  EXPECT_EQ(run_cli("validate --config " + good.string()), 0);
  EXPECT_EQ(run_cli("validate --config " + bad.string()), 2);
  EXPECT_NE(run_cli("simulate"), 0);
  EXPECT_EQ(run_cli("--version"), 0);
}
#endif
