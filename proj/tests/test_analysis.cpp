#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "isb/analysis.hpp"
#include "isb/errors.hpp"
#include "isb/least_squares.hpp"

using namespace isb;

namespace {

constexpr double kBohr = 5.29177210903e-11;

ScanRecord make_scan(double lo, double hi, double step, const std::function<double(double)>& f) {
  std::vector<ScanPoint> pts;
  for (double d : linear_grid(lo, hi, step)) pts.push_back({d, f(d)});
  return ScanRecord(std::move(pts), ScanDirection::Up);
}

double lorentz(double d, double c, double a, double g, double b) { return a * g * g / ((d - c) * (d - c) + g * g) + b; }

ThermalLineshapeConfig site_cfg() {
  return ThermalLineshapeConfig{TrapGeometry(to_angular(110e3), to_angular(70e3), to_angular(800.0), 0.07),
                                ThermalState(4.5e-6, 4.5e-6, 4.5e-6),
                                0.0,
                                DriveParams::from_pulse_area(to_angular(6.25), 1.0),
                                TruncationPolicy{},
                                PairFidelity::SidebandFormula,
                                RenormalizationModel{},
                                kCodata2018.mass_sr87()};
}

BinnedSpectrum model_bins(const ScatteringModel& m, double a_bohr, double eta, double noise = 0.0,
                          unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  BinnedSpectrum b;
  b.bin_width_hz = 4.0;
  for (double d = -600.0; d <= -4.0; d += 4.0) {
    const double v = m(d, a_bohr * kBohr, eta) + noise * n01(rng);
    b.bins.push_back(Bin{d, v, noise, 20, false});
  }
  return b;
}

}  // namespace

// ---------------------------------------------------------------- least squares

TEST(LevenbergMarquardt, Rosenbrock) {
  LeastSquaresProblem p;
  p.residuals = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
    return r;
  };
  const auto res = levenberg_marquardt(p, Eigen::Vector2d(-1.2, 1.0));
  EXPECT_TRUE(res.converged) << res.message;
  EXPECT_NEAR(res.params[0], 1.0, 1e-6);
  EXPECT_NEAR(res.params[1], 1.0, 1e-6);
  for (std::size_t i = 1; i < res.history.size(); ++i) EXPECT_LE(res.history[i], res.history[i - 1]);
}

TEST(LevenbergMarquardt, BoundIsReported) {
  LeastSquaresProblem p;
  p.residuals = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] - 5.0); };
  p.lower = Eigen::VectorXd::Constant(1, -1.0);
  p.upper = Eigen::VectorXd::Constant(1, 2.0);
  const auto res = levenberg_marquardt(p, Eigen::VectorXd::Constant(1, 0.0));
  EXPECT_NEAR(res.params[0], 2.0, 1e-12);
  ASSERT_EQ(res.at_bound.size(), 1u);
  EXPECT_TRUE(res.at_bound[0]);
}

TEST(LevenbergMarquardt, NonFiniteResidualsThrow) {
  LeastSquaresProblem p;
  p.residuals = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(2, std::nan("")); };
  EXPECT_THROW(levenberg_marquardt(p, Eigen::VectorXd::Zero(1)), NumericalError);
}

TEST(LevenbergMarquardt, LinearCovarianceMatchesNormalEquations) {
  // y = c0 + c1 x with unit weights: cov = s^2 (X^T X)^{-1}
  const std::vector<double> x{0, 1, 2, 3, 4, 5}, y{0.1, 1.2, 1.9, 3.2, 3.9, 5.1};
  LeastSquaresProblem p;
  p.residuals = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd r(6);
    for (int i = 0; i < 6; ++i) r[i] = y[i] - c[0] - c[1] * x[i];
    return r;
  };
  const auto res = levenberg_marquardt(p, Eigen::Vector2d(0, 0));
  Eigen::MatrixXd X(6, 2);
  Eigen::VectorXd Y(6);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = 1;
    X(i, 1) = x[i];
    Y[i] = y[i];
  }
  const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  EXPECT_NEAR(res.params[0], beta[0], 1e-7);
  EXPECT_NEAR(res.params[1], beta[1], 1e-7);
  const double s2 = (Y - X * beta).squaredNorm() / 4.0;
  const Eigen::MatrixXd cov = s2 * (X.transpose() * X).inverse();
  const Eigen::MatrixXd got = parameter_covariance(res);
  EXPECT_NEAR(got(0, 0), cov(0, 0), 1e-6 * cov(0, 0));
  EXPECT_NEAR(got(1, 1), cov(1, 1), 1e-6 * cov(1, 1));
}

// ---------------------------------------------------------------- scan records and CSV

TEST(ScanCsv, ParsesAndInfersDirection) {
  std::istringstream in("\xEF\xBB\xBF" "detuning_hz,excitation\n10,0.1\n8,0.2\n\n6,0.3\n");
  const auto s = read_scan_csv(in, "a");
  EXPECT_EQ(s.direction(), ScanDirection::Down);
  ASSERT_EQ(s.points().size(), 3u);
  EXPECT_EQ(s.points()[2].detuning_hz, 6.0);
  EXPECT_EQ(s.points()[2].excitation, 0.3);
}

TEST(ScanCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_scan_csv(in);
  };
  EXPECT_THROW(parse(""), DomainError);
  EXPECT_THROW(parse("freq,value\n1,2\n"), DomainError);
  EXPECT_THROW(parse("detuning_hz,excitation\n1,abc\n"), DomainError);
  EXPECT_THROW(parse("detuning_hz,excitation\n1,0.1,3\n"), DomainError);
  EXPECT_THROW(parse("detuning_hz,excitation\n1,0.1\n3,0.1\n2,0.1\n"), DomainError);
  EXPECT_THROW(parse("detuning_hz,excitation\n1,nan\n"), DomainError);
  EXPECT_THROW(parse("detuning_hz,excitation\n"), DomainError);
  EXPECT_THROW(read_scan_csv_file("/nonexistent/scan.csv"), IoError);
}

// ---------------------------------------------------------------- binning

TEST(Binning, SingleScanOnePointPerBin) {
  const auto s = make_scan(-10, 10, 2, [](double d) { return 0.01 * d * d; });
  const auto b = concatenate_and_bin({s}, 2.0);
  ASSERT_EQ(b.bins.size(), 11u);
  for (const auto& bin : b.bins) {
    EXPECT_TRUE(bin.degenerate);
    EXPECT_EQ(bin.sem, 0.0);
    EXPECT_EQ(bin.count, 1);
    EXPECT_DOUBLE_EQ(bin.mean, 0.01 * bin.center_hz * bin.center_hz);
  }
}

TEST(Binning, IdenticalScansHaveZeroSpread) {
  const auto s = make_scan(-10, 10, 1, [](double) { return 0.5; });
  const auto b = concatenate_and_bin({s, s}, 4.0);
  for (const auto& bin : b.bins) {
    EXPECT_FALSE(bin.degenerate);
    EXPECT_GE(bin.count, 2);
  }
  // bin 0 holds -1, 0, 1 twice; the edges +-2 round away from zero
  const auto& zero = *std::find_if(b.bins.begin(), b.bins.end(), [](const Bin& x) { return x.center_hz == 0.0; });
  EXPECT_EQ(zero.count, 6);
  EXPECT_NEAR(zero.mean, 0.5, 1e-15);
  EXPECT_EQ(zero.sem, 0.0);
  EXPECT_EQ(b.bins.front().center_hz, -12.0);
  EXPECT_EQ(b.bins.front().count, 2);
}

TEST(Binning, StandardErrorCoverage) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<ScanRecord> scans;
  for (int k = 0; k < 20; ++k) scans.push_back(make_scan(-400, 400, 2, [&](double) { return 0.3 + noise(rng); }));
  const auto b = concatenate_and_bin(scans, 4.0);
  int inside = 0;
  for (const auto& bin : b.bins) inside += std::abs(bin.mean - 0.3) <= 3.0 * bin.sem;
  EXPECT_GE(inside, static_cast<int>(0.95 * b.bins.size()));
}

TEST(Binning, ScanOrderDoesNotMatter) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScanRecord> scans;
  for (int k = 0; k < 5; ++k) scans.push_back(make_scan(-50 + 0.3 * k, 50, 0.7, [&](double) { return u(rng); }));
  auto rev = scans;
  std::reverse(rev.begin(), rev.end());
  const auto a = concatenate_and_bin(scans, 4.0);
  const auto b = concatenate_and_bin(rev, 4.0);
  ASSERT_EQ(a.bins.size(), b.bins.size());
  for (std::size_t i = 0; i < a.bins.size(); ++i) {
    EXPECT_EQ(a.bins[i].mean, b.bins[i].mean);
    EXPECT_EQ(a.bins[i].sem, b.bins[i].sem);
  }
}

TEST(Binning, NoScansIsAnError) {
  EXPECT_THROW(concatenate_and_bin({}, 4.0), DomainError);
  EXPECT_THROW(concatenate_and_bin({make_scan(0, 1, 1, [](double) { return 0.0; })}, 0.0), DomainError);
}

// ---------------------------------------------------------------- reflection

TEST(Reflect, SymmetricInputCancels) {
  const auto s = make_scan(-100, 100, 1, [](double d) { return lorentz(d, 0, 0.8, 6, 0.01); });
  const auto r = reflect_subtract(concatenate_and_bin({s, s}, 4.0));
  ASSERT_FALSE(r.bins.empty());
  for (const auto& bin : r.bins) {
    EXPECT_LT(bin.center_hz, 0.0);
    EXPECT_NEAR(bin.mean, 0.0, 1e-15);
  }
}

TEST(Reflect, RecoversAOneSidedBump) {
  auto f = [](double d) { return lorentz(d, 0, 0.8, 6, 0.0) + lorentz(d, -60, 0.1, 8, 0.0); };
  const auto s = make_scan(-120, 120, 1, f);
  const auto r = reflect_subtract(concatenate_and_bin({s}, 1.0));
  for (const auto& bin : r.bins) EXPECT_NEAR(bin.mean, lorentz(bin.center_hz, -60, 0.1, 8, 0.0) - lorentz(-bin.center_hz, -60, 0.1, 8, 0.0), 1e-14);
}

TEST(Reflect, MirrorIdentities) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScanRecord> scans;
  for (int k = 0; k < 3; ++k) scans.push_back(make_scan(-40, 40, 1, [&](double) { return u(rng); }));
  const auto b = concatenate_and_bin(scans, 4.0);
  const auto rr = reflect(reflect(b));
  ASSERT_EQ(rr.bins.size(), b.bins.size());
  for (std::size_t i = 0; i < b.bins.size(); ++i) {
    EXPECT_EQ(rr.bins[i].center_hz, b.bins[i].center_hz);
    EXPECT_EQ(rr.bins[i].mean, b.bins[i].mean);
  }
  const auto d1 = reflect_subtract(b);
  const auto d2 = reflect_subtract(reflect(b));
  ASSERT_EQ(d1.bins.size(), d2.bins.size());
  for (std::size_t i = 0; i < d1.bins.size(); ++i) {
    EXPECT_EQ(d2.bins[i].mean, -d1.bins[i].mean);
    EXPECT_EQ(d2.bins[i].sem, d1.bins[i].sem);
  }
}

TEST(Reflect, NeedsBothSides) {
  const auto s = make_scan(1, 50, 1, [](double) { return 0.1; });
  EXPECT_THROW(reflect_subtract(concatenate_and_bin({s}, 4.0)), DomainError);
}

// ---------------------------------------------------------------- Lorentzian

TEST(Lorentzian, ExactRecovery) {
  std::vector<double> x, y;
  for (double d = -60; d <= 60; d += 0.5) {
    x.push_back(d);
    y.push_back(lorentz(d, 3.25, 0.7, 4.5, 0.02));
  }
  const auto f = lorentzian_fit(x, y);
  EXPECT_TRUE(f.converged) << f.message;
  EXPECT_NEAR(f.parameters.at("center_hz").value, 3.25, 1e-8);
  EXPECT_NEAR(f.parameters.at("amplitude").value, 0.7, 1e-8);
  EXPECT_NEAR(std::abs(f.parameters.at("width_hz").value), 4.5, 1e-8);
  EXPECT_NEAR(f.parameters.at("offset").value, 0.02, 1e-8);
  EXPECT_FALSE(f.has_flag("zero_amplitude"));
}

TEST(Lorentzian, FlatDataIsFlagged) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<double> x, y;
  for (double d = -60; d <= 60; d += 1) {
    x.push_back(d);
    y.push_back(0.1 + n(rng));
  }
  const auto f = lorentzian_fit(x, y);
  EXPECT_TRUE(f.has_flag("zero_amplitude") || !f.converged);
  EXPECT_THROW(center_scan(make_scan(-60, 60, 1, [](double) { return 0.1; })), NumericalError);
}

TEST(Lorentzian, CenterErrorCoverage) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.03);
  int inside = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x, y;
    for (double d = -40; d <= 40; d += 1) {
      x.push_back(d);
      y.push_back(lorentz(d, -1.5, 0.6, 5.0, 0.0) + n(rng));
    }
    const auto f = lorentzian_fit(x, y);
    const auto c = f.parameters.at("center_hz");
    inside += std::abs(c.value + 1.5) <= 2.0 * c.error;
  }
  // nominal 95%
  EXPECT_GE(inside, 85);
}

TEST(Lorentzian, CenterScanMovesTheLineToZero) {
  const auto s = make_scan(-50, 70, 1, [](double d) { return lorentz(d, 11.0, 0.8, 5, 0.0); });
  const auto c = center_scan(s);
  EXPECT_NEAR(lorentzian_fit(c).parameters.at("center_hz").value, 0.0, 1e-7);
  EXPECT_EQ(c.direction(), s.direction());
}

TEST(FindPeaks, LocalMaximaWithWindow) {
  std::vector<double> x, y;
  for (double d = -100; d <= 100; d += 1) {
    x.push_back(d);
    y.push_back(lorentz(d, 0, 1.0, 3, 0) + lorentz(d, -50, 0.2, 3, 0) + lorentz(d, -56, 0.1, 1, 0));
  }
  const auto p = find_peaks(x, y, 20.0, 10.0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(x[p[0]], -50.0);
  EXPECT_EQ(find_peaks(x, y, 0.0, 10.0).size(), 2u);
}

// ---------------------------------------------------------------- scattering length

TEST(ScatteringFit, RecoversTheScatteringLength) {
  ScatteringFitConfig cfg{site_cfg()};
  const ScatteringModel m(cfg);
  const auto data = model_bins(m, -280.0, 0.07);
  const auto f = fit_scattering_length(data, cfg);
  EXPECT_TRUE(f.converged) << f.message;
  EXPECT_NEAR(f.parameters.at("a_eg_minus_a0").value, -280.0, 0.05 * 280.0);
  EXPECT_TRUE(f.has_flag("uniform_weights"));
  for (std::size_t i = 1; i < f.objective_history.size(); ++i) {
    EXPECT_LE(f.objective_history[i], f.objective_history[i - 1]);
  }
}

TEST(ScatteringFit, FullPipelineFromScans) {
  // Scans built from the single-site closed form plus a carrier line, then binned, reflected and fitted.
  auto th = site_cfg();
  th.a_eg_minus = -280.0 * kBohr;
  std::vector<double> grid;
  for (double d = -400; d <= 400; d += 2) grid.push_back(to_angular(d));
  const auto isb = isb_closed_form(th, grid);
  std::vector<ScanPoint> pts;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = from_angular(grid[i]);
    pts.push_back({d, isb[i].value + lorentz(d, 0, 0.8, 6.0, 0.0)});
  }
  const ScanRecord scan(pts, ScanDirection::Up);
  const auto reflected = reflect_subtract(concatenate_and_bin({scan, scan}, 4.0));
  ScatteringFitConfig cfg{site_cfg()};
  const auto f = fit_scattering_length(reflected, cfg);
  EXPECT_NEAR(f.parameters.at("a_eg_minus_a0").value, -280.0, 0.05 * 280.0);
}

TEST(ScatteringFit, NoInteractionGivesNoSideband) {
  ScatteringFitConfig cfg{site_cfg()};
  const ScatteringModel m(cfg);
  const double noise = 0.002;
  const auto data = model_bins(m, 0.0, 0.07, noise, 12);
  const auto f = fit_scattering_length(data, cfg);
  const auto pk = f.parameters.at("peak_excitation");
  EXPECT_LT(std::abs(pk.value), 3.0 * noise) << pk.value << " +- " << pk.error;
}

TEST(ScatteringFit, SignIsIdentifiedByTheBetterStart) {
  ScatteringFitConfig cfg{site_cfg()};
  const ScatteringModel m(cfg);
  const auto data = model_bins(m, -280.0, 0.07, 0.001, 2);
  cfg.initial_a = -100 * kBohr;
  const auto neg = fit_scattering_length(data, cfg);
  cfg.initial_a = 100 * kBohr;
  const auto pos = fit_scattering_length(data, cfg);
  const auto& best = neg.residual_norm <= pos.residual_norm ? neg : pos;
  EXPECT_NEAR(best.parameters.at("a_eg_minus_a0").value, -280.0, 0.05 * 280.0);
  EXPECT_LT(neg.residual_norm, pos.residual_norm);
}

TEST(ScatteringFit, BoundIsFlagged) {
  ScatteringFitConfig cfg{site_cfg()};
  cfg.max_abs_a_bohr = 250.0;
  const ScatteringModel m(cfg);
  const auto f = fit_scattering_length(model_bins(m, -280.0, 0.07), cfg);
  EXPECT_TRUE(f.has_flag("at_bound:a_eg_minus_a0"));
  EXPECT_NEAR(f.parameters.at("a_eg_minus_a0").value, -250.0, 1e-9);
}

TEST(ScatteringFit, EtaCanBeFreed) {
  ScatteringFitConfig cfg{site_cfg()};
  cfg.fit_eta = true;
  cfg.initial_eta = 0.05;
  const ScatteringModel m(cfg);
  const auto f = fit_scattering_length(model_bins(m, -280.0, 0.07, 1e-4, 6), cfg);
  EXPECT_NEAR(f.parameters.at("a_eg_minus_a0").value, -280.0, 0.05 * 280.0);
  EXPECT_NEAR(f.parameters.at("eta_z").value, 0.07, 0.05 * 0.07);
}

TEST(ScatteringFit, EnsembleModelIsDeterministic) {
  ScatteringFitConfig cfg{site_cfg()};
  cfg.ensemble = LatticeDistribution{};
  cfg.n_samples = 64;
  const ScatteringModel m(cfg);
  EXPECT_EQ(m.n_sites(), 64u);
  const auto data = model_bins(m, -280.0, 0.07, 0.002, 3);
  const auto a = fit_scattering_length(data, cfg);
  const auto b = fit_scattering_length(data, cfg);
  EXPECT_EQ(a.parameters.at("a_eg_minus_a0").value, b.parameters.at("a_eg_minus_a0").value);
  EXPECT_EQ(a.objective_history, b.objective_history);
  EXPECT_NEAR(a.parameters.at("a_eg_minus_a0").value, -280.0, 0.05 * 280.0);
}

TEST(ScatteringFit, TooFewBinsIsAnError) {
  ScatteringFitConfig cfg{site_cfg()};
  BinnedSpectrum b;
  b.bin_width_hz = 4.0;
  b.bins.push_back(Bin{-8.0, 0.0, 0.0, 1, true});
  EXPECT_THROW(fit_scattering_length(b, cfg), DomainError);
}
