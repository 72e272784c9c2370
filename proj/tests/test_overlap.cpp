#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "isb/errors.hpp"
#include "isb/gauss_hermite.hpp"
#include "isb/overlap.hpp"
#include "isb/spin_model.hpp"

using namespace isb;

namespace {

// Composite Simpson on [-L, L] of sqrt(2 pi) psi_{n1}^2 psi_{n2}^2 with psi from the textbook
// Hermite recurrence and explicit normalization. Only good for small n.
double simpson_overlap(int n1, int n2) {
  auto psi = [](int n, double z) {
    double h0 = 1.0, h1 = 2.0 * z;
    if (n == 0) return std::exp(-z * z / 2) / std::pow(M_PI, 0.25);
    for (int k = 1; k < n; ++k) {
      const double h2 = 2.0 * z * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = h2;
    }
    return h1 * std::exp(-z * z / 2) / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(M_PI));
  };
  const int steps = 20000;
  const double L = 12.0, h = 2 * L / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double z = -L + i * h;
    const double a = psi(n1, z), b = psi(n2, z);
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * a * a * b * b;
  }
  return std::sqrt(2 * M_PI) * acc * h / 3;
}

double agm_k(double m) {
  double a = 1.0, b = std::sqrt(1.0 - m);
  for (int i = 0; i < 40; ++i) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return M_PI / (2 * a);
}

TrapGeometry clock_2d_trap() { return TrapGeometry(to_angular(110e3), to_angular(70e3), to_angular(800.0), 0.07); }

}  // namespace

TEST(GaussHermite, RuleIntegratesMonomials) {
  for (int n : {1, 2, 5, 20, 101, 400}) {
    const auto rule = gauss_hermite_rule(n);
    ASSERT_EQ(rule->nodes.size(), static_cast<std::size_t>(n));
    double s0 = 0, s2 = 0;
    for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
      const double w = rule->scaled_weights[i] * std::exp(-rule->nodes[i] * rule->nodes[i]);
      s0 += w;
      s2 += w * rule->nodes[i] * rule->nodes[i];
      EXPECT_NEAR(rule->nodes[i], -rule->nodes[rule->nodes.size() - 1 - i], 1e-12 * (1 + std::abs(rule->nodes[i])));
    }
    EXPECT_NEAR(s0, std::sqrt(M_PI), 1e-12) << n;
    if (n >= 2) {
      EXPECT_NEAR(s2, std::sqrt(M_PI) / 2, 1e-12) << n;
    }
  }
}

TEST(GaussHermite, LargeRuleStaysNormalized) {
  const auto rule = gauss_hermite_rule(6000);
  double s0 = 0;
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    s0 += rule->scaled_weights[i] * std::exp(-rule->nodes[i] * rule->nodes[i]);
  }
  EXPECT_NEAR(s0, std::sqrt(M_PI), 1e-10);
}

TEST(GaussHermite, HermiteFunctionsMatchDirectRecurrence) {
  for (double z : {-2.3, 0.0, 0.7, 3.1}) {
    std::vector<double> lp(11);
    log_hermite_functions(z, lp);
    for (int n = 0; n <= 10; ++n) {
      double h0 = 1.0, h1 = 2.0 * z, hn = n == 0 ? 1.0 : 2.0 * z;
      for (int k = 1; k < n; ++k) {
        hn = 2.0 * z * h1 - 2.0 * k * h0;
        h0 = h1;
        h1 = hn;
      }
      const double direct = hn * std::exp(-z * z / 2) / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(M_PI));
      EXPECT_NEAR(hermite_function(n, z), direct, 1e-13);
      if (direct != 0.0) {
        EXPECT_NEAR(lp[static_cast<std::size_t>(n)], std::log(std::abs(direct)), 1e-11);
      }
    }
  }
  std::vector<double> big(3001);
  log_hermite_functions(40.0, big);
  for (double v : big) EXPECT_TRUE(std::isfinite(v));
}

TEST(Overlap, GroundStateValues) {
  EXPECT_NEAR(overlap_integral(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(overlap_integral(0, 1), 0.5, 1e-12);
}

TEST(Overlap, MatchesSimpsonOracle) {
  for (int n1 = 0; n1 <= 6; ++n1) {
    for (int n2 = 0; n2 <= 6; ++n2) {
      EXPECT_NEAR(overlap_integral(n1, n2), simpson_overlap(n1, n2), 1e-10) << n1 << "," << n2;
    }
  }
}

TEST(Overlap, Symmetric) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(0, 300);
  for (int i = 0; i < 50; ++i) {
    const int a = d(rng), b = d(rng);
    EXPECT_NEAR(overlap_integral(a, b), overlap_integral(b, a), 1e-13) << a << "," << b;
  }
}

TEST(Overlap, ValuesInUnitInterval) {
  for (int a : {0, 3, 50, 500}) {
    for (int b : {0, 7, 499}) {
      const double v = overlap_integral(a, b);
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-14);
    }
  }
}

TEST(Overlap, DecreasingAlongGroundRow) {
  double prev = overlap_integral(1, 0);
  for (int n = 2; n <= 200; ++n) {
    const double v = overlap_integral(n, 0);
    EXPECT_LT(v, prev) << n;
    prev = v;
  }
}

TEST(Overlap, BandMatchesPairwise) {
  const auto band = overlap_band(60, 5);
  for (int d = 0; d < 5; ++d) {
    for (int n = 0; n + d <= 60; n += 7) {
      EXPECT_NEAR(band[static_cast<std::size_t>(d)][static_cast<std::size_t>(n)], overlap_integral(n + d, n), 1e-12);
    }
  }
}

TEST(Overlap, TruncationCap) {
  TruncationPolicy p;
  p.max_mode = 100;
  EXPECT_THROW(overlap_integral(101, 0, p), TruncationError);
  EXPECT_THROW(overlap_integral(-1, 0), DomainError);
  try {
    overlap_integral(150, 3, p);
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.required_mode(), 150);
  }
}

TEST(OverlapAsymptotic, KnownValues) {
  EXPECT_NEAR(overlap_asymptotic(100, 0, false), 1.0 / std::sqrt(100 * M_PI), 1e-15);
  EXPECT_NEAR(overlap_asymptotic(100, 0, false), 0.05642, 1e-5);
  EXPECT_NEAR(overlap_asymptotic(100, 0, true), overlap_asymptotic(100, 0, false), 1e-15);
  EXPECT_LT(std::abs(overlap_asymptotic(100, 0, false) / overlap_integral(100, 0) - 1), 0.10);
  EXPECT_THROW(overlap_asymptotic(5, 5, true), DomainError);
}

TEST(OverlapAsymptotic, EllipticKAgreesWithAgm) {
  for (double m : {-5.0, -1.0, -0.25, 0.0, 0.3, 0.9}) EXPECT_NEAR(elliptic_k(m), agm_k(m), 1e-12) << m;
  EXPECT_THROW(elliptic_k(1.0), DomainError);
}

TEST(OverlapAsymptotic, SimplifiedFormWithinTenPercentInItsRegime) {
  for (int d = 20; d <= 400; d += 19) {
    for (int lo = 0; lo <= d / 4; lo += std::max(1, d / 12)) {
      const double exact = overlap_integral(lo + d, lo);
      EXPECT_LT(std::abs(overlap_asymptotic(lo + d, lo, false) / exact - 1), 0.10) << d << "," << lo;
    }
  }
}

TEST(OverlapAsymptotic, EllipticFormWithinTenPercentEverywhere) {
  for (int d = 20; d <= 300; d += 40) {
    for (int lo : {0, 10, 50, 150, 400}) {
      const double exact = overlap_integral(lo + d, lo);
      EXPECT_LT(std::abs(overlap_asymptotic(lo + d, lo, true) / exact - 1), 0.10) << d << "," << lo;
    }
  }
}

TEST(Theta, ZeroTemperatureLimits) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(theta(inf), 1.0);
  EXPECT_EQ(theta_tilde(inf), 0.5);
  EXPECT_EQ(theta_factor(inf), 1.0);
  EXPECT_EQ(theta_tilde_factor(inf), 0.5);
  EXPECT_NEAR(theta(40.0), 1.0, 1e-12);
  EXPECT_NEAR(theta_tilde(40.0), 0.5, 1e-12);
}

TEST(Theta, SmallAlphaApproachesSqrtAlpha) {
  EXPECT_LT(std::abs(theta(0.01) / 0.1 - 1), 0.15);
}

TEST(Theta, ExactOverlapsMatchMehlerClosedForm) {
  for (double a : {0.05, 0.2, 1.0, 3.0}) {
    EXPECT_NEAR(theta(a, {}, OverlapPolicy::exact()), theta_exact_closed_form(a), 2e-6) << a;
  }
}

TEST(Theta, TruncationTolerancesAgree) {
  TruncationPolicy tight;
  tight.tail_weight_tol = 1e-8;
  for (double a : {0.01, 0.1, 1.0}) {
    EXPECT_NEAR(theta(a, tight) / theta(a), 1.0, 1e-4) << a;
    EXPECT_NEAR(theta_tilde(a, tight) / theta_tilde(a), 1.0, 1e-4) << a;
  }
}

TEST(Theta, IncreasingAndBounded) {
  double prev_t = 0.0, prev_tt = 0.0;
  for (double a = 0.01; a < 20.0; a *= 1.5) {
    const double t = theta(a), tt = theta_tilde(a);
    // strictly increasing until the value saturates in double precision
    if (prev_t < 1.0 - 1e-12) EXPECT_GT(t, prev_t) << a; else EXPECT_GE(t, prev_t) << a;
    if (prev_tt < 0.5 - 1e-12) EXPECT_GT(tt, prev_tt) << a; else EXPECT_GE(tt, prev_tt) << a;
    EXPECT_LE(t, 1.0 + 1e-14);
    EXPECT_LE(tt, 0.5 + 1e-14);
    prev_t = t;
    prev_tt = tt;
  }
}

TEST(Theta, CapBindsForTinyAlpha) {
  EXPECT_THROW(theta(1e-6), TruncationError);
  EXPECT_THROW(theta(0.0), DomainError);
}

// Expected to fail: the ratio tends to 1/sqrt(2) as alpha -> 0.
TEST(Theta, TildeExactVersusSimplifiedAsymptoticWithinTenPercent) {
  const OverlapPolicy k0{1, false};
  for (double a : {0.01, 0.02, 0.05}) {
    const double exact = theta_tilde(a, {}, OverlapPolicy::exact());
    const double approx = theta_tilde(a, {}, k0);
    EXPECT_LT(std::abs(approx / exact - 1), 0.10) << "alpha " << a << ": exact " << exact << ", K(0) " << approx;
  }
}

TEST(Theta, LimitingForms) {
  RenormalizationModel lf;
  EXPECT_DOUBLE_EQ(theta_factor(0.04, lf), 0.2);
  EXPECT_DOUBLE_EQ(theta_tilde_factor(0.04, lf), 0.2);
  EXPECT_DOUBLE_EQ(theta_factor(4.0, lf), 1.0);
  EXPECT_DOUBLE_EQ(theta_tilde_factor(4.0, lf), 0.5);
}

TEST(Interaction, UParam) {
  const auto trap = clock_2d_trap();
  const double m = kCodata2018.mass_sr87();
  EXPECT_EQ(u_param(0.0, trap, m), 0.0);
  const TrapGeometry doubled(2 * trap.omega_x(), 2 * trap.omega_y(), 2 * trap.omega_z(), 0.07);
  const double a = -280 * kCodata2018.bohr_radius();
  EXPECT_NEAR(u_param(a, doubled, m) / u_param(a, trap, m), 2 * std::sqrt(2.0), 1e-13);
  // Hand evaluation of 4 a sqrt(m wx wy wz / h), then the frozen regression value.
  const double h = 2 * M_PI * 1.054571817e-34;
  const double hand = 4 * a * std::sqrt(m * trap.omega_x() * trap.omega_y() * trap.omega_z() / h);
  EXPECT_NEAR(u_param(a, trap, m), hand, 1e-12 * std::abs(hand));
  EXPECT_NEAR(from_angular(u_param(a, trap, m)), -5441.61, 0.01);
  EXPECT_GT(u_param(-a, trap, m), 0.0);
}

TEST(Interaction, ZeroTemperatureGivesHalfU) {
  const auto trap = clock_2d_trap();
  const double m = kCodata2018.mass_sr87();
  const double a = -70 * kCodata2018.bohr_radius();
  for (auto kind : {Renormalization::LimitingForms, Renormalization::BoltzmannSum}) {
    RenormalizationModel model;
    model.kind = kind;
    EXPECT_NEAR(mean_interaction(a, trap, ThermalState(0, 0, 0), m, model), u_param(a, trap, m) / 2, 1e-12);
  }
}

TEST(Interaction, DecreasesWithAnyTemperature) {
  const auto trap = clock_2d_trap();
  const double m = kCodata2018.mass_sr87();
  const double a = -70 * kCodata2018.bohr_radius();
  RenormalizationModel sums;
  sums.kind = Renormalization::BoltzmannSum;
  const double temps[] = {0.5e-6, 1e-6, 2e-6, 4.5e-6, 8e-6};
  for (int axis = 0; axis < 3; ++axis) {
    double prev = std::numeric_limits<double>::infinity();
    for (double t : temps) {
      double tt[3] = {4.5e-6, 4.5e-6, 4.5e-6};
      tt[axis] = t;
      const double v = std::abs(mean_interaction(a, trap, ThermalState(tt[0], tt[1], tt[2]), m, sums));
      EXPECT_LT(v, prev) << "axis " << axis << " T " << t;
      prev = v;
    }
  }
}

TEST(Interaction, SignAndMagnitude) {
  const auto trap = clock_2d_trap();
  const double m = kCodata2018.mass_sr87();
  const ThermalState th(4.5e-6, 4.5e-6, 4.5e-6);
  for (double a0 : {-280.0, 150.0}) {
    const auto ip = make_interaction(a0 * kCodata2018.bohr_radius(), trap, th, m);
    EXPECT_EQ(std::signbit(ip.u), std::signbit(a0));
    EXPECT_EQ(std::signbit(ip.mean_u_thermal), std::signbit(a0));
    EXPECT_LE(std::abs(ip.mean_u_thermal), std::abs(ip.u));
  }
}

TEST(Gamma, TwoDimensionalLattice) {
  const auto trap = clock_2d_trap();
  const double mu = mean_interaction(-70 * kCodata2018.bohr_radius(), trap, ThermalState(4.5e-6, 4.5e-6, 4.5e-6),
                                     kCodata2018.mass_sr87());
  const double g = gamma_ratio(2, mu, to_angular(6.25));
  EXPECT_NEAR(g, 10.0, 3.0);
}

TEST(Gamma, OneDimensionalLattice) {
  // Pancakes: omega_Y tight, omega_X and omega_Z weak.
  const TrapGeometry trap(to_angular(500.0), to_angular(80e3), to_angular(500.0), 0.07);
  const double mu = mean_interaction(-70 * kCodata2018.bohr_radius(), trap, ThermalState(4e-6, 4e-6, 4e-6),
                                     kCodata2018.mass_sr87());
  EXPECT_NEAR(gamma_ratio(17, mu, to_angular(6.25)), 0.6, 0.18);
}

TEST(Gamma, EdgeCases) {
  EXPECT_EQ(gamma_ratio(2, 0.0, 1.0), 0.0);
  EXPECT_THROW(gamma_ratio(1, 1.0, 1.0), DomainError);
  EXPECT_THROW(gamma_ratio(2, 1.0, 0.0), DomainError);
}

TEST(Gamma, ThermalMeanRabiCrossCheck) {
  // Boltzmann-averaged pair Rabi frequency stays near the bare value at eta = 0.07 and 4.5 uK.
  const double alpha = boltzmann_alpha(to_angular(800.0), 4.5e-6);
  const double w = thermal_mean_rabi(to_angular(6.25), 0.07, alpha);
  EXPECT_GT(w, 0.0);
  EXPECT_LT(w, to_angular(6.25));
}
