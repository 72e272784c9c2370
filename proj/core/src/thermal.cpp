#include "isb/thermal.hpp"

#include <cmath>
#include <sstream>

#include "isb/errors.hpp"
#include "isb/parallel.hpp"
#include "isb/spin_model.hpp"

namespace isb {

namespace {

struct PairTerm {
  double weight;
  double u;
  double rabi1;
  double rabi2;
};

void require_finite_temperature(const ThermalLineshapeConfig& cfg, const char* who) {
  if (!(cfg.thermal.temp_z() > 0.0)) throw DomainError(std::string(who) + ": requires T_Z > 0");
}

// Normalized pair terms for n1 > n2. Weights are exp(-alpha (n1 + n2 - 1)) so the (1,0) pair has
// weight one before normalization.
std::vector<PairTerm> pair_terms(const ThermalLineshapeConfig& cfg, double u_eff, bool grouped) {
  const double alpha = cfg.alpha_z();
  const int n_max = truncation_mode(alpha, cfg.truncation);
  const OverlapPolicy& op = cfg.renormalization.overlap;
  const int band = std::min(std::max(op.asymptotic_switch, 1), n_max + 1);
  const auto exact = overlap_band(n_max, band);
  const double eta = cfg.trap.eta_z();
  const double rabi = cfg.drive.rabi_bare();

  std::vector<PairTerm> terms;
  auto weight = [&](int n1, int n2) { return std::exp(-alpha * (n1 + n2 - 1.0)); };

  if (grouped) {
    // Sideband formula: Delta Omega depends on d only; rabi1 - rabi2 carries it.
    const double ddo = rabi * eta * eta;
    for (int d = 1; d <= n_max; ++d) {
      const double r2 = 0.0, r1 = ddo * d;
      if (d < band) {
        for (int n2 = 0; n2 + d <= n_max; ++n2) {
          terms.push_back({weight(n2 + d, n2), u_eff * exact[static_cast<std::size_t>(d)][static_cast<std::size_t>(n2)], r1, r2});
        }
      } else if (op.elliptic) {
        for (int n2 = 0; n2 + d <= n_max; ++n2) {
          terms.push_back({weight(n2 + d, n2), u_eff * overlap_asymptotic(n2 + d, n2, true), r1, r2});
        }
      } else {
        // sum_{n2} exp(-alpha (2 n2 + d - 1))
        const int count = n_max - d + 1;
        const double w = std::exp(-alpha * (d - 1.0)) * (-std::expm1(-2.0 * alpha * count)) /
                         (-std::expm1(-2.0 * alpha));
        terms.push_back({w, u_eff / std::sqrt(std::numbers::pi * d), r1, r2});
      }
    }
  } else {
    std::vector<double> rabi_n(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) rabi_n[static_cast<std::size_t>(n)] = rabi_frequency_mode(n, eta, rabi, false);
    terms.reserve(static_cast<std::size_t>(n_max) * (static_cast<std::size_t>(n_max) + 1) / 2);
    for (int n1 = 1; n1 <= n_max; ++n1) {
      for (int n2 = 0; n2 < n1; ++n2) {
        const int d = n1 - n2;
        const double i12 = (d < band) ? exact[static_cast<std::size_t>(d)][static_cast<std::size_t>(n2)]
                                      : overlap_asymptotic(n1, n2, op.elliptic);
        terms.push_back({weight(n1, n2), u_eff * i12, rabi_n[static_cast<std::size_t>(n1)],
                         rabi_n[static_cast<std::size_t>(n2)]});
      }
    }
  }
  double norm = 0.0;
  for (const auto& t : terms) norm += t.weight;
  for (auto& t : terms) t.weight /= norm;
  return terms;
}

}  // namespace

InteractionParams ThermalLineshapeConfig::interaction() const {
  return make_interaction(a_eg_minus, trap, thermal, mass, renormalization);
}

double ThermalLineshapeConfig::alpha_z() const { return thermal.alpha_z(trap); }

double ThermalLineshapeConfig::transverse_factor() const {
  return theta_factor(thermal.alpha_x(trap), renormalization) * theta_factor(thermal.alpha_y(trap), renormalization);
}

Spectrum thermal_lineshape_bruteforce(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings,
                                      int threads) {
  require_finite_temperature(cfg, "thermal_lineshape_bruteforce");
  const double u_eff = u_param(cfg.a_eg_minus, cfg.trap, cfg.mass) * cfg.transverse_factor();
  const double t = cfg.drive.duration();
  const Direction dir = cfg.drive.direction();
  std::vector<SpectrumPoint> pts(detunings.size());

  if (cfg.fidelity == PairFidelity::SidebandFormula) {
    if (u_eff == 0.0) {
      for (std::size_t i = 0; i < detunings.size(); ++i) pts[i] = SpectrumPoint{detunings[i], 0.0, std::nullopt, true};
      return Spectrum(std::move(pts));
    }
    const auto terms = pair_terms(cfg, u_eff, true);
    const double sign = (dir == Direction::GtoE) ? 1.0 : -1.0;
    parallel_for(detunings.size(), threads, [&](std::size_t i) {
      const double delta = detunings[i];
      double acc = 0.0;
      for (const auto& p : terms) {
        acc += p.weight * rabi_lineshape(t, delta - sign * p.u, (p.rabi1 - p.rabi2) / std::numbers::sqrt2);
      }
      pts[i] = SpectrumPoint{delta, 0.5 * acc, std::nullopt, true};
    });
    return Spectrum(std::move(pts));
  }

  const auto terms = pair_terms(cfg, u_eff, false);
  parallel_for(detunings.size(), threads, [&](std::size_t i) {
    const double delta = detunings[i];
    double acc = 0.0;
    for (const auto& p : terms) acc += p.weight * pair_excitation_fraction(p.rabi1, p.rabi2, p.u, delta, t, dir);
    pts[i] = SpectrumPoint{delta, std::min(acc, 1.0), std::nullopt, true};
  });
  return Spectrum(std::move(pts));
}

Spectrum thermal_carrier_reference(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings) {
  require_finite_temperature(cfg, "thermal_carrier_reference");
  const double alpha = cfg.alpha_z();
  const int n_max = truncation_mode(alpha, cfg.truncation);
  const bool linear = cfg.fidelity == PairFidelity::SidebandFormula;
  std::vector<double> w(static_cast<std::size_t>(n_max) + 1), rabi(w.size());
  double norm = 0.0, prefix = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const auto k = static_cast<std::size_t>(n);
    w[k] = std::exp(-alpha * n);
    rabi[k] = rabi_frequency_mode(n, cfg.trap.eta_z(), cfg.drive.rabi_bare(), linear);
    norm += w[k] * prefix;
    prefix += w[k];
  }
  const std::vector<double> others = other_weights(w);
  const double t = cfg.drive.duration();
  std::vector<SpectrumPoint> pts;
  pts.reserve(detunings.size());
  for (double delta : detunings) {
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += 0.5 * w[k] * others[k] * rabi_lineshape(t, delta, rabi[k]);
    // sum_{n1>n2} w1 w2 (f1 + f2) / 2 = sum_n f_n w_n (Z - w_n) / 2
    pts.push_back(SpectrumPoint{delta, acc / norm, std::nullopt, true});
  }
  return Spectrum(std::move(pts));
}

double isb_closed_form_excitations(double delta, double mean_u, double alpha_z, double eta, double pulse_area,
                                   double rabi_bare) {
  if (mean_u == 0.0 || delta == 0.0 || delta * mean_u < 0.0) return 0.0;
  const double r = mean_u / (std::sqrt(std::numbers::pi) * delta);  // > 0 on the resonant side
  const double pre = std::pow(eta, 4) * std::numbers::pi * std::numbers::pi * std::sqrt(std::numbers::pi) *
                     pulse_area * rabi_bare / (2.0 * std::abs(mean_u)) / (alpha_z * alpha_z);
  return pre * std::exp(7.0 * std::log(r) - r * r);
}

double isb_peak_detuning(double mean_u) { return std::abs(mean_u) / std::sqrt(3.5 * std::numbers::pi); }

Spectrum isb_closed_form(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings,
                         ClosedFormDiagnostics* diagnostics) {
  require_finite_temperature(cfg, "isb_closed_form");
  ClosedFormDiagnostics diag;
  diag.alpha_z = cfg.alpha_z();
  diag.mean_u = cfg.interaction().mean_u_thermal;
  const double eta = cfg.trap.eta_z();
  const double rabi = cfg.drive.rabi_bare();
  const double s = cfg.drive.pulse_area_factor();
  // Mean first-order Delta Omega over ordered pairs: Omega eta^2 <d> / sqrt 2, <d> = 1 / (1 - e^{-alpha}).
  diag.pulse_dephasing = cfg.drive.duration() * rabi * eta * eta / (std::numbers::sqrt2 * -std::expm1(-diag.alpha_z));
  if (!(diag.alpha_z <= kClosedFormMaxAlpha)) {
    std::ostringstream os;
    os << "closed form assumes k_B T_Z >> hbar omega_Z (alpha_z = " << diag.alpha_z << " > " << kClosedFormMaxAlpha
       << ")";
    diag.warnings.push_back(os.str());
  }
  if (diag.pulse_dephasing > 0.5) {
    std::ostringstream os;
    os << "closed form assumes t <Delta Omega> << 1 (got " << diag.pulse_dephasing << ")";
    diag.warnings.push_back(os.str());
  }
  const double sign = (cfg.drive.direction() == Direction::GtoE) ? 1.0 : -1.0;
  std::vector<SpectrumPoint> pts;
  pts.reserve(detunings.size());
  std::size_t near_carrier = 0, clipped = 0;
  for (double delta : detunings) {
    double v = 0.5 * isb_closed_form_excitations(sign * delta, diag.mean_u, diag.alpha_z, eta, s, rabi);
    bool valid = std::abs(delta) >= 5.0 * rabi;
    if (!valid) ++near_carrier;
    if (v > 1.0) {
      v = 1.0;
      valid = false;
      ++clipped;
    }
    pts.push_back(SpectrumPoint{delta, v, std::nullopt, valid});
  }
  if (near_carrier > 0) {
    diag.warnings.push_back(std::to_string(near_carrier) + " grid points within 5 Omega_B of the carrier");
  }
  if (clipped > 0) diag.warnings.push_back(std::to_string(clipped) + " grid points exceeded unit excitation");
  if (diagnostics) *diagnostics = diag;
  return Spectrum(std::move(pts));
}

}  // namespace isb
