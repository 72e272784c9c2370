#include "isb/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "isb/errors.hpp"
#include "isb/gauss_hermite.hpp"

namespace isb {

namespace {

const double kSqrtPi = std::sqrt(std::numbers::pi);

// Beyond this alpha every weight but the lowest configuration underflows; the limits are exact
// to double precision there.
constexpr double kAlphaLimit = 700.0;

enum class PairSet { All, Ordered };

// Sums of I_{n1 n2} exp(-alpha (n1 + n2)) and of the weights alone.
struct PairSums {
  double weighted = 0.0;
  double norm = 0.0;
};

double geometric_pair_weight(double alpha, int n_max, int d) {
  // sum_{n=0}^{n_max-d} exp(-alpha (2n + d))
  const double r = std::exp(-2.0 * alpha);
  const int count = n_max - d + 1;
  return std::exp(-alpha * d) * (-std::expm1(-2.0 * alpha * count)) / (1.0 - r);
}

// Exact overlaps everywhere, via densities rho(z) = sum_n w_n psi_n(z)^2 on a single rule.
PairSums exact_pair_sums(double alpha, int n_max, PairSet set) {
  const auto rule = gauss_hermite_rule(2 * n_max + 2);
  std::vector<double> lpsi(static_cast<std::size_t>(n_max) + 1);
  std::vector<double> w(lpsi.size());
  for (int n = 0; n <= n_max; ++n) w[static_cast<std::size_t>(n)] = std::exp(-alpha * n);

  double acc = 0.0;
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    const double x = rule->nodes[i];
    if (x < 0.0) continue;
    const double mult = (x == 0.0) ? 1.0 : 2.0;
    log_hermite_functions(x / std::numbers::sqrt2, lpsi);
    double node_sum = 0.0;
    if (set == PairSet::All) {
      double rho = 0.0;
      for (std::size_t n = 0; n < lpsi.size(); ++n) rho += w[n] * std::exp(2.0 * lpsi[n]);
      node_sum = rho * rho;
    } else {
      double prefix = 0.0;
      for (std::size_t n = 0; n < lpsi.size(); ++n) {
        const double term = w[n] * std::exp(2.0 * lpsi[n]);
        node_sum += term * prefix;
        prefix += term;
      }
    }
    acc += mult * rule->scaled_weights[i] * node_sum;
  }
  PairSums s;
  s.weighted = kSqrtPi * acc;
  // Ordered norm as a prefix sum; (z^2 - sum w^2) / 2 cancels catastrophically at large alpha.
  double z = 0.0, ordered = 0.0;
  for (double wn : w) {
    ordered += wn * z;
    z += wn;
  }
  s.norm = (set == PairSet::All) ? z * z : ordered;
  return s;
}

PairSums switched_pair_sums(double alpha, int n_max, PairSet set, const OverlapPolicy& policy) {
  const int band = std::min(policy.asymptotic_switch, n_max + 1);
  const auto exact = overlap_band(n_max, band);
  PairSums s;
  const int d0 = (set == PairSet::All) ? 0 : 1;
  for (int d = d0; d < band; ++d) {
    const double mult = (d == 0 || set == PairSet::Ordered) ? 1.0 : 2.0;
    const auto& row = exact[static_cast<std::size_t>(d)];
    for (int n = 0; n + d <= n_max; ++n) {
      const double wt = std::exp(-alpha * (2.0 * n + d));
      s.weighted += mult * wt * row[static_cast<std::size_t>(n)];
      s.norm += mult * wt;
    }
  }
  for (int d = std::max(band, d0); d <= n_max; ++d) {
    const double mult = (set == PairSet::Ordered) ? 1.0 : 2.0;
    if (!policy.elliptic) {
      const double wt = geometric_pair_weight(alpha, n_max, d);
      s.weighted += mult * wt / std::sqrt(std::numbers::pi * d);
      s.norm += mult * wt;
    } else {
      for (int n = 0; n + d <= n_max; ++n) {
        const double wt = std::exp(-alpha * (2.0 * n + d));
        s.weighted += mult * wt * overlap_asymptotic(n + d, n, true);
        s.norm += mult * wt;
      }
    }
  }
  return s;
}

double thermal_ratio(double alpha, const TruncationPolicy& truncation, const OverlapPolicy& overlap, PairSet set) {
  if (!(alpha > 0.0) || std::isnan(alpha)) throw DomainError("theta: alpha must be > 0");
  if (alpha > kAlphaLimit) return set == PairSet::All ? 1.0 : 0.5;
  truncation.validate();
  if (overlap.asymptotic_switch < 1) throw DomainError("theta: asymptotic_switch must be >= 1");
  const int n_max = truncation_mode(alpha, truncation);
  const PairSums s = (overlap.asymptotic_switch > n_max) ? exact_pair_sums(alpha, n_max, set)
                                                         : switched_pair_sums(alpha, n_max, set, overlap);
  return s.weighted / s.norm;
}

}  // namespace

void TruncationPolicy::validate() const {
  if (!(tail_weight_tol > 0.0 && tail_weight_tol < 1.0)) {
    throw DomainError("TruncationPolicy: tail_weight_tol must lie in (0, 1)");
  }
  if (max_mode < 1) throw DomainError("TruncationPolicy: max_mode must be >= 1");
}

int truncation_mode(double alpha, const TruncationPolicy& policy) {
  policy.validate();
  if (!(alpha > 0.0)) throw DomainError("truncation_mode: alpha must be > 0");
  // Tail beyond n_max for a geometric distribution: exp(-alpha (n_max + 1)).
  const double needed = std::ceil(-std::log(policy.tail_weight_tol) / alpha) - 1.0;
  const double n = std::max(1.0, needed);
  if (n > policy.max_mode) {
    const double achieved = std::exp(-alpha * (policy.max_mode + 1.0));
    throw TruncationError("mode sum needs n_max = " + std::to_string(static_cast<long>(n)) + " > max_mode = " +
                              std::to_string(policy.max_mode) + " (achieved tail weight " +
                              std::to_string(achieved) + ")",
                          achieved, static_cast<long>(n));
  }
  return static_cast<int>(n);
}

std::vector<double> other_weights(const std::vector<double>& w) {
  std::vector<double> out(w.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    out[k] = acc;
    acc += w[k];
  }
  acc = 0.0;
  for (std::size_t k = w.size(); k-- > 0;) {
    out[k] += acc;
    acc += w[k];
  }
  return out;
}

double overlap_integral(int n1, int n2, const TruncationPolicy& policy) {
  if (n1 < 0 || n2 < 0) throw DomainError("overlap_integral: mode indices must be >= 0");
  const int hi = std::max(n1, n2);
  if (hi > policy.max_mode) {
    throw TruncationError("overlap_integral: mode " + std::to_string(hi) + " exceeds max_mode " +
                              std::to_string(policy.max_mode),
                          std::numeric_limits<double>::quiet_NaN(), hi);
  }
  const auto rule = gauss_hermite_rule(2 * (n1 + n2) + 2);
  std::vector<double> lpsi(static_cast<std::size_t>(hi) + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    const double x = rule->nodes[i];
    if (x < 0.0) continue;
    const double mult = (x == 0.0) ? 1.0 : 2.0;
    log_hermite_functions(x / std::numbers::sqrt2, lpsi);
    acc += mult * rule->scaled_weights[i] *
           std::exp(2.0 * (lpsi[static_cast<std::size_t>(n1)] + lpsi[static_cast<std::size_t>(n2)]));
  }
  return kSqrtPi * acc;
}

double elliptic_k(double m) {
  if (!(m < 1.0)) throw DomainError("elliptic_k: parameter must be < 1");
  if (m == 0.0) return 0.5 * std::numbers::pi;
  if (m > 0.0) return std::comp_ellint_1(std::sqrt(m));
  // Imaginary-modulus transformation K(m) = K(m / (m - 1)) / sqrt(1 - m).
  const double mp = m / (m - 1.0);
  return std::comp_ellint_1(std::sqrt(mp)) / std::sqrt(1.0 - m);
}

double overlap_asymptotic(int n1, int n2, bool use_elliptic) {
  if (n1 < 0 || n2 < 0) throw DomainError("overlap_asymptotic: mode indices must be >= 0");
  if (n1 == n2) throw DomainError("overlap_asymptotic: singular for n1 == n2");
  const double d = std::abs(static_cast<double>(n1) - static_cast<double>(n2));
  const double base = 1.0 / std::sqrt(std::numbers::pi * d);
  if (!use_elliptic) return base;
  const double m = 0.5 * (1.0 - (static_cast<double>(n1) + static_cast<double>(n2)) / d);
  return 2.0 * elliptic_k(m) / std::numbers::pi * base;
}

double overlap_switched(int n1, int n2, const OverlapPolicy& policy) {
  if (std::abs(n1 - n2) >= policy.asymptotic_switch) return overlap_asymptotic(n1, n2, policy.elliptic);
  TruncationPolicy unlimited;
  unlimited.max_mode = std::numeric_limits<int>::max();
  return overlap_integral(n1, n2, unlimited);
}

std::vector<std::vector<double>> overlap_band(int n_max, int band) {
  if (n_max < 0 || band < 1) throw DomainError("overlap_band: need n_max >= 0 and band >= 1");
  band = std::min(band, n_max + 1);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(band));
  for (int d = 0; d < band; ++d) out[static_cast<std::size_t>(d)].assign(static_cast<std::size_t>(n_max - d + 1), 0.0);

  const auto rule = gauss_hermite_rule(2 * n_max + 2);
  std::vector<double> lpsi(static_cast<std::size_t>(n_max) + 1);
  std::vector<double> sq(lpsi.size());
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    const double x = rule->nodes[i];
    if (x < 0.0) continue;
    const double wmult = ((x == 0.0) ? 1.0 : 2.0) * rule->scaled_weights[i] * kSqrtPi;
    log_hermite_functions(x / std::numbers::sqrt2, lpsi);
    for (std::size_t n = 0; n < lpsi.size(); ++n) sq[n] = std::exp(2.0 * lpsi[n]);
    for (int d = 0; d < band; ++d) {
      auto& row = out[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < row.size(); ++n) row[n] += wmult * sq[n] * sq[n + static_cast<std::size_t>(d)];
    }
  }
  return out;
}

double theta(double alpha, const TruncationPolicy& truncation, const OverlapPolicy& overlap) {
  return thermal_ratio(alpha, truncation, overlap, PairSet::All);
}

double theta_tilde(double alpha, const TruncationPolicy& truncation, const OverlapPolicy& overlap) {
  return thermal_ratio(alpha, truncation, overlap, PairSet::Ordered);
}

double theta_exact_closed_form(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("theta_exact_closed_form: alpha must be > 0");
  return std::sqrt(std::tanh(0.5 * alpha));
}

double theta_factor(double alpha, const RenormalizationModel& model) {
  if (std::isinf(alpha) && alpha > 0.0) return 1.0;
  if (model.kind == Renormalization::LimitingForms) {
    if (!(alpha > 0.0)) throw DomainError("theta_factor: alpha must be > 0");
    return std::min(1.0, std::sqrt(alpha));
  }
  return theta(alpha, model.truncation, model.overlap);
}

double theta_tilde_factor(double alpha, const RenormalizationModel& model) {
  if (std::isinf(alpha) && alpha > 0.0) return 0.5;
  if (model.kind == Renormalization::LimitingForms) {
    if (!(alpha > 0.0)) throw DomainError("theta_tilde_factor: alpha must be > 0");
    return std::min(0.5, std::sqrt(alpha));
  }
  return theta_tilde(alpha, model.truncation, model.overlap);
}

double u_param(double a, const TrapGeometry& trap, double mass, const PhysicalConstants& c) {
  if (!(mass > 0.0)) throw DomainError("u_param: mass must be > 0");
  if (!std::isfinite(a)) throw DomainError("u_param: scattering length must be finite");
  return 4.0 * a * std::sqrt(mass * trap.omega_x() * trap.omega_y() * trap.omega_z() / c.planck());
}

double mean_interaction(double a, const TrapGeometry& trap, const ThermalState& thermal, double mass,
                        const RenormalizationModel& model, const PhysicalConstants& c) {
  const double u = u_param(a, trap, mass, c);
  if (u == 0.0) return 0.0;
  return u * theta_factor(thermal.alpha_x(trap, c), model) * theta_factor(thermal.alpha_y(trap, c), model) *
         theta_tilde_factor(thermal.alpha_z(trap, c), model);
}

InteractionParams make_interaction(double a, const TrapGeometry& trap, const ThermalState& thermal, double mass,
                                   const RenormalizationModel& model, const PhysicalConstants& c) {
  return InteractionParams{a, u_param(a, trap, mass, c), mean_interaction(a, trap, thermal, mass, model, c)};
}

double gamma_ratio(int n_atoms, double mean_u, double mean_rabi) {
  if (n_atoms < 2) throw DomainError("gamma_ratio: needs at least two atoms");
  if (!(mean_rabi > 0.0)) throw DomainError("gamma_ratio: mean Rabi frequency must be > 0");
  return (n_atoms - 1) * std::abs(mean_u) / (2.0 * mean_rabi);
}

}  // namespace isb
