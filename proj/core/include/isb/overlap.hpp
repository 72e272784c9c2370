#pragma once

#include <vector>

#include "isb/types.hpp"
#include "isb/units.hpp"

namespace isb {

struct TruncationPolicy {
  double tail_weight_tol = 1e-6;  // Boltzmann weight allowed beyond the last mode
  int max_mode = 4000;
  void validate() const;
};

// Largest axial mode kept for exp(-alpha n) weights, at least 1. Throws TruncationError when the
// tolerance would need more than max_mode.
int truncation_mode(double alpha, const TruncationPolicy& policy = {});

// sum_{m != n} w_m for each n, without forming Z - w_n.
std::vector<double> other_weights(const std::vector<double>& w);

// Pairs with |n1 - n2| >= asymptotic_switch use the asymptotic overlap; closer pairs are exact.
struct OverlapPolicy {
  int asymptotic_switch = 2;
  bool elliptic = false;  // K(0) simplification when false
  static OverlapPolicy exact() { return OverlapPolicy{1 << 30, false}; }
};

// I_{n1 n2} = sqrt(2 pi) * integral psi_{n1}^2 psi_{n2}^2 dz, exact by Gauss-Hermite quadrature.
double overlap_integral(int n1, int n2, const TruncationPolicy& policy = {});

// 2 K(m) / (pi sqrt(pi |d|)), m = (1 - (n1+n2)/|d|) / 2, or 1/sqrt(pi |d|) without the elliptic factor.
double overlap_asymptotic(int n1, int n2, bool use_elliptic);

// Complete elliptic integral of the first kind in parameter form K(m), any m < 1.
double elliptic_k(double m);

double overlap_switched(int n1, int n2, const OverlapPolicy& policy = {});

// Exact I(n + d, n) for d < band and n + d <= n_max, indexed [d][n], from a single quadrature sweep.
std::vector<std::vector<double>> overlap_band(int n_max, int band);

// Boltzmann-weighted overlap sums: unrestricted (theta) and over n1 > n2 (theta_tilde).
double theta(double alpha, const TruncationPolicy& truncation = {}, const OverlapPolicy& overlap = {});
double theta_tilde(double alpha, const TruncationPolicy& truncation = {}, const OverlapPolicy& overlap = {});

// Closed form of theta with exact overlaps (Mehler kernel): sqrt(tanh(alpha / 2)).
double theta_exact_closed_form(double alpha);

enum class Renormalization {
  LimitingForms,  // theta = min(1, sqrt(alpha)), theta_tilde = min(1/2, sqrt(alpha))
  BoltzmannSum,   // the sums above
};

struct RenormalizationModel {
  Renormalization kind = Renormalization::LimitingForms;
  TruncationPolicy truncation{};
  OverlapPolicy overlap{};
};

// alpha = +inf (zero temperature) returns the limits 1 and 1/2 for both models.
double theta_factor(double alpha, const RenormalizationModel& model = {});
double theta_tilde_factor(double alpha, const RenormalizationModel& model = {});

struct InteractionParams {
  double a_eg_minus = 0.0;      // m
  double u = 0.0;               // rad/s
  double mean_u_thermal = 0.0;  // rad/s
};

// u = 4 a sqrt(m wx wy wz / h)
double u_param(double a, const TrapGeometry& trap, double mass, const PhysicalConstants& c = kCodata2018);

// <U>_T = u theta(alpha_x) theta(alpha_y) theta_tilde(alpha_z)
double mean_interaction(double a, const TrapGeometry& trap, const ThermalState& thermal, double mass,
                        const RenormalizationModel& model = {}, const PhysicalConstants& c = kCodata2018);

InteractionParams make_interaction(double a, const TrapGeometry& trap, const ThermalState& thermal, double mass,
                                   const RenormalizationModel& model = {},
                                   const PhysicalConstants& c = kCodata2018);

// (N - 1) |<U>| / (2 <Omega>)
double gamma_ratio(int n_atoms, double mean_u, double mean_rabi);

}  // namespace isb
