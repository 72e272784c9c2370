#pragma once

#include <string>
#include <vector>

#include "isb/overlap.hpp"
#include "isb/types.hpp"

namespace isb {

enum class PairFidelity {
  ExactPair,        // full two-atom evolution per mode pair (carrier included), Laguerre Rabi frequencies
  SidebandFormula,  // f(t, delta - U_n, Delta Omega_n) per pair, first-order Delta Omega (sideband only)
};

struct ThermalLineshapeConfig {
  TrapGeometry trap;
  ThermalState thermal;
  double a_eg_minus = 0.0;  // m
  DriveParams drive;
  TruncationPolicy truncation{};
  PairFidelity fidelity = PairFidelity::SidebandFormula;
  RenormalizationModel renormalization{};
  double mass = kCodata2018.mass_sr87();

  InteractionParams interaction() const;
  double alpha_z() const;
  // theta(alpha_x) theta(alpha_y): transverse occupation folded into U.
  double transverse_factor() const;
};

// Boltzmann average over axial pairs n1 > n2 of the per-pair excitation fraction N^e / 2.
// ExactPair returns the full lineshape; SidebandFormula only the interaction sideband and is
// identically zero without interactions.
Spectrum thermal_lineshape_bruteforce(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings,
                                      int threads = 1);

// Same average of the interaction-free pair lineshape (f(Omega_n1) + f(Omega_n2)) / 2 with the Rabi
// frequencies of the configured fidelity. ExactPair minus this is its sideband part.
Spectrum thermal_carrier_reference(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings);

// Largest hbar omega_Z / k_B T_Z for which the closed form is used without a warning.
inline constexpr double kClosedFormMaxAlpha = 0.1;

struct ClosedFormDiagnostics {
  double alpha_z = 0.0;
  double mean_u = 0.0;               // rad/s
  double pulse_dephasing = 0.0;      // t <Delta Omega>
  std::vector<std::string> warnings;
};

// Finite-temperature closed form for the sideband, reported as excitation fraction (N^e / 2).
// Zero on the non-resonant side of the carrier. Points with |delta| < 5 Omega_B are flagged invalid.
Spectrum isb_closed_form(const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings,
                         ClosedFormDiagnostics* diagnostics = nullptr);

// <N^e> of the closed form at one detuning, given <U>_T, alpha_z, eta, s and Omega_B.
double isb_closed_form_excitations(double delta, double mean_u, double alpha_z, double eta, double pulse_area,
                                   double rabi_bare);

// |delta| of the closed-form maximum: |<U>| / sqrt(7 pi / 2).
double isb_peak_detuning(double mean_u);

// integral over p of sin^2(c sqrt(1 + p^2)) / (1 + p^2), adaptive quadrature to 1e-8 relative.
double sideband_kernel_integral(double c);

}  // namespace isb
