#pragma once

#include <numbers>

#include "isb/errors.hpp"

namespace isb {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class PhysicalConstants {
 public:
  constexpr PhysicalConstants(double hbar, double boltzmann_k, double bohr_radius, double mass_sr87)
      : hbar_(hbar), boltzmann_k_(boltzmann_k), bohr_radius_(bohr_radius), mass_sr87_(mass_sr87) {
    if (!(hbar > 0.0 && boltzmann_k > 0.0 && bohr_radius > 0.0 && mass_sr87 > 0.0)) {
      throw DomainError("physical constants must be strictly positive");
    }
  }

  constexpr double hbar() const noexcept { return hbar_; }
  constexpr double planck() const noexcept { return kTwoPi * hbar_; }
  constexpr double boltzmann_k() const noexcept { return boltzmann_k_; }
  constexpr double bohr_radius() const noexcept { return bohr_radius_; }
  constexpr double mass_sr87() const noexcept { return mass_sr87_; }

 private:
  double hbar_;
  double boltzmann_k_;
  double bohr_radius_;
  double mass_sr87_;
};

inline constexpr double kAtomicMassUnit = 1.66053906660e-27;

// CODATA 2018; 87Sr mass from the AME atomic mass table.
inline constexpr PhysicalConstants kCodata2018{1.054571817e-34, 1.380649e-23, 5.29177210903e-11,
                                               86.9088774642 * kAtomicMassUnit};

constexpr double to_angular(double hz) noexcept { return hz * kTwoPi; }
constexpr double from_angular(double rad_per_s) noexcept { return rad_per_s / kTwoPi; }

// eta = k * a_ho / sqrt(2), a_ho = sqrt(hbar / (m omega)).
double lamb_dicke(double k_z, double omega_z, double mass,
                  const PhysicalConstants& c = kCodata2018);

// Inverse of lamb_dicke in k.
double probe_wavevector(double eta, double omega_z, double mass,
                        const PhysicalConstants& c = kCodata2018);

double oscillator_length(double omega, double mass, const PhysicalConstants& c = kCodata2018);

// hbar omega / (k_B T); +infinity at T = 0.
double boltzmann_alpha(double omega, double temperature, const PhysicalConstants& c = kCodata2018);

}  // namespace isb
