#include "isb/units.hpp"

#include <cmath>
#include <limits>

namespace isb {

double oscillator_length(double omega, double mass, const PhysicalConstants& c) {
  if (!(omega > 0.0) || !(mass > 0.0)) throw DomainError("oscillator_length: omega and mass must be > 0");
  return std::sqrt(c.hbar() / (mass * omega));
}

double lamb_dicke(double k_z, double omega_z, double mass, const PhysicalConstants& c) {
  if (!(k_z >= 0.0) || !std::isfinite(k_z)) throw DomainError("lamb_dicke: k_z must be finite and >= 0");
  return k_z * oscillator_length(omega_z, mass, c) / std::numbers::sqrt2;
}

double probe_wavevector(double eta, double omega_z, double mass, const PhysicalConstants& c) {
  if (!(eta >= 0.0)) throw DomainError("probe_wavevector: eta must be >= 0");
  return eta * std::numbers::sqrt2 / oscillator_length(omega_z, mass, c);
}

double boltzmann_alpha(double omega, double temperature, const PhysicalConstants& c) {
  if (!(omega > 0.0)) throw DomainError("boltzmann_alpha: omega must be > 0");
  if (!(temperature >= 0.0)) throw DomainError("boltzmann_alpha: temperature must be >= 0");
  if (temperature == 0.0) return std::numeric_limits<double>::infinity();
  return c.hbar() * omega / (c.boltzmann_k() * temperature);
}

}  // namespace isb
