#include "isb/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace isb {

namespace {
bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }
}  // namespace

TrapGeometry::TrapGeometry(double omega_x, double omega_y, double omega_z, double eta_z, double waist_perp)
    : omega_x_(omega_x), omega_y_(omega_y), omega_z_(omega_z), eta_z_(eta_z), waist_perp_(waist_perp) {
  if (!positive_finite(omega_x) || !positive_finite(omega_y) || !positive_finite(omega_z)) {
    throw DomainError("TrapGeometry: trap frequencies must be positive and finite");
  }
  if (!(eta_z >= 0.0) || !std::isfinite(eta_z)) throw DomainError("TrapGeometry: eta_z must be >= 0");
  if (!positive_finite(waist_perp)) throw DomainError("TrapGeometry: waist_perp must be > 0");
}

double TrapGeometry::omega_perp() const noexcept { return std::sqrt(omega_x_ * omega_y_); }

bool TrapGeometry::eta_consistent_with(double k_z, double mass, double rel_tol,
                                       const PhysicalConstants& c) const {
  const double expected = lamb_dicke(k_z, omega_z_, mass, c);
  return std::abs(expected - eta_z_) <= rel_tol * std::max(std::abs(expected), std::abs(eta_z_));
}

TrapGeometry TrapGeometry::with_transverse_scale(double factor) const {
  return TrapGeometry(omega_x_ * factor, omega_y_ * factor, omega_z_, eta_z_, waist_perp_);
}

TrapGeometry TrapGeometry::with_eta(double eta) const {
  return TrapGeometry(omega_x_, omega_y_, omega_z_, eta, waist_perp_);
}

ThermalState::ThermalState(double temp_x, double temp_y, double temp_z)
    : temp_x_(temp_x), temp_y_(temp_y), temp_z_(temp_z) {
  for (double t : {temp_x, temp_y, temp_z}) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("ThermalState: temperatures must be >= 0");
  }
}

double ThermalState::alpha_x(const TrapGeometry& trap, const PhysicalConstants& c) const {
  return boltzmann_alpha(trap.omega_x(), temp_x_, c);
}
double ThermalState::alpha_y(const TrapGeometry& trap, const PhysicalConstants& c) const {
  return boltzmann_alpha(trap.omega_y(), temp_y_, c);
}
double ThermalState::alpha_z(const TrapGeometry& trap, const PhysicalConstants& c) const {
  return boltzmann_alpha(trap.omega_z(), temp_z_, c);
}

DriveParams::DriveParams(double rabi_bare, double detuning, double pulse_area_factor, double duration,
                         Direction dir)
    : rabi_bare_(rabi_bare),
      detuning_(detuning),
      pulse_area_factor_(pulse_area_factor),
      duration_(duration),
      direction_(dir) {
  if (!positive_finite(rabi_bare)) throw DomainError("DriveParams: rabi_bare must be > 0");
  if (!positive_finite(duration)) throw DomainError("DriveParams: duration must be > 0");
  if (!std::isfinite(detuning)) throw DomainError("DriveParams: detuning must be finite");
  const double area = duration * rabi_bare / kPi;
  if (std::abs(area - pulse_area_factor) > 1e-9 * std::max(1.0, std::abs(area))) {
    throw DomainError("DriveParams: duration and pulse area factor disagree (t * Omega != s * pi)");
  }
}

DriveParams DriveParams::from_pulse_area(double rabi_bare, double s, double detuning, Direction dir) {
  if (!positive_finite(rabi_bare)) throw DomainError("DriveParams: rabi_bare must be > 0");
  if (!positive_finite(s)) throw DomainError("DriveParams: pulse area factor must be > 0");
  return DriveParams(rabi_bare, detuning, s, s * kPi / rabi_bare, dir);
}

DriveParams DriveParams::from_duration(double rabi_bare, double duration, double detuning, Direction dir) {
  if (!positive_finite(rabi_bare)) throw DomainError("DriveParams: rabi_bare must be > 0");
  return DriveParams(rabi_bare, detuning, duration * rabi_bare / kPi, duration, dir);
}

DriveParams DriveParams::with_detuning(double detuning) const {
  return DriveParams(rabi_bare_, detuning, pulse_area_factor_, duration_, direction_);
}

DriveParams DriveParams::with_rabi(double rabi_bare) const {
  return from_pulse_area(rabi_bare, pulse_area_factor_, detuning_, direction_);
}

ModeConfiguration::ModeConfiguration(std::vector<int> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) throw DomainError("ModeConfiguration: at least one mode required");
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i] < 0) throw DomainError("ModeConfiguration: mode indices must be >= 0");
    if (i > 0 && modes_[i] >= modes_[i - 1]) {
      throw DomainError("ModeConfiguration: modes must be distinct and strictly decreasing");
    }
  }
}

ModeConfiguration ModeConfiguration::ground(int n_atoms) {
  if (n_atoms < 1) throw DomainError("ModeConfiguration::ground: n_atoms must be >= 1");
  std::vector<int> m(static_cast<std::size_t>(n_atoms));
  for (int i = 0; i < n_atoms; ++i) m[static_cast<std::size_t>(i)] = n_atoms - 1 - i;
  return ModeConfiguration(std::move(m));
}

Spectrum::Spectrum(std::vector<SpectrumPoint> points, SpectrumKind kind)
    : points_(std::move(points)), kind_(kind) {
  constexpr double slack = 1e-12;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!std::isfinite(p.detuning) || !std::isfinite(p.value)) {
      throw NumericalError("Spectrum: non-finite point at index " + std::to_string(i));
    }
    if (i > 0 && !(p.detuning > points_[i - 1].detuning)) {
      throw DomainError("Spectrum: detunings must be strictly increasing");
    }
    if (p.sigma && !(*p.sigma >= 0.0)) throw DomainError("Spectrum: sigma must be >= 0");
    const bool in_range = p.value >= -slack && p.value <= 1.0 + slack;
    if (!in_range) {
      if (kind_ == SpectrumKind::Model) {
        throw DomainError("Spectrum: model excitation fraction outside [0,1] at index " + std::to_string(i));
      }
      ++out_of_range_;
    }
  }
}

std::vector<double> Spectrum::detunings() const {
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.detuning);
  return out;
}

std::vector<double> Spectrum::values() const {
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.value);
  return out;
}

std::size_t Spectrum::invalid_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(points_.begin(), points_.end(), [](const SpectrumPoint& p) { return !p.valid; }));
}

std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("linear_grid: step must be > 0");
  if (!(hi > lo)) throw DomainError("linear_grid: need lo < hi");
  const double span = (hi - lo) / step;
  const auto n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * step;
  return g;
}

}  // namespace isb
