#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "isb/units.hpp"

namespace isb {

// Harmonic approximation of one lattice site. Frequencies in rad/s, waist in m.
class TrapGeometry {
 public:
  TrapGeometry(double omega_x, double omega_y, double omega_z, double eta_z, double waist_perp = 30e-6);

  double omega_x() const noexcept { return omega_x_; }
  double omega_y() const noexcept { return omega_y_; }
  double omega_z() const noexcept { return omega_z_; }
  double eta_z() const noexcept { return eta_z_; }
  double waist_perp() const noexcept { return waist_perp_; }
  double omega_perp() const noexcept;

  // True when eta_z matches k_z a_ho / sqrt(2) to the given relative tolerance.
  bool eta_consistent_with(double k_z, double mass, double rel_tol = 1e-6,
                           const PhysicalConstants& c = kCodata2018) const;

  TrapGeometry with_transverse_scale(double factor) const;
  TrapGeometry with_eta(double eta) const;

 private:
  double omega_x_, omega_y_, omega_z_, eta_z_, waist_perp_;
};

// Temperatures in K. Zero on an axis selects the ground-configuration limit there.
class ThermalState {
 public:
  ThermalState(double temp_x, double temp_y, double temp_z);
  double temp_x() const noexcept { return temp_x_; }
  double temp_y() const noexcept { return temp_y_; }
  double temp_z() const noexcept { return temp_z_; }

  double alpha_x(const TrapGeometry& trap, const PhysicalConstants& c = kCodata2018) const;
  double alpha_y(const TrapGeometry& trap, const PhysicalConstants& c = kCodata2018) const;
  double alpha_z(const TrapGeometry& trap, const PhysicalConstants& c = kCodata2018) const;

 private:
  double temp_x_, temp_y_, temp_z_;
};

enum class Direction { GtoE, EtoG };

// Rabi pulse. rabi_bare and detuning in rad/s, duration in s, t * rabi_bare = s * pi.
class DriveParams {
 public:
  static DriveParams from_pulse_area(double rabi_bare, double pulse_area_factor, double detuning = 0.0,
                                     Direction dir = Direction::GtoE);
  static DriveParams from_duration(double rabi_bare, double duration, double detuning = 0.0,
                                   Direction dir = Direction::GtoE);
  DriveParams(double rabi_bare, double detuning, double pulse_area_factor, double duration, Direction dir);

  double rabi_bare() const noexcept { return rabi_bare_; }
  double detuning() const noexcept { return detuning_; }
  double pulse_area_factor() const noexcept { return pulse_area_factor_; }
  double duration() const noexcept { return duration_; }
  Direction direction() const noexcept { return direction_; }

  DriveParams with_detuning(double detuning) const;
  DriveParams with_rabi(double rabi_bare) const;  // keeps the pulse area

 private:
  double rabi_bare_, detuning_, pulse_area_factor_, duration_;
  Direction direction_;
};

// Occupied axial modes, stored strictly decreasing.
class ModeConfiguration {
 public:
  explicit ModeConfiguration(std::vector<int> modes);
  static ModeConfiguration ground(int n_atoms);  // {N-1, ..., 1, 0}

  const std::vector<int>& modes() const noexcept { return modes_; }
  std::size_t size() const noexcept { return modes_.size(); }
  int operator[](std::size_t i) const { return modes_[i]; }

 private:
  std::vector<int> modes_;
};

struct SpectrumPoint {
  double detuning = 0.0;  // rad/s
  double value = 0.0;     // excitation fraction
  std::optional<double> sigma;
  bool valid = true;      // false where a model is used outside its regime
};

enum class SpectrumKind {
  Model,     // values must lie in [0, 1]
  Measured,  // noisy or differenced data: out-of-range values are counted, not rejected
};

class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<SpectrumPoint> points, SpectrumKind kind = SpectrumKind::Model);

  const std::vector<SpectrumPoint>& points() const noexcept { return points_; }
  SpectrumKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const SpectrumPoint& operator[](std::size_t i) const { return points_[i]; }

  std::vector<double> detunings() const;
  std::vector<double> values() const;
  std::size_t out_of_range_count() const noexcept { return out_of_range_; }
  std::size_t invalid_count() const noexcept;

 private:
  std::vector<SpectrumPoint> points_;
  SpectrumKind kind_ = SpectrumKind::Model;
  std::size_t out_of_range_ = 0;
};

// Uniform grid lo, lo+step, ... up to hi inclusive (within step/1e9).
std::vector<double> linear_grid(double lo, double hi, double step);

}  // namespace isb
