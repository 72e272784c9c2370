#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isb/ensemble.hpp"
#include "isb/least_squares.hpp"
#include "isb/thermal.hpp"
#include "isb/types.hpp"

namespace isb {

enum class ScanDirection { Up, Down };

struct ScanPoint {
  double detuning_hz = 0.0;
  double excitation = 0.0;
};

// One laser sweep. Detunings must be strictly monotone in the scan direction.
class ScanRecord {
 public:
  ScanRecord(std::vector<ScanPoint> points, ScanDirection direction, std::string id = {});
  // Direction taken from the order of the first two points.
  static ScanRecord from_points(std::vector<ScanPoint> points, std::string id = {});

  const std::vector<ScanPoint>& points() const noexcept { return points_; }
  ScanDirection direction() const noexcept { return direction_; }
  const std::string& id() const noexcept { return id_; }

  ScanRecord shifted(double offset_hz) const;

 private:
  std::vector<ScanPoint> points_;
  ScanDirection direction_;
  std::string id_;
};

// CSV with header "detuning_hz,excitation".
ScanRecord read_scan_csv(std::istream& in, std::string id = {});
ScanRecord read_scan_csv_file(const std::string& path);

struct Bin {
  double center_hz = 0.0;
  double mean = 0.0;
  double sem = 0.0;
  int count = 1;
  bool degenerate = false;  // a single sample, so sem carries no information
};

struct BinnedSpectrum {
  std::vector<Bin> bins;
  double bin_width_hz = 0.0;

  void validate() const;
  std::vector<double> centers_hz() const;
  std::vector<double> means() const;
};

// Pools every point and bins on centers k * bin_width (k integer), so bins pair up across zero.
// sem = sample standard deviation / sqrt(count). Empty bins are left out.
BinnedSpectrum concatenate_and_bin(const std::vector<ScanRecord>& scans, double bin_width_hz);

// On every negative bin with a positive partner: value(-|d|) - value(+|d|), sems in quadrature.
BinnedSpectrum reflect_subtract(const BinnedSpectrum& binned);

// Mirror image d -> -d.
BinnedSpectrum reflect(const BinnedSpectrum& binned);

struct ParameterEstimate {
  double value = 0.0;
  double error = 0.0;
};

struct FitResult {
  std::map<std::string, ParameterEstimate> parameters;
  double residual_norm = 0.0;  // sqrt of the weighted objective
  bool converged = false;
  int n_evaluations = 0;
  int iterations = 0;
  std::vector<double> objective_history;
  std::vector<std::string> flags;  // "at_bound:<name>", "zero_amplitude", ...
  std::string message;

  bool has_flag(const std::string& flag) const;
};

// Fits A g^2 / ((d - d0)^2 + g^2) + B. Parameters "center_hz", "amplitude", "width_hz", "offset".
// Errors come from s^2 (J^T W J)^{-1}. A fit whose amplitude is not 3 sigma away from zero is
// flagged "zero_amplitude" and its center should not be trusted.
FitResult lorentzian_fit(const std::vector<double>& detunings_hz, const std::vector<double>& values,
                         const std::vector<double>& sigmas = {});
FitResult lorentzian_fit(const ScanRecord& scan);
FitResult lorentzian_fit(const BinnedSpectrum& binned);

// Shifts a scan so its fitted Lorentzian center sits at zero. Throws NumericalError when the fit
// fails or finds no line.
ScanRecord center_scan(const ScanRecord& scan);

// Model for reflected, carrier-subtracted spectra: ensemble-averaged closed-form sideband.
struct ScatteringFitConfig {
  ThermalLineshapeConfig thermal;  // a_eg_minus is ignored; trap is the central site
  std::optional<LatticeDistribution> ensemble{};  // nullopt: single central site
  int n_samples = 200;
  std::uint64_t seed = 1;
  bool fit_eta = false;
  double initial_a = -100.0 * kCodata2018.bohr_radius();  // m
  std::optional<double> initial_eta{};
  double carrier_cut = 5.0;                               // in units of Omega_B
  std::vector<std::pair<double, double>> masked_hz{};     // excluded [lo, hi] detuning ranges
  double max_abs_a_bohr = 1e4;
  // Scan |a| in sqrt(2) steps on the sign of initial_a and start the optimizer from the best point.
  // A narrow sideband that misses the data otherwise pulls a through zero.
  bool coarse_search = true;
  LeastSquaresOptions optimizer{};
};

// Precomputed sites for the model; linear in a, so one pass over the sites serves every evaluation.
class ScatteringModel {
 public:
  explicit ScatteringModel(const ScatteringFitConfig& cfg);
  // Reflected-and-subtracted excitation fraction M(-|d|) - M(+|d|) at detuning d in Hz.
  double operator()(double detuning_hz, double a, double eta) const;
  std::size_t n_sites() const noexcept { return u_per_a_.size(); }

 private:
  std::vector<double> u_per_a_;  // <U>_T per metre of scattering length, rad/s/m
  std::vector<double> weight_;
  double weight_sum_ = 0.0;
  double alpha_z_;
  double pulse_area_;
  double rabi_;
  Direction direction_;
};

// Weighted least squares (1/sem^2, or uniform when any sem is zero) over the bins outside the
// carrier cut and masks. Parameters "a_eg_minus_a0" and, with fit_eta, "eta_z".
FitResult fit_scattering_length(const BinnedSpectrum& data, const ScatteringFitConfig& cfg);

// Indices of local maxima of values with |detuning| >= min_abs_detuning that are also the
// largest value within +-window of their own detuning.
std::vector<std::size_t> find_peaks(const std::vector<double>& detunings, const std::vector<double>& values,
                                    double min_abs_detuning, double window);

}  // namespace isb
