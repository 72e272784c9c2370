#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isb/analysis.hpp"
#include "isb/ensemble.hpp"
#include "isb/overlap.hpp"
#include "isb/thermal.hpp"
#include "isb/types.hpp"

namespace isb::app {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { Simulate, Analyze, Fit };
enum class Engine { Exact, Sidebands, ClosedForm, BruteForce, Ensemble };

// Boundary units: Hz (ordinary frequency), microkelvin, micrometre, Bohr radii.
struct GridConfig {
  double min_hz = -200.0;
  double max_hz = 200.0;
  double step_hz = 1.0;
};

struct TrapConfig {
  double omega_x_hz = 110e3;
  double omega_y_hz = 70e3;
  double omega_z_hz = 800.0;
  double eta_z = 0.07;
  double waist_um = 30.0;
};

struct TemperatureConfig {
  double t_x_uk = 4.5;
  double t_y_uk = 4.5;
  double t_z_uk = 4.5;
};

struct DriveConfig {
  double rabi_hz = 6.25;
  double pulse_area = 1.0;
  Direction direction = Direction::GtoE;
};

struct InteractionConfig {
  double a_eg_minus_a0 = -280.0;
  Renormalization renormalization = Renormalization::LimitingForms;
};

struct SpinConfig {
  std::vector<int> modes{1, 0};
  std::optional<double> u_hz;  // default: u from the scattering length times the transverse factor
  bool linearized = false;
};

struct EnsembleConfig {
  LatticeGeometry geometry = LatticeGeometry::TwoD;
  double sigma_h_um = 8.0;
  int n_rows = 100;
  double row_spacing_um = 0.4065;
  std::map<int, double> occupancy{{2, 1.0}};
  SitePlacement placement = SitePlacement::LoadingProfile;
  SiteSampling sampling = SiteSampling::MonteCarlo;
  double uniform_radius_um = 0.0;
  int n_samples = 200;
  SiteEngine site_engine = SiteEngine::ClosedForm;
};

struct AnalysisConfig {
  std::vector<std::string> scans;
  double bin_width_hz = 4.0;
  bool center_scans = true;
};

struct FitConfig {
  double initial_a_a0 = -100.0;
  bool fit_eta = false;
  std::optional<double> initial_eta;
  double carrier_cut = 5.0;
  std::vector<std::pair<double, double>> masked_hz;
  double max_abs_a_a0 = 1e4;
  bool coarse_search = true;
};

struct RunConfig {
  std::optional<Mode> mode;
  std::optional<Engine> engine;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all hardware threads
  std::string output = "isb_out";
  GridConfig grid;
  TrapConfig trap;
  TemperatureConfig temperature;
  DriveConfig drive;
  InteractionConfig interaction;
  TruncationPolicy truncation;
  SpinConfig spin;
  PairFidelity fidelity = PairFidelity::SidebandFormula;
  EnsembleConfig ensemble;
  AnalysisConfig analysis;
  FitConfig fit;
  std::string base_dir;  // relative scan paths resolve against this
};

// Throws ConfigError on malformed JSON, wrong types or unknown keys. Values are not range-checked.
RunConfig parse_config(std::string_view json_text, std::string base_dir = {});
// Throws IoError when the file cannot be read.
RunConfig load_config(const std::string& path);
// Full effective configuration, defaults included.
std::string config_to_json(const RunConfig& cfg);

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const noexcept { return violations.empty(); }
  std::string to_json() const;
};

ValidationReport validate(const RunConfig& cfg, Mode mode);

// Physics objects in SI units; call only on a validated config.
TrapGeometry make_trap(const RunConfig& cfg);
ThermalLineshapeConfig make_thermal_config(const RunConfig& cfg);
LatticeDistribution make_distribution(const RunConfig& cfg);
std::vector<double> make_grid(const RunConfig& cfg);  // rad/s

struct SimulationOutput {
  Spectrum spectrum;
  std::vector<double> grid_hz;  // the configured grid, exactly as in Hz
  std::vector<std::string> warnings;
};
SimulationOutput simulate(const RunConfig& cfg);

struct AnalysisOutput {
  BinnedSpectrum binned;
  BinnedSpectrum reflected;
  std::vector<std::string> warnings;
};
AnalysisOutput analyze(const RunConfig& cfg);

// Columns detuning_hz, excitation_fraction, sigma; '.' decimal separator, shortest round-trip digits.
// grid_hz, when given, replaces the converted detuning column (avoids rad/s round-off).
std::string spectrum_csv(const Spectrum& spectrum, const std::vector<double>* grid_hz = nullptr);
std::string binned_csv(const BinnedSpectrum& binned);
std::string fit_result_json(const FitResult& fit);

// Writes to a temporary sibling and renames over path. Throws IoError.
void write_atomic(const std::string& path, const std::string& content);

struct RunOutcome {
  int exit_code = 0;          // 0 ok, 2 config, 3 numerical, 4 I/O
  std::string error_category;  // "config", "numerical", "io"; empty on success
  std::string message;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

// Validates, computes, then writes every output atomically into out_dir (plus manifest.json).
// Nothing is written unless the computation succeeds. Never throws.
RunOutcome run(const RunConfig& cfg, Mode mode, const std::string& out_dir);

std::string mode_name(Mode m);
std::string engine_name(Engine e);

}  // namespace isb::app
