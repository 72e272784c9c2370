#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "isb/thermal.hpp"
#include "isb/types.hpp"

namespace isb {

enum class LatticeGeometry { OneD, TwoD };

enum class SitePlacement {
  LoadingProfile,  // Gaussian sigma_h across columns, uniform over rows (2D) or radial Gaussian (1D)
  UniformDisk,     // uniform over a disk of radius uniform_radius (defaults to the waist)
};

enum class SiteSampling { MonteCarlo, Stratified };

struct LatticeDistribution {
  LatticeGeometry geometry = LatticeGeometry::TwoD;
  double sigma_h = 8e-6;         // m
  int n_rows = 100;
  double row_spacing = 406.5e-9;  // m, half the lattice wavelength
  double waist_perp = 30e-6;     // m
  TrapGeometry center_trap{kTwoPi * 110e3, kTwoPi * 70e3, kTwoPi * 800.0, 0.07, 30e-6};
  std::map<int, double> occupancy{{2, 1.0}};  // atom number -> site fraction; the rest are empty
  SitePlacement placement = SitePlacement::LoadingProfile;
  SiteSampling sampling = SiteSampling::MonteCarlo;
  double uniform_radius = 0.0;  // m; 0 selects waist_perp

  void validate() const;
};

struct SiteSample {
  double x = 0.0;  // m
  double y = 0.0;  // m
  TrapGeometry trap;
  int n_atoms = 0;
  double weight = 0.0;  // atoms contributed to the ensemble average
};

// omega_x and omega_y scaled by exp(-(x^2 + y^2) / waist^2); omega_z and eta untouched.
TrapGeometry local_trap(const TrapGeometry& center, double x, double y, double waist);

// Counter-based seed for sample index i, so every sample is reproducible on its own.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index);

// Occupied sites only; empty draws are skipped, so fewer than n_samples may come back.
std::vector<SiteSample> sample_sites(const LatticeDistribution& dist, int n_samples, std::uint64_t seed);

enum class SiteEngine { ClosedForm, BruteForce };

struct EnsembleOptions {
  SiteEngine engine = SiteEngine::ClosedForm;
  int threads = 1;
};

// Atom-weighted mean of per-site sideband spectra (zero for singly occupied sites), with the
// Monte Carlo standard error of the weighted mean as sigma. cfg supplies everything but the trap.
Spectrum ensemble_average(const LatticeDistribution& dist, const ThermalLineshapeConfig& cfg,
                          const std::vector<double>& detunings, int n_samples, std::uint64_t seed,
                          const EnsembleOptions& options = {});

// Same reduction over precomputed per-site spectra.
Spectrum ensemble_average(const std::vector<SiteSample>& samples, const std::vector<Spectrum>& site_spectra);

// Per-site spectrum used by ensemble_average.
Spectrum site_spectrum(const SiteSample& site, const ThermalLineshapeConfig& cfg,
                       const std::vector<double>& detunings, SiteEngine engine);

}  // namespace isb
