#include "isb/ensemble.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "isb/errors.hpp"
#include "isb/parallel.hpp"

namespace isb {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Atom number for a uniform draw u in [0, 1); 0 means an empty site.
int draw_occupancy(const std::map<int, double>& occ, double u) {
  double cum = 0.0;
  for (const auto& [n, frac] : occ) {
    cum += frac;
    if (u < cum) return n;
  }
  return 0;
}

}  // namespace

void LatticeDistribution::validate() const {
  if (!(sigma_h > 0.0)) throw DomainError("LatticeDistribution: sigma_h must be > 0");
  if (!(waist_perp > 0.0)) throw DomainError("LatticeDistribution: waist_perp must be > 0");
  if (n_rows < 1) throw DomainError("LatticeDistribution: n_rows must be >= 1");
  if (!(row_spacing >= 0.0)) throw DomainError("LatticeDistribution: row_spacing must be >= 0");
  if (!(uniform_radius >= 0.0)) throw DomainError("LatticeDistribution: uniform_radius must be >= 0");
  if (occupancy.empty()) throw DomainError("LatticeDistribution: occupancy model is empty");
  double total = 0.0;
  for (const auto& [n, frac] : occupancy) {
    if (n < 1) throw DomainError("LatticeDistribution: occupancy keys must be atom numbers >= 1");
    if (!(frac >= 0.0)) throw DomainError("LatticeDistribution: occupancy fractions must be >= 0");
    total += frac;
  }
  if (total > 1.0 + 1e-12) throw DomainError("LatticeDistribution: occupancy fractions sum above 1");
  if (!(total > 0.0)) throw DomainError("LatticeDistribution: all occupancy fractions are zero");
}

TrapGeometry local_trap(const TrapGeometry& center, double x, double y, double waist) {
  if (!(waist > 0.0)) throw DomainError("local_trap: waist must be > 0");
  if (x == 0.0 && y == 0.0) return center;
  return center.with_transverse_scale(std::exp(-(x * x + y * y) / (waist * waist)));
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL));
}

std::vector<SiteSample> sample_sites(const LatticeDistribution& dist, int n_samples, std::uint64_t seed) {
  dist.validate();
  if (n_samples < 1) throw DomainError("sample_sites: n_samples must be >= 1");
  const double radius = dist.uniform_radius > 0.0 ? dist.uniform_radius : dist.waist_perp;
  const bool stratified = dist.sampling == SiteSampling::Stratified;
  std::vector<SiteSample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const auto iu = static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(sample_seed(seed, iu));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Stratified: first coordinate on a midpoint grid, the others from low-discrepancy sequences.
    const double s1 = stratified ? (i + 0.5) / n_samples : unif(rng);
    const double s2 = stratified ? radical_inverse(iu + 1, 2) : unif(rng);
    const double s_occ = stratified ? radical_inverse(iu + 1, 3) : unif(rng);

    double x = 0.0, y = 0.0;
    if (dist.placement == SitePlacement::UniformDisk) {
      const double r = radius * std::sqrt(s1);
      const double phi = kTwoPi * s2;
      x = r * std::cos(phi);
      y = r * std::sin(phi);
    } else {
      const double gx = stratified ? std::numbers::sqrt2 * boost::math::erf_inv(2.0 * s1 - 1.0) : normal(rng);
      x = dist.sigma_h * gx;
      if (dist.geometry == LatticeGeometry::TwoD) {
        const int row = std::min(dist.n_rows - 1, static_cast<int>(s2 * dist.n_rows));
        y = (row - 0.5 * (dist.n_rows - 1)) * dist.row_spacing;
      } else {
        const double gy = stratified ? std::numbers::sqrt2 * boost::math::erf_inv(2.0 * s2 - 1.0) : normal(rng);
        y = dist.sigma_h * gy;
      }
    }
    const int n_atoms = draw_occupancy(dist.occupancy, s_occ);
    if (n_atoms == 0) continue;
    out.push_back(SiteSample{x, y, local_trap(dist.center_trap, x, y, dist.waist_perp), n_atoms,
                             static_cast<double>(n_atoms)});
  }
  return out;
}

Spectrum site_spectrum(const SiteSample& site, const ThermalLineshapeConfig& cfg, const std::vector<double>& detunings,
                       SiteEngine engine) {
  if (site.n_atoms > 2) {
    throw DomainError("site_spectrum: thermal lineshapes are only available for one or two atoms per site (got " +
                      std::to_string(site.n_atoms) + ")");
  }
  if (site.n_atoms < 2) {
    std::vector<SpectrumPoint> zeros;
    zeros.reserve(detunings.size());
    for (double d : detunings) zeros.push_back(SpectrumPoint{d, 0.0, std::nullopt, true});
    return Spectrum(std::move(zeros));
  }
  ThermalLineshapeConfig local = cfg;
  local.trap = site.trap;
  return engine == SiteEngine::ClosedForm ? isb_closed_form(local, detunings)
                                          : thermal_lineshape_bruteforce(local, detunings);
}

Spectrum ensemble_average(const std::vector<SiteSample>& samples, const std::vector<Spectrum>& site_spectra) {
  if (samples.empty()) throw DomainError("ensemble_average: no occupied sites sampled");
  if (samples.size() != site_spectra.size()) throw DomainError("ensemble_average: one spectrum per sample required");
  const std::size_t m = site_spectra.front().size();
  SpectrumKind kind = SpectrumKind::Model;
  for (const auto& s : site_spectra) {
    if (s.size() != m) throw DomainError("ensemble_average: spectra must share one grid");
    if (s.kind() == SpectrumKind::Measured) kind = SpectrumKind::Measured;
  }
  double wsum = 0.0;
  for (const auto& s : samples) wsum += s.weight;
  const double n = static_cast<double>(samples.size());
  std::vector<SpectrumPoint> pts(m);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    bool valid = true;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      mean += samples[i].weight * site_spectra[i][j].value;
      valid = valid && site_spectra[i][j].valid;
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double dev = samples[i].weight * (site_spectra[i][j].value - mean);
      var += dev * dev;
    }
    const double se = n > 1.0 ? std::sqrt(n / (n - 1.0) * var) / wsum : 0.0;
    pts[j] = SpectrumPoint{site_spectra.front()[j].detuning, mean, se, valid};
  }
  return Spectrum(std::move(pts), kind);
}

Spectrum ensemble_average(const LatticeDistribution& dist, const ThermalLineshapeConfig& cfg,
                          const std::vector<double>& detunings, int n_samples, std::uint64_t seed,
                          const EnsembleOptions& options) {
  const auto samples = sample_sites(dist, n_samples, seed);
  if (samples.empty()) throw DomainError("ensemble_average: every sampled site was empty");
  std::vector<std::optional<Spectrum>> slots(samples.size());
  parallel_for(samples.size(), options.threads,
               [&](std::size_t i) { slots[i] = site_spectrum(samples[i], cfg, detunings, options.engine); });
  std::vector<Spectrum> spectra;
  spectra.reserve(slots.size());
  for (auto& s : slots) spectra.push_back(std::move(*s));
  return ensemble_average(samples, spectra);
}

}  // namespace isb
