#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "isb/overlap.hpp"
#include "isb/types.hpp"

namespace isb {

inline constexpr int kMaxAtoms = 12;

// Carrier Rabi frequency of axial mode n: Omega e^{-eta^2/2} L_n(eta^2), or the first-order
// form Omega (1 - eta^2 (n + 1/2)).
double rabi_frequency_mode(int n, double eta, double rabi_bare, bool linearized = false);

// Boltzmann average over ordered pairs n1 > n2 of the pair-mean Rabi frequency.
double thermal_mean_rabi(double rabi_bare, double eta, double alpha_z, const TruncationPolicy& truncation = {},
                         bool linearized = false);

// f(t, delta, y) = y^2 / (y^2 + delta^2) sin^2(t sqrt(y^2 + delta^2) / 2)
double rabi_lineshape(double t, double delta, double y);

class SpinSystem {
 public:
  SpinSystem(ModeConfiguration modes, std::vector<double> rabi_per_mode, Eigen::MatrixXd u_matrix,
             double detuning = 0.0);

  // U_{jk} = u_scale * I(n_j, n_k), Rabi frequencies from rabi_frequency_mode.
  static SpinSystem from_modes(const ModeConfiguration& modes, double eta, double rabi_bare, double u_scale,
                               bool linearized = false, double detuning = 0.0);

  const ModeConfiguration& modes() const noexcept { return modes_; }
  const std::vector<double>& rabi_per_mode() const noexcept { return rabi_; }
  const Eigen::MatrixXd& u_matrix() const noexcept { return u_; }
  double detuning() const noexcept { return detuning_; }
  int n_atoms() const noexcept { return static_cast<int>(rabi_.size()); }

  SpinSystem with_detuning(double detuning) const;
  SpinSystem with_u_scaled(double factor) const;

 private:
  ModeConfiguration modes_;
  std::vector<double> rabi_;
  Eigen::MatrixXd u_;
  double detuning_;
};

// Product basis over {g, e}^N; bit j of the index set means atom j is excited.
class QuantumState {
 public:
  explicit QuantumState(Eigen::VectorXcd amplitudes);
  static QuantumState all_ground(int n_atoms);
  static QuantumState all_excited(int n_atoms);

  const Eigen::VectorXcd& amplitudes() const noexcept { return amp_; }
  int n_atoms() const noexcept { return n_atoms_; }

 private:
  Eigen::VectorXcd amp_;
  int n_atoms_;
};

// H / hbar = -delta S^z - sum_j Omega_j S^x_j - sum_{j != j'} (U_{jj'} / 2)(S_j . S_j' - 1/4), real symmetric.
Eigen::MatrixXd build_hamiltonian(const SpinSystem& sys);

QuantumState evolve(const Eigen::MatrixXd& h, const QuantumState& initial, double t);

// <N_e> / N
double excitation_fraction(const QuantumState& state);

// Full evolution at each detuning (rad/s). GtoE starts in all-g and records the excited fraction;
// EtoG starts in all-e and records the de-excited fraction.
Spectrum lineshape_exact(const SpinSystem& sys, const DriveParams& drive, const std::vector<double>& detunings,
                         int threads = 1);

// Fast two-atom version of lineshape_exact at a single detuning.
double pair_excitation_fraction(double rabi1, double rabi2, double u, double delta, double t,
                                Direction dir = Direction::GtoE);

struct SidebandBlock {
  double energy = 0.0;       // rad/s
  double coupling_sq = 0.0;  // summed squared couplings over the block
  int multiplicity = 1;
};

struct CollectiveSpectrum {
  std::vector<double> energies;   // U^q, ascending, N - 1 entries
  std::vector<double> couplings;  // Delta Omega^q (signed; basis dependent inside degenerate blocks)
  double mean_rabi = 0.0;
  std::vector<SidebandBlock> blocks;  // energies merged within tolerance
  bool degenerate = false;
};

CollectiveSpectrum collective_spectrum(const SpinSystem& sys);

// [N f(t, delta, mean_rabi) + sum_q f(t, delta -+ U^q, Delta Omega^q)] / N, with the sideband at
// +U^q for GtoE and -U^q for EtoG. Degenerate blocks enter with their summed coupling.
Spectrum lineshape_sidebands(const CollectiveSpectrum& spec, int n_atoms, const DriveParams& drive,
                             const std::vector<double>& detunings);

}  // namespace isb
