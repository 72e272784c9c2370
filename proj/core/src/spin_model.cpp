#include "isb/spin_model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "isb/errors.hpp"
#include "isb/parallel.hpp"

namespace isb {

double rabi_frequency_mode(int n, double eta, double rabi_bare, bool linearized) {
  if (n < 0) throw DomainError("rabi_frequency_mode: n must be >= 0");
  if (!(eta >= 0.0)) throw DomainError("rabi_frequency_mode: eta must be >= 0");
  const double x = eta * eta;
  if (linearized) return rabi_bare * (1.0 - x * (n + 0.5));
  return rabi_bare * std::exp(-0.5 * x) * std::laguerre(static_cast<unsigned>(n), x);
}

double thermal_mean_rabi(double rabi_bare, double eta, double alpha_z, const TruncationPolicy& truncation,
                         bool linearized) {
  if (std::isinf(alpha_z)) {
    return 0.5 * (rabi_frequency_mode(1, eta, rabi_bare, linearized) + rabi_frequency_mode(0, eta, rabi_bare, linearized));
  }
  const int n_max = truncation_mode(alpha_z, truncation);
  std::vector<double> w(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) w[static_cast<std::size_t>(n)] = std::exp(-alpha_z * n);
  // Z - w_n as prefix + suffix: the subtraction loses everything once w_1 < eps.
  const std::vector<double> others = other_weights(w);
  double num = 0.0, norm = 0.0;
  double prefix = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const auto k = static_cast<std::size_t>(n);
    num += 0.5 * rabi_frequency_mode(n, eta, rabi_bare, linearized) * w[k] * others[k];
    norm += w[k] * prefix;
    prefix += w[k];
  }
  return num / norm;
}

double rabi_lineshape(double t, double delta, double y) {
  const double r2 = y * y + delta * delta;
  if (r2 == 0.0) return 0.0;
  const double s = std::sin(0.5 * t * std::sqrt(r2));
  return y * y / r2 * s * s;
}

SpinSystem::SpinSystem(ModeConfiguration modes, std::vector<double> rabi_per_mode, Eigen::MatrixXd u_matrix,
                       double detuning)
    : modes_(std::move(modes)), rabi_(std::move(rabi_per_mode)), u_(std::move(u_matrix)), detuning_(detuning) {
  const auto n = static_cast<Eigen::Index>(modes_.size());
  if (static_cast<Eigen::Index>(rabi_.size()) != n || u_.rows() != n || u_.cols() != n) {
    throw DomainError("SpinSystem: Rabi frequencies and U matrix must match the number of modes");
  }
  const double scale = std::max(1.0, u_.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (u_(i, i) != 0.0) throw DomainError("SpinSystem: U matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(u_(i, j) - u_(j, i)) > 1e-12 * scale) throw DomainError("SpinSystem: U matrix must be symmetric");
    }
  }
  if (!std::isfinite(detuning_)) throw DomainError("SpinSystem: detuning must be finite");
}

SpinSystem SpinSystem::from_modes(const ModeConfiguration& modes, double eta, double rabi_bare, double u_scale,
                                  bool linearized, double detuning) {
  const auto n = modes.size();
  std::vector<double> rabi(n);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    rabi[i] = rabi_frequency_mode(modes[i], eta, rabi_bare, linearized);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = u_scale * overlap_integral(modes[i], modes[j]);
      u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return SpinSystem(modes, std::move(rabi), std::move(u), detuning);
}

SpinSystem SpinSystem::with_detuning(double detuning) const {
  SpinSystem s = *this;
  s.detuning_ = detuning;
  return s;
}

SpinSystem SpinSystem::with_u_scaled(double factor) const {
  SpinSystem s = *this;
  s.u_ *= factor;
  return s;
}

QuantumState::QuantumState(Eigen::VectorXcd amplitudes) : amp_(std::move(amplitudes)), n_atoms_(0) {
  const auto dim = static_cast<unsigned long long>(amp_.size());
  if (dim < 2 || !std::has_single_bit(dim)) throw DomainError("QuantumState: dimension must be 2^N with N >= 1");
  n_atoms_ = std::countr_zero(dim);
  if (std::abs(amp_.norm() - 1.0) > 1e-9) throw DomainError("QuantumState: state must have unit norm");
}

QuantumState QuantumState::all_ground(int n_atoms) {
  if (n_atoms < 1 || n_atoms > kMaxAtoms) throw DomainError("QuantumState: atom number out of range");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index{1} << n_atoms);
  v[0] = 1.0;
  return QuantumState(std::move(v));
}

QuantumState QuantumState::all_excited(int n_atoms) {
  if (n_atoms < 1 || n_atoms > kMaxAtoms) throw DomainError("QuantumState: atom number out of range");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index{1} << n_atoms);
  v[v.size() - 1] = 1.0;
  return QuantumState(std::move(v));
}

namespace {

template <class Matrix>
void fill_hamiltonian(Matrix& h, int n, const std::vector<double>& rabi, const Eigen::MatrixXd& u, double delta) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  h.setZero();
  for (Eigen::Index b = 0; b < dim; ++b) {
    const int excited = std::popcount(static_cast<unsigned long long>(b));
    h(b, b) += -delta * (excited - 0.5 * n);
    for (int j = 0; j < n; ++j) {
      h(b, b ^ (Eigen::Index{1} << j)) += -0.5 * rabi[static_cast<std::size_t>(j)];
      for (int k = j + 1; k < n; ++k) {
        const bool bj = (b >> j) & 1;
        const bool bk = (b >> k) & 1;
        if (bj == bk) continue;
        const double ujk = u(j, k);
        h(b, b) += 0.5 * ujk;
        h(b, b ^ (Eigen::Index{1} << j) ^ (Eigen::Index{1} << k)) += -0.5 * ujk;
      }
    }
  }
}

double excited_weight(const Eigen::VectorXcd& amp, int n) {
  double acc = 0.0;
  for (Eigen::Index b = 0; b < amp.size(); ++b) {
    acc += std::norm(amp[b]) * std::popcount(static_cast<unsigned long long>(b));
  }
  return acc / n;
}

}  // namespace

Eigen::MatrixXd build_hamiltonian(const SpinSystem& sys) {
  const int n = sys.n_atoms();
  if (n > kMaxAtoms) {
    throw ResourceError("build_hamiltonian: " + std::to_string(n) + " atoms exceeds the cap of " +
                        std::to_string(kMaxAtoms));
  }
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXd h(dim, dim);
  fill_hamiltonian(h, n, sys.rabi_per_mode(), sys.u_matrix(), sys.detuning());
  return h;
}

QuantumState evolve(const Eigen::MatrixXd& h, const QuantumState& initial, double t) {
  if (h.rows() != h.cols() || h.rows() != initial.amplitudes().size()) {
    throw DomainError("evolve: Hamiltonian and state dimensions differ");
  }
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("evolve: Hamiltonian is not Hermitian");
  }
  if (t == 0.0) return initial;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("evolve: eigendecomposition failed");
  const Eigen::MatrixXcd v = es.eigenvectors().cast<std::complex<double>>();
  Eigen::VectorXcd c = v.adjoint() * initial.amplitudes();
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::polar(1.0, -es.eigenvalues()[i] * t);
  return QuantumState(v * c);
}

double excitation_fraction(const QuantumState& state) {
  return excited_weight(state.amplitudes(), state.n_atoms());
}

Spectrum lineshape_exact(const SpinSystem& sys, const DriveParams& drive, const std::vector<double>& detunings,
                         int threads) {
  const int n = sys.n_atoms();
  std::vector<SpectrumPoint> pts(detunings.size());
  const bool gtoe = drive.direction() == Direction::GtoE;
  const QuantumState init = gtoe ? QuantumState::all_ground(n) : QuantumState::all_excited(n);
  parallel_for(detunings.size(), threads, [&](std::size_t i) {
    const double delta = detunings[i];
    double frac;
    if (n == 2) {
      frac = pair_excitation_fraction(sys.rabi_per_mode()[0], sys.rabi_per_mode()[1], sys.u_matrix()(0, 1), delta,
                                      drive.duration(), drive.direction());
    } else {
      const QuantumState out = evolve(build_hamiltonian(sys.with_detuning(delta)), init, drive.duration());
      frac = excitation_fraction(out);
      if (!gtoe) frac = 1.0 - frac;
    }
    pts[i] = SpectrumPoint{delta, std::clamp(frac, 0.0, 1.0), std::nullopt, true};
  });
  return Spectrum(std::move(pts));
}

double pair_excitation_fraction(double rabi1, double rabi2, double u, double delta, double t, Direction dir) {
  Eigen::Matrix4d h;
  Eigen::MatrixXd um(2, 2);
  um << 0.0, u, u, 0.0;
  fill_hamiltonian(h, 2, {rabi1, rabi2}, um, delta);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(h);
  // Real eigenvectors: psi(t) = V e^{-iEt} V^T psi0 with psi0 a basis vector.
  const int start = (dir == Direction::GtoE) ? 0 : 3;
  const auto& v = es.eigenvectors();
  Eigen::Vector4cd c;
  for (int i = 0; i < 4; ++i) c[i] = v(start, i) * std::polar(1.0, -es.eigenvalues()[i] * t);
  const Eigen::Vector4cd out = v.cast<std::complex<double>>() * c;
  const double excited = 0.5 * (std::norm(out[1]) + std::norm(out[2])) + std::norm(out[3]);
  const double frac = (dir == Direction::GtoE) ? excited : 1.0 - excited;
  return std::clamp(frac, 0.0, 1.0);
}

CollectiveSpectrum collective_spectrum(const SpinSystem& sys) {
  const int n = sys.n_atoms();
  if (n < 2) throw DomainError("collective_spectrum: needs at least two atoms");
  const Eigen::MatrixXd& u = sys.u_matrix();
  // One flip from all-e: the interaction is half the graph Laplacian of U.
  Eigen::MatrixXd lap = -0.5 * u;
  for (int j = 0; j < n; ++j) lap(j, j) = 0.5 * u.row(j).sum();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(n, 1));
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd comp = q.rightCols(n - 1);
  const Eigen::MatrixXd block = comp.transpose() * lap * comp;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (block + block.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("collective_spectrum: eigendecomposition failed");

  Eigen::Map<const Eigen::VectorXd> rabi(sys.rabi_per_mode().data(), n);
  CollectiveSpectrum out;
  out.mean_rabi = rabi.mean();
  struct Mode {
    double energy, coupling;
  };
  std::vector<Mode> modes;
  for (int qi = 0; qi < n - 1; ++qi) {
    Eigen::VectorXd c = comp * es.eigenvectors().col(qi);
    Eigen::Index imax;
    c.cwiseAbs().maxCoeff(&imax);
    if (c[imax] < 0.0) c = -c;
    modes.push_back({es.eigenvalues()[qi], rabi.dot(c)});
  }
  const double tol = 1e-9 * std::max(1.0, u.cwiseAbs().maxCoeff());
  std::size_t i = 0;
  while (i < modes.size()) {
    std::size_t j = i + 1;
    while (j < modes.size() && modes[j].energy - modes[i].energy <= tol) ++j;
    std::sort(modes.begin() + static_cast<std::ptrdiff_t>(i), modes.begin() + static_cast<std::ptrdiff_t>(j),
              [](const Mode& a, const Mode& b) { return std::abs(a.coupling) > std::abs(b.coupling); });
    SidebandBlock blk;
    blk.multiplicity = static_cast<int>(j - i);
    for (std::size_t k = i; k < j; ++k) {
      blk.energy += modes[k].energy / blk.multiplicity;
      blk.coupling_sq += modes[k].coupling * modes[k].coupling;
    }
    if (blk.multiplicity > 1) out.degenerate = true;
    out.blocks.push_back(blk);
    i = j;
  }
  for (const auto& m : modes) {
    out.energies.push_back(m.energy);
    out.couplings.push_back(m.coupling);
  }
  return out;
}

Spectrum lineshape_sidebands(const CollectiveSpectrum& spec, int n_atoms, const DriveParams& drive,
                             const std::vector<double>& detunings) {
  if (n_atoms < 1) throw DomainError("lineshape_sidebands: n_atoms must be >= 1");
  const double t = drive.duration();
  const double sign = (drive.direction() == Direction::GtoE) ? 1.0 : -1.0;
  std::vector<SpectrumPoint> pts;
  pts.reserve(detunings.size());
  bool overshoot = false;
  for (double delta : detunings) {
    double ne = n_atoms * rabi_lineshape(t, delta, spec.mean_rabi);
    for (const auto& b : spec.blocks) ne += rabi_lineshape(t, delta - sign * b.energy, std::sqrt(b.coupling_sq));
    const double frac = ne / n_atoms;
    const bool ok = frac <= 1.0 + 1e-12;
    overshoot = overshoot || !ok;
    pts.push_back(SpectrumPoint{delta, frac, std::nullopt, ok});
  }
  // The sideband approximation can exceed one where carrier and sidebands overlap.
  return Spectrum(std::move(pts), overshoot ? SpectrumKind::Measured : SpectrumKind::Model);
}

}  // namespace isb
