#include "isb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

#include "isb/errors.hpp"

namespace isb {

namespace {

// Half away from zero, so a bin edge at +x and one at -x land in mirrored bins.
long long bin_index(double x, double width) { return static_cast<long long>(std::round(x / width)); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double parse_double(const std::string& text, std::size_t line) {
  std::istringstream is(trim(text));
  is.imbue(std::locale::classic());
  double v = 0.0;
  is >> v;
  if (is.fail() || !is.eof()) {
    throw DomainError("scan CSV line " + std::to_string(line) + ": cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

ScanRecord::ScanRecord(std::vector<ScanPoint> points, ScanDirection direction, std::string id)
    : points_(std::move(points)), direction_(direction), id_(std::move(id)) {
  if (points_.empty()) throw DomainError("ScanRecord: no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].detuning_hz) || !std::isfinite(points_[i].excitation)) {
      throw DomainError("ScanRecord: non-finite point");
    }
    if (i == 0) continue;
    const double step = points_[i].detuning_hz - points_[i - 1].detuning_hz;
    if (direction_ == ScanDirection::Up ? !(step > 0.0) : !(step < 0.0)) {
      throw DomainError("ScanRecord: detunings not monotone in the scan direction");
    }
  }
}

ScanRecord ScanRecord::from_points(std::vector<ScanPoint> points, std::string id) {
  const bool down = points.size() > 1 && points[1].detuning_hz < points[0].detuning_hz;
  return ScanRecord(std::move(points), down ? ScanDirection::Down : ScanDirection::Up, std::move(id));
}

ScanRecord ScanRecord::shifted(double offset_hz) const {
  auto pts = points_;
  for (auto& p : pts) p.detuning_hz += offset_hz;
  return ScanRecord(std::move(pts), direction_, id_);
}

ScanRecord read_scan_csv(std::istream& in, std::string id) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("scan CSV: empty input");
  std::string header = trim(line);
  if (!header.empty() && static_cast<unsigned char>(header[0]) == 0xEF) header = header.substr(3);  // BOM
  if (header != "detuning_hz,excitation") {
    throw DomainError("scan CSV: expected header 'detuning_hz,excitation', got '" + header + "'");
  }
  std::vector<ScanPoint> pts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw DomainError("scan CSV line " + std::to_string(lineno) + ": expected two columns");
    }
    pts.push_back(ScanPoint{parse_double(line.substr(0, comma), lineno), parse_double(line.substr(comma + 1), lineno)});
  }
  return ScanRecord::from_points(std::move(pts), std::move(id));
}

ScanRecord read_scan_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scan file " + path);
  return read_scan_csv(in, path);
}

void BinnedSpectrum::validate() const {
  if (!(bin_width_hz > 0.0)) throw DomainError("BinnedSpectrum: bin width must be > 0");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i].count < 1 || !(bins[i].sem >= 0.0)) throw DomainError("BinnedSpectrum: bad bin statistics");
    if (i > 0 && !(bins[i].center_hz > bins[i - 1].center_hz)) {
      throw DomainError("BinnedSpectrum: bin centers must increase");
    }
  }
}

std::vector<double> BinnedSpectrum::centers_hz() const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(b.center_hz);
  return out;
}

std::vector<double> BinnedSpectrum::means() const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(b.mean);
  return out;
}

BinnedSpectrum concatenate_and_bin(const std::vector<ScanRecord>& scans, double bin_width_hz) {
  if (!(bin_width_hz > 0.0) || !std::isfinite(bin_width_hz)) throw DomainError("concatenate_and_bin: bin width must be > 0");
  if (scans.empty()) throw DomainError("concatenate_and_bin: no scans");
  std::map<long long, std::vector<double>> pool;
  for (const auto& scan : scans) {
    for (const auto& p : scan.points()) pool[bin_index(p.detuning_hz, bin_width_hz)].push_back(p.excitation);
  }
  if (pool.empty()) throw DomainError("concatenate_and_bin: all bins empty");
  BinnedSpectrum out;
  out.bin_width_hz = bin_width_hz;
  for (auto& [k, vals] : pool) {
    // Sorting makes the sums independent of scan order, bit for bit.
    std::sort(vals.begin(), vals.end());
    const double n = static_cast<double>(vals.size());
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
    Bin b;
    b.center_hz = static_cast<double>(k) * bin_width_hz;
    b.mean = mean;
    b.count = static_cast<int>(vals.size());
    if (vals.size() > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      b.sem = std::sqrt(ss / (n - 1.0) / n);
    } else {
      b.degenerate = true;
    }
    out.bins.push_back(b);
  }
  return out;
}

BinnedSpectrum reflect_subtract(const BinnedSpectrum& binned) {
  binned.validate();
  std::map<long long, const Bin*> by_index;
  for (const auto& b : binned.bins) by_index[bin_index(b.center_hz, binned.bin_width_hz)] = &b;
  BinnedSpectrum out;
  out.bin_width_hz = binned.bin_width_hz;
  for (const auto& [k, b] : by_index) {
    if (k >= 0) break;
    const auto partner = by_index.find(-k);
    if (partner == by_index.end()) continue;
    const Bin& p = *partner->second;
    Bin d;
    d.center_hz = b->center_hz;
    d.mean = b->mean - p.mean;
    d.sem = std::hypot(b->sem, p.sem);
    d.count = std::min(b->count, p.count);
    d.degenerate = b->degenerate || p.degenerate;
    out.bins.push_back(d);
  }
  if (out.bins.empty()) throw DomainError("reflect_subtract: no bins with a partner across zero");
  return out;
}

BinnedSpectrum reflect(const BinnedSpectrum& binned) {
  binned.validate();
  BinnedSpectrum out;
  out.bin_width_hz = binned.bin_width_hz;
  out.bins.assign(binned.bins.rbegin(), binned.bins.rend());
  for (auto& b : out.bins) b.center_hz = -b.center_hz;
  return out;
}

bool FitResult::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

FitResult lorentzian_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigmas) {
  const std::size_t m = x.size();
  if (m < 4) throw DomainError("lorentzian_fit: at least 4 points required");
  if (y.size() != m || (!sigmas.empty() && sigmas.size() != m)) throw DomainError("lorentzian_fit: size mismatch");
  std::vector<double> w(m, 1.0);
  const bool weighted = !sigmas.empty() && std::all_of(sigmas.begin(), sigmas.end(), [](double s) { return s > 0.0; });
  if (weighted) {
    for (std::size_t i = 0; i < m; ++i) w[i] = 1.0 / sigmas[i];
  }

  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double span = std::max(*xmax_it - *xmin_it, 1e-300);
  std::vector<double> sorted_y = y;
  std::nth_element(sorted_y.begin(), sorted_y.begin() + static_cast<long>(m / 2), sorted_y.end());
  const double b0 = sorted_y[m / 2];
  std::size_t peak = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (std::abs(y[i] - b0) > std::abs(y[peak] - b0)) peak = i;
  }
  const double a0 = y[peak] - b0;
  std::size_t above = 0;
  for (std::size_t i = 0; i < m; ++i) above += std::abs(y[i] - b0) > 0.5 * std::abs(a0) ? 1 : 0;
  const double g0 = std::max(0.5 * span * static_cast<double>(above) / static_cast<double>(m), 1e-6 * span);

  LeastSquaresProblem prob;
  prob.residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(m));
    const double g2 = p[2] * p[2];
    for (std::size_t i = 0; i < m; ++i) {
      const double dx = x[i] - p[0];
      r[static_cast<Eigen::Index>(i)] = (y[i] - (p[1] * g2 / (dx * dx + g2) + p[3])) * w[i];
    }
    return r;
  };
  prob.lower = Eigen::Vector4d(*xmin_it - span, -std::numeric_limits<double>::infinity(), 1e-9 * span,
                               -std::numeric_limits<double>::infinity());
  prob.upper = Eigen::Vector4d(*xmax_it + span, std::numeric_limits<double>::infinity(), 10.0 * span,
                               std::numeric_limits<double>::infinity());
  const auto lm = levenberg_marquardt(prob, Eigen::Vector4d(x[peak], a0, g0, b0));
  const Eigen::MatrixXd cov = parameter_covariance(lm, true);

  FitResult fr;
  const char* names[] = {"center_hz", "amplitude", "width_hz", "offset"};
  bool finite = true;
  for (int i = 0; i < 4; ++i) {
    const double err = std::sqrt(cov(i, i));
    finite = finite && std::isfinite(err);
    fr.parameters[names[i]] = ParameterEstimate{lm.params[i], err};
    if (lm.at_bound[static_cast<std::size_t>(i)]) fr.flags.push_back(std::string("at_bound:") + names[i]);
  }
  fr.parameters["width_hz"].value = std::abs(lm.params[2]);
  fr.residual_norm = std::sqrt(lm.objective);
  fr.converged = lm.converged && finite;
  fr.n_evaluations = lm.evaluations;
  fr.iterations = lm.iterations;
  fr.objective_history = lm.history;
  fr.message = finite ? lm.message : lm.message + "; covariance singular";
  const auto& amp = fr.parameters["amplitude"];
  if (!(std::abs(amp.value) >= 3.0 * amp.error)) fr.flags.push_back("zero_amplitude");
  return fr;
}

FitResult lorentzian_fit(const ScanRecord& scan) {
  std::vector<double> x, y;
  for (const auto& p : scan.points()) {
    x.push_back(p.detuning_hz);
    y.push_back(p.excitation);
  }
  return lorentzian_fit(x, y);
}

FitResult lorentzian_fit(const BinnedSpectrum& binned) {
  std::vector<double> s;
  for (const auto& b : binned.bins) s.push_back(b.sem);
  return lorentzian_fit(binned.centers_hz(), binned.means(), s);
}

ScanRecord center_scan(const ScanRecord& scan) {
  const auto fit = lorentzian_fit(scan);
  if (!fit.converged || fit.has_flag("zero_amplitude")) {
    throw NumericalError("center_scan: no line found in scan '" + scan.id() + "' (" + fit.message + ")");
  }
  return scan.shifted(-fit.parameters.at("center_hz").value);
}

ScatteringModel::ScatteringModel(const ScatteringFitConfig& cfg)
    : alpha_z_(cfg.thermal.alpha_z()),
      pulse_area_(cfg.thermal.drive.pulse_area_factor()),
      rabi_(cfg.thermal.drive.rabi_bare()),
      direction_(cfg.thermal.drive.direction()) {
  if (!std::isfinite(alpha_z_)) throw DomainError("ScatteringModel: the closed form needs T_Z > 0");
  const auto& th = cfg.thermal;
  auto per_a = [&](const TrapGeometry& trap) {
    return mean_interaction(1.0, trap, th.thermal, th.mass, th.renormalization);
  };
  if (!cfg.ensemble) {
    u_per_a_.push_back(per_a(th.trap));
    weight_.push_back(1.0);
  } else {
    for (const auto& site : sample_sites(*cfg.ensemble, cfg.n_samples, cfg.seed)) {
      if (site.n_atoms > 2) throw DomainError("ScatteringModel: sites with more than two atoms are not modelled");
      u_per_a_.push_back(site.n_atoms == 2 ? per_a(site.trap) : 0.0);
      weight_.push_back(site.weight);
    }
    if (u_per_a_.empty()) throw DomainError("ScatteringModel: no occupied sites sampled");
  }
  for (double w : weight_) weight_sum_ += w;
}

double ScatteringModel::operator()(double detuning_hz, double a, double eta) const {
  const double d = std::abs(to_angular(detuning_hz));
  const double sign = direction_ == Direction::GtoE ? 1.0 : -1.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < u_per_a_.size(); ++i) {
    const double u = a * u_per_a_[i];
    const double lo = isb_closed_form_excitations(-sign * d, u, alpha_z_, eta, pulse_area_, rabi_);
    const double hi = isb_closed_form_excitations(sign * d, u, alpha_z_, eta, pulse_area_, rabi_);
    acc += weight_[i] * 0.5 * (lo - hi);
  }
  return acc / weight_sum_;
}

FitResult fit_scattering_length(const BinnedSpectrum& data, const ScatteringFitConfig& cfg) {
  data.validate();
  const double a0 = kCodata2018.bohr_radius();
  const double cut_hz = cfg.carrier_cut * from_angular(cfg.thermal.drive.rabi_bare());
  std::vector<const Bin*> used;
  for (const auto& b : data.bins) {
    if (std::abs(b.center_hz) < cut_hz) continue;
    const bool masked = std::any_of(cfg.masked_hz.begin(), cfg.masked_hz.end(), [&](const auto& r) {
      return b.center_hz >= r.first && b.center_hz <= r.second;
    });
    if (!masked) used.push_back(&b);
  }
  const int n_par = cfg.fit_eta ? 2 : 1;
  if (static_cast<int>(used.size()) <= n_par) {
    throw DomainError("fit_scattering_length: too few bins outside the carrier cut and masks");
  }
  const bool uniform = std::any_of(used.begin(), used.end(), [](const Bin* b) { return !(b->sem > 0.0); });

  const ScatteringModel model(cfg);
  const double eta_fixed = cfg.initial_eta.value_or(cfg.thermal.trap.eta_z());
  auto eta_of = [&](const Eigen::VectorXd& p) { return cfg.fit_eta ? p[1] : eta_fixed; };

  LeastSquaresProblem prob;
  prob.residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(used.size()));
    for (std::size_t i = 0; i < used.size(); ++i) {
      const double sigma = uniform ? 1.0 : used[i]->sem;
      r[static_cast<Eigen::Index>(i)] = (used[i]->mean - model(used[i]->center_hz, p[0] * a0, eta_of(p))) / sigma;
    }
    return r;
  };
  Eigen::VectorXd x0(n_par), lo(n_par), hi(n_par);
  x0[0] = std::clamp(cfg.initial_a / a0, -cfg.max_abs_a_bohr, cfg.max_abs_a_bohr);
  lo[0] = -cfg.max_abs_a_bohr;
  hi[0] = cfg.max_abs_a_bohr;
  if (cfg.fit_eta) {
    x0[1] = eta_fixed;
    lo[1] = 1e-4;
    hi[1] = 1.0;
  }
  prob.lower = lo;
  prob.upper = hi;
  if (cfg.coarse_search && x0[0] != 0.0) {
    const double sign = x0[0] < 0.0 ? -1.0 : 1.0;
    Eigen::VectorXd trial = x0;
    double best = prob.residuals(x0).squaredNorm();
    std::vector<double> mags;
    for (double mag = std::abs(x0[0]) / 8.0; mag < cfg.max_abs_a_bohr; mag *= std::numbers::sqrt2) mags.push_back(mag);
    mags.push_back(cfg.max_abs_a_bohr);
    for (double mag : mags) {
      trial[0] = sign * mag;
      const double obj = prob.residuals(trial).squaredNorm();
      if (std::isfinite(obj) && obj < best) {
        best = obj;
        x0[0] = trial[0];
      }
    }
  }
  const auto lm = levenberg_marquardt(prob, x0, cfg.optimizer);
  // Real sems give an absolute chi^2 scale; uniform weights fall back on the residual scatter.
  const Eigen::MatrixXd cov = parameter_covariance(lm, uniform);

  FitResult fr;
  const std::string names[] = {"a_eg_minus_a0", "eta_z"};
  bool finite = true;
  for (int i = 0; i < n_par; ++i) {
    const double err = std::sqrt(cov(i, i));
    finite = finite && std::isfinite(err);
    fr.parameters[names[i]] = ParameterEstimate{lm.params[i], err};
    if (lm.at_bound[static_cast<std::size_t>(i)]) fr.flags.push_back("at_bound:" + names[i]);
  }

  // Height of the fitted sideband over the used bins, with a delta-method error.
  std::size_t best = 0;
  double best_val = 0.0;
  for (std::size_t i = 0; i < used.size(); ++i) {
    const double v = model(used[i]->center_hz, lm.params[0] * a0, eta_of(lm.params));
    if (std::abs(v) > std::abs(best_val)) {
      best_val = v;
      best = i;
    }
  }
  Eigen::VectorXd grad(n_par);
  for (int k = 0; k < n_par; ++k) {
    Eigen::VectorXd p1 = lm.params, p2 = lm.params;
    const double h = 1e-6 * std::max(1.0, std::abs(lm.params[k]));
    p1[k] += h;
    p2[k] -= h;
    grad[k] = (model(used[best]->center_hz, p1[0] * a0, eta_of(p1)) -
               model(used[best]->center_hz, p2[0] * a0, eta_of(p2))) / (2.0 * h);
  }
  const double peak_var = grad.dot(cov * grad);
  fr.parameters["peak_excitation"] = ParameterEstimate{best_val, std::sqrt(std::max(0.0, peak_var))};

  fr.residual_norm = std::sqrt(lm.objective);
  fr.converged = lm.converged && finite;
  fr.n_evaluations = lm.evaluations;
  fr.iterations = lm.iterations;
  fr.objective_history = lm.history;
  fr.message = finite ? lm.message : lm.message + "; covariance singular";
  if (uniform) fr.flags.push_back("uniform_weights");
  return fr;
}

std::vector<std::size_t> find_peaks(const std::vector<double>& detunings, const std::vector<double>& values,
                                    double min_abs_detuning, double window) {
  if (detunings.size() != values.size()) throw DomainError("find_peaks: size mismatch");
  std::vector<std::size_t> out;
  const std::size_t n = values.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (std::abs(detunings[i]) < min_abs_detuning) continue;
    if (!(values[i] > values[i - 1] && values[i] >= values[i + 1])) continue;
    bool dominant = true;
    for (std::size_t j = 0; j < n && dominant; ++j) {
      if (j != i && std::abs(detunings[j] - detunings[i]) <= window && values[j] > values[i]) dominant = false;
    }
    if (dominant) out.push_back(i);
  }
  return out;
}

}  // namespace isb
