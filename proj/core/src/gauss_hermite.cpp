#include "isb/gauss_hermite.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "isb/errors.hpp"

namespace isb {

namespace {

constexpr double kBig = 0x1p+400;
constexpr double kSmall = 0x1p-400;
const double kLogPsi0 = -0.25 * std::log(std::numbers::pi);

// a_k = sqrt(2/(k+1)), b_k = sqrt(k/(k+1)) for the normalized recurrence.
struct Coefficients {
  static constexpr int kTable = 1 << 15;
  std::vector<double> a, b;
  Coefficients() : a(kTable), b(kTable) {
    for (int k = 0; k < kTable; ++k) {
      a[static_cast<std::size_t>(k)] = std::sqrt(2.0 / (k + 1.0));
      b[static_cast<std::size_t>(k)] = std::sqrt(static_cast<double>(k) / (k + 1.0));
    }
  }
};

const Coefficients& coefficients() {
  static const Coefficients table;
  return table;
}

// Runs the three-term recurrence up to degree n, keeping psi_{k-1}, psi_k as mantissas sharing one
// natural-log scale. Calls visit(k, mantissa_k, log_scale) for every k.
struct Recurrence {
  double prev = 0.0;
  double cur = 1.0;
  double log_scale = 0.0;

  template <class Visit>
  void run(double z, int n, Visit&& visit) {
    const Coefficients& c = coefficients();
    prev = 0.0;
    cur = 1.0;
    log_scale = kLogPsi0 - 0.5 * z * z;
    visit(0, cur, log_scale);
    for (int k = 0; k < n; ++k) {
      double ak, bk;
      if (k < Coefficients::kTable) {
        ak = c.a[static_cast<std::size_t>(k)];
        bk = c.b[static_cast<std::size_t>(k)];
      } else {
        ak = std::sqrt(2.0 / (k + 1.0));
        bk = std::sqrt(static_cast<double>(k) / (k + 1.0));
      }
      const double next = ak * z * cur - bk * prev;
      prev = cur;
      cur = next;
      const double m = std::max(std::abs(prev), std::abs(cur));
      if (m > kBig || (m < kSmall && m > 0.0)) {
        const int e = std::ilogb(m);
        prev = std::scalbn(prev, -e);
        cur = std::scalbn(cur, -e);
        log_scale += e * std::numbers::ln2;
      }
      visit(k + 1, cur, log_scale);
    }
  }
  void run(double z, int n) {
    run(z, n, [](int, double, double) {});
  }
};

double log_abs(double mantissa, double log_scale) {
  if (mantissa == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(std::abs(mantissa)) + log_scale;
}

// Newton on psi_m from x; psi_m' = sqrt(2m) psi_{m-1} - x psi_m.
double polish(double x, int m, Recurrence& rec, int max_iter) {
  const double sqrt2m = std::sqrt(2.0 * m);
  for (int it = 0; it < max_iter; ++it) {
    rec.run(x, m);
    const double r = rec.cur / rec.prev;
    const double dx = r / (sqrt2m - x * r);
    x -= dx;
    if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

// Non-negative nodes, largest first. The outermost zeros start from the Airy-function asymptotics,
// the rest by linear extrapolation from the two previous zeros. Returns an empty vector if an
// iterate escapes its bracket (the caller falls back to the eigenvalue route).
std::vector<double> positive_nodes_newton(int m) {
  static constexpr double kAiryZeros[] = {-2.338107410459767, -4.087949444130971, -5.520559828095551,
                                          -6.786708090071759, -7.944133587120853, -9.022650853340980,
                                          -10.04017434155809, -11.00852430373326, -11.93601556323626,
                                          -12.82877675286576};
  constexpr int kAiry = 10;
  const int count = (m + 1) / 2;
  std::vector<double> x(static_cast<std::size_t>(count));
  Recurrence rec;
  const double edge = std::sqrt(2.0 * m + 1.0);
  const double scale = std::pow(2.0, -1.0 / 3.0) * std::pow(2.0 * m + 1.0, -1.0 / 6.0);
  for (int i = 0; i < count; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (m % 2 == 1 && i == count - 1) {
      x[iu] = 0.0;
      break;
    }
    double z;
    if (i < kAiry && count > 2 * kAiry) {
      z = edge + kAiryZeros[i] * scale;
    } else if (i < 2) {
      z = (i == 0) ? edge - 1.85575 * std::pow(2.0 * m + 1.0, -1.0 / 6.0)
                   : x[0] - 1.14 * std::pow(static_cast<double>(m), 0.426) / x[0];
    } else {
      z = 2.0 * x[iu - 1] - x[iu - 2];
    }
    z = polish(z, m, rec, 60);
    if (!(z > 0.0) || (i > 0 && !(z < x[iu - 1]))) return {};
    x[iu] = z;
  }
  return x;
}

std::vector<double> positive_nodes_eigen(int m) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int k = 1; k < m; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("gauss_hermite_rule: eigenvalue iteration failed");
  std::vector<double> x;
  Recurrence rec;
  for (int i = m - 1; i >= 0; --i) {
    double v = solver.eigenvalues()[i];
    if (m % 2 == 1 && i == m / 2) v = 0.0;
    if (v < 0.0) break;
    x.push_back(v == 0.0 ? 0.0 : polish(v, m, rec, 3));
  }
  return x;
}

// Nodes strictly decreasing and positive apart from a possible final zero, and weights summing
// to sqrt(pi).
bool plausible(const std::vector<double>& x, const std::vector<double>& w, int m) {
  if (x.size() != static_cast<std::size_t>((m + 1) / 2)) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(w[i]) || !(w[i] > 0.0)) return false;
    if (i > 0 && !(x[i] < x[i - 1])) return false;
  }
  if (m % 2 == 0 && !(x.back() > 0.0)) return false;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (x[i] == 0.0 ? 1.0 : 2.0) * w[i] * std::exp(-x[i] * x[i]);
  return std::abs(total - std::sqrt(std::numbers::pi)) < 1e-10;
}

std::vector<double> scaled_weights_for(const std::vector<double>& x, int m) {
  std::vector<double> w(x.size());
  Recurrence rec;
  for (std::size_t i = 0; i < x.size(); ++i) {
    rec.run(x[i], m - 1);
    // w_i exp(x_i^2) = 1 / (m psi_{m-1}(x_i)^2)
    w[i] = std::exp(-std::log(static_cast<double>(m)) - 2.0 * log_abs(rec.cur, rec.log_scale));
  }
  return w;
}

std::shared_ptr<const GaussHermiteRule> build_rule(int m) {
  auto rule = std::make_shared<GaussHermiteRule>();
  if (m == 1) {
    rule->nodes = {0.0};
    rule->scaled_weights = {std::sqrt(std::numbers::pi)};
    return rule;
  }
  std::vector<double> x = positive_nodes_newton(m);
  std::vector<double> w = scaled_weights_for(x, m);
  if (x.empty() || !plausible(x, w, m)) {
    x = positive_nodes_eigen(m);
    w = scaled_weights_for(x, m);
    if (!plausible(x, w, m)) throw NumericalError("gauss_hermite_rule: could not build a consistent rule");
  }
  rule->nodes.reserve(static_cast<std::size_t>(m));
  rule->scaled_weights.reserve(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    rule->nodes.push_back(-x[j]);
    rule->scaled_weights.push_back(w[j]);
  }
  for (std::size_t j = x.size(); j-- > 0;) {
    rule->nodes.push_back(x[j]);
    rule->scaled_weights.push_back(w[j]);
  }
  return rule;
}

}  // namespace

std::shared_ptr<const GaussHermiteRule> gauss_hermite_rule(int n_nodes) {
  if (n_nodes < 1) throw DomainError("gauss_hermite_rule: need at least one node");
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const GaussHermiteRule>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n_nodes);
    if (it != cache.end()) return it->second;
  }
  auto rule = build_rule(n_nodes);
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(n_nodes, std::move(rule)).first->second;
}

void log_hermite_functions(double z, std::span<double> out) {
  if (out.empty()) return;
  Recurrence rec;
  rec.run(z, static_cast<int>(out.size()) - 1,
          [&](int k, double mant, double ls) { out[static_cast<std::size_t>(k)] = log_abs(mant, ls); });
}

double hermite_function(int n, double z) {
  if (n < 0) throw DomainError("hermite_function: n must be >= 0");
  Recurrence rec;
  rec.run(z, n);
  return rec.cur * std::exp(rec.log_scale);
}

}  // namespace isb
