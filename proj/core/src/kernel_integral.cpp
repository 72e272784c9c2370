#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "isb/errors.hpp"
#include "isb/thermal.hpp"

namespace isb {

// With p = sinh s the integral is 2 * int_0^inf sin^2(c cosh s) / cosh s ds. The first panel,
// up to the first zero of the integrand, is integrated in s; after that u = c cosh s puts the
// zeros at exact multiples of pi and the integrand becomes c sin^2 u / (u sqrt(u^2 - c^2)).
// Beyond a cutoff S the tail is
//   atan(e^{-S}) + sin(2c cosh S) / (4c sinh S cosh S) + O(e^{-3S} / c^2).
double sideband_kernel_integral(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("sideband_kernel_integral: c must be finite and >= 0");
  if (c == 0.0) return 0.0;
  constexpr double rel_tol = 1e-8;
  const double a = 2.0 * c;
  const double scale = std::min(std::numbers::pi * c, 0.5 * std::numbers::pi);
  const double target = 1e-3 * rel_tol * scale * a * a / 8.0;
  const double s_cut = std::max(1.0, -std::log(target) / 3.0);
  const double u_cut = c * std::cosh(s_cut);

  using Rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  double total = 0.0, err_total = 0.0, err = 0.0;

  const double k0 = std::floor(c / std::numbers::pi) + 1.0;
  double u_lo = std::min(u_cut, k0 * std::numbers::pi);
  auto in_s = [c](double s) {
    const double v = std::sin(c * std::cosh(s));
    return v * v / std::cosh(s);
  };
  total += Rule::integrate(in_s, 0.0, std::acosh(u_lo / c), 10, 1e-12, &err);
  err_total += err;

  auto in_u = [c](double u) {
    const double v = std::sin(u);
    return c * v * v / (u * std::sqrt((u - c) * (u + c)));
  };
  while (u_lo < u_cut) {
    const double u_hi = std::min(u_cut, u_lo + std::numbers::pi);
    total += Rule::integrate(in_u, u_lo, u_hi, 10, 1e-12, &err);
    err_total += err;
    u_lo = u_hi;
  }
  const double tail = std::atan(std::exp(-s_cut)) + std::sin(a * std::cosh(s_cut)) /
                                                        (2.0 * a * std::sinh(s_cut) * std::cosh(s_cut));
  const double result = 2.0 * (total + tail);
  if (!std::isfinite(result) || 2.0 * err_total > rel_tol * std::abs(result)) {
    throw NumericalError("sideband_kernel_integral: quadrature did not reach 1e-8 relative accuracy");
  }
  return result;
}

}  // namespace isb
