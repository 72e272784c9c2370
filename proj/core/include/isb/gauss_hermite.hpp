#pragma once

#include <memory>
#include <span>
#include <vector>

namespace isb {

// Gauss-Hermite rule for weight exp(-x^2). Weights are stored scaled by exp(x_i^2) so that
// they stay representable for thousands of nodes; integrate g(x) exp(-x^2) as sum w_i e^{-x_i^2} g(x_i).
struct GaussHermiteRule {
  std::vector<double> nodes;           // ascending
  std::vector<double> scaled_weights;  // w_i * exp(x_i^2)
};

// Cached per node count; thread safe.
std::shared_ptr<const GaussHermiteRule> gauss_hermite_rule(int n_nodes);

// log|psi_n(z)| for n = 0..out.size()-1, where psi_n is the normalized oscillator eigenfunction
// H_n(z) exp(-z^2/2) / sqrt(2^n n! sqrt(pi)). Uses a rescaled recurrence, so it neither
// overflows nor underflows for large n or |z|. Exact zeros give -infinity.
void log_hermite_functions(double z, std::span<double> out);

// psi_n(z) itself (may underflow to zero far outside the classical region).
double hermite_function(int n, double z);

}  // namespace isb
