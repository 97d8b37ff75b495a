#pragma once

#include <cstdint>
#include <utility>

#include "mplnet/types.hpp"

namespace mplnet {

/// Draws n samples from the mixture Poisson log-normal model
///   Z_i ~ Multinomial(1, pi),  X_i | Z_i=g ~ N(mu_g, Theta_g^{-1}),
///   Y_ij | X_ij ~ Poisson(l_i exp(X_ij)).
/// Per-row RNG streams are derived from (seed, i), so the result is
/// byte-identical for a given seed regardless of scheduling.
/// Poisson rates above 1e9 are rejected as a parameter misuse.
CountDataset sample_mpln(const MixtureParams& params, const Vector& scaling,
                         std::uint64_t seed, int n_threads = 0);

/// Closed-form factorial moment of a PLN vector:
///   E[prod_j phi(y_j, n_j)] = exp(N' mu + N' Theta^{-1} N / 2),
/// with phi the falling factorial. Returned in log space to avoid overflow.
double pln_log_factorial_moment(const MomentIndex& index, const Vector& mean,
                                const Matrix& precision);
double pln_factorial_moment(const MomentIndex& index, const Vector& mean,
                            const Matrix& precision);

/// Falling factorial phi(y, n) = y (y-1) ... (y-n+1), phi(y, 0) = 1.
double falling_factorial(double y, int n);

/// Monte Carlo estimate of E[prod_j phi(Y_j, n_j)] over the rows of `data`,
/// with its standard error.
std::pair<double, double> empirical_factorial_moment(const CountDataset& data,
                                                     const MomentIndex& index);

/// Exact mixture log-likelihood for p <= 2 by adaptive Gauss-Hermite
/// quadrature centered at the per-sample Laplace mode. Oracle only; the
/// per-sample integrals target ~1e-6 relative accuracy at >= 50 nodes.
double loglik_oracle(const CountDataset& data, const MixtureParams& params,
                     int quad_nodes = 80);

namespace detail {
/// Nodes and weights of the n-point Gauss-Hermite rule (weight e^{-x^2}).
void gauss_hermite(int n, Vector& nodes, Vector& weights);
}  // namespace detail

}  // namespace mplnet
