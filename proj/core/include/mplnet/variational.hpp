#pragma once

#include <vector>

#include "mplnet/types.hpp"

namespace mplnet {

/// Variational parameters eta = ({M_g}, {S_g}, P): per-component Gaussian
/// means/variances for the latents and per-sample responsibilities.
struct VariationalState {
  std::vector<Matrix> var_means;      // G matrices, n x p
  std::vector<Matrix> var_variances;  // G matrices, n x p, entries > 0
  Matrix responsibilities;            // n x G, rows on the simplex

  int n_components() const { return static_cast<int>(var_means.size()); }

  void validate() const;
};

/// Per-component ELBO decomposition. term_values[k] holds, for component g:
/// k=0..2 the P-weighted sums of Lambda(1..3), k=3..4 the P-weighted
/// Lambda(4), Lambda(5) contributions, k=5 the K_g constant.
struct ElboBreakdown {
  Vector per_component;
  double total = 0.0;
  Matrix term_values;  // G x 6

  double component(int g) const { return per_component(g); }
};

/// Row constants sum_j {-log(Y_ij!) + Y_ij log l_i}; they enter K_g and are
/// independent of all parameters, so callers precompute them once per dataset.
Vector log_count_constants(const CountDataset& data);

/// Exponent cap applied inside F1 before exponentiation; entries above it
/// are clamped with a warning.
inline constexpr double kF1ExponentCap = 30.0;

/// Evidence lower bound with the five Lambda aggregates per component.
ElboBreakdown elbo(const CountDataset& data, const MixtureParams& params,
                   const VariationalState& state,
                   const Vector* row_constants = nullptr);

enum class PStepMode { paper, exact };

/// Responsibility update. paper mode scores rows with U = F2 only; exact
/// mode adds the component-dependent Poisson/entropy row terms so the update
/// is the exact coordinate maximizer of the ELBO over each row simplex.
/// Softmax uses max-subtraction; rows sum to 1 exactly.
Matrix p_step(const CountDataset& data, const MixtureParams& params,
              const VariationalState& state, PStepMode mode,
              int n_threads = 0);

/// pi_g = column means of P.
Vector pi_step(const VariationalState& state);

/// Responsibility-mass floor below which a component counts as degenerate.
inline constexpr double kResponsibilityFloor = 1e-8;

/// mu_g = P_{.g}-weighted mean of the rows of M_g.
std::vector<Vector> mu_step(const VariationalState& state);

/// Per-entry variance update: unique minimizer of
///   F1(l_i, M_ij, S) + Theta_jj S / 2 - log(S) / 2  over S > 0,
/// found by safeguarded Newton on the stationarity equation to |grad|<=1e-8.
void s_step(const CountDataset& data, const MixtureParams& params,
            VariationalState& state, int n_threads = 0);

/// Solves one S-step coordinate; exposed for tests.
double s_step_scalar(double log_l, double m, double theta_jj,
                     double init = 1.0);

/// Sigma_g = sum_i P_ig [(M_i - mu)(M_i - mu)' + diag(S_i)] / sum_i P_ig.
/// Fixed accumulation order; symmetric PSD with positive diagonal.
Matrix weighted_covariance(const VariationalState& state, const Vector& mean,
                           int g);

}  // namespace mplnet
