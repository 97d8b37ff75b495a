#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mplnet/admm.hpp"
#include "mplnet/glasso.hpp"
#include "mplnet/types.hpp"
#include "mplnet/variational.hpp"

namespace mplnet {

struct AdmmSettings {
  double rho = 1.0;
  int max_iter = 100;
  double tol = 1e-6;
};

/// Inputs of the block-descent loop. `lambda` is the penalty on the
/// per-sample scale: the penalized objective is
///   -ELBO + lambda * n * sum_g ||Theta_g||_1,off,
/// so the component-g glasso subproblem sees lambda * n / sum_i P_ig.
/// This keeps lambda comparable across n (e.g. sqrt(log n / n) rates) and
/// makes G=1 fits use lambda directly as the glasso penalty.
struct FitConfig {
  int components = 1;                    // G
  double lambda = 0.0;                   // per-sample penalty, >= 0
  std::vector<double> lambda_per_component;  // optional override, length G
  ZeroEdgeSet zero_edges;                // E_p
  int max_outer = 100;                   // K
  int min_outer = 1;
  double tol_elbo = 1e-6;                // eps_L
  double tol_sign = 1e-4;                // eps_s
  double glasso_tol = 1e-7;
  AdmmSettings admm;
  PStepMode p_step_mode = PStepMode::paper;
  std::uint64_t seed = 0;
  int n_threads = 0;
  int kmeans_restarts = 10;
  bool icl_count_offdiag_pairs_only = false;  // s(Theta) convention switch

  double lambda_for(int g) const {
    return lambda_per_component.empty() ? lambda : lambda_per_component.at(g);
  }
  void validate() const;
};

enum class FitStatus { converged, max_iter, degenerate };

struct FitTraceRecord {
  int iteration = 0;
  double elbo_total = 0.0;
  double penalized_objective = 0.0;  // -ELBO + n * sum_g lambda_g ||Theta_g||_1,off
  double delta_elbo = 0.0;           // delta_L
  double delta_sign = 0.0;           // delta_s
};

struct FitResult {
  MixtureParams params;
  VariationalState state;
  std::vector<FitTraceRecord> trace;
  FitStatus status = FitStatus::max_iter;
  ElboBreakdown final_elbo;
  Vector scaling_used;
  long admm_factorizations = 0;  // across the whole fit
  int outer_iterations = 0;

  double penalized_objective() const {
    return trace.empty() ? 0.0 : trace.back().penalized_objective;
  }
};

/// Per-sample scaling: provided l, or l_i = sum_j Y_ij / 1e4.
Vector resolve_scaling(const CountDataset& data);

/// log(Y + 1) - log(l) 1_p', the normalized matrix used by K-means.
Matrix normalize_counts(const CountDataset& data);

/// K-means (k=G, seeded, best of restarts) on the normalized counts;
/// responsibilities are the smoothed hard assignment, M_g the normalized
/// data, S_g == 1, mu_g the cluster means, Theta_g a glasso fit of the
/// within-cluster covariance at the configured lambda.
std::pair<MixtureParams, VariationalState> initialize(const CountDataset& data,
                                                      const FitConfig& config);

/// Runs the full block-update loop: P, pi, M (ADMM), S, mu, Theta (glasso),
/// then the delta_L / delta_s convergence tests. Deterministic for a given
/// seed and independent of n_threads.
FitResult fit(const CountDataset& data, const FitConfig& config);

/// As fit(), but starting from the given (params, state) instead of the
/// K-means initialization; used for warm starts along a lambda path.
FitResult fit_from(const CountDataset& data, const FitConfig& config,
                   const MixtureParams& params0, const VariationalState& state0);

/// Integrated complete likelihood of component g:
///   -2 l_E^{(g)} + log(1' P_g) s(Theta_g),
/// with s the nonzero count of Theta_g (all entries, or off-diagonal pairs
/// only when the config switch is set).
double icl_score(const FitResult& fit_result, int g,
                 bool count_offdiag_pairs_only = false);

struct LambdaSelection {
  std::vector<double> lambda;  // per component
  FitResult fit;
  bool density_warning = false;  // density target unreachable at lambda = 0
};

/// Fits along the ascending lambda grid (warm-started), picks the
/// per-component ICL minimizer (ties toward the larger lambda), and refits
/// with the selected per-component values.
LambdaSelection select_lambda_icl(const CountDataset& data,
                                  const FitConfig& config,
                                  const std::vector<double>& grid);

/// Default ICL grid: 20 log-spaced values on [1e-3, 1] * max |off-diagonal|
/// of the initialization covariances.
std::vector<double> default_lambda_grid(const CountDataset& data,
                                        const FitConfig& config,
                                        int size = 20);

/// Bisection on log lambda until every component's off-diagonal nonzero
/// fraction is within +-10% relative of target (or 30 steps). per_component
/// selects independent lambdas; otherwise one shared lambda targets the mean
/// density. Unreachable targets return the lambda = 0 fit with a warning.
LambdaSelection select_lambda_density(const CountDataset& data,
                                      const FitConfig& config,
                                      double target_density,
                                      bool per_component = true,
                                      int max_steps = 30);

}  // namespace mplnet
