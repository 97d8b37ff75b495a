#pragma once

#include <Eigen/Cholesky>

#include "mplnet/types.hpp"
#include "mplnet/variational.hpp"

namespace mplnet {

/// Shared state for the M-step ADMM runs of one component: the step size
/// rho and a cached factorization of (rho I + Theta_g). prepare() must be
/// called once per (component, outer iteration); every row update then
/// reuses the factorization. The counter backs the one-factorization-per-
/// component invariant.
class AdmmWorkspace {
 public:
  explicit AdmmWorkspace(double rho = 1.0, int max_iter = 100,
                         double tol = 1e-6)
      : rho_(rho), max_iter_(max_iter), tol_(tol) {
    if (!(rho > 0.0)) throw parameter_error("admm: rho must be positive");
  }

  /// Factorizes (rho I + Theta) and caches Theta mu for the N-updates.
  void prepare(const Matrix& precision, const Vector& mean);

  bool prepared() const { return prepared_; }
  double rho() const { return rho_; }
  int max_iter() const { return max_iter_; }
  double tol() const { return tol_; }
  long factorization_count() const { return factorization_count_; }
  void reset_factorization_count() { factorization_count_ = 0; }

  const Eigen::LLT<Matrix>& solver() const { return solver_; }
  const Vector& precision_times_mean() const { return precision_times_mean_; }
  const Matrix& precision() const { return precision_; }
  const Vector& mean() const { return mean_; }

 private:
  double rho_;
  int max_iter_;
  double tol_;
  bool prepared_ = false;
  long factorization_count_ = 0;
  Eigen::LLT<Matrix> solver_;
  Matrix precision_;
  Vector mean_;
  Vector precision_times_mean_;
};

/// Root of -y + exp(m + s/2 + log l) + alpha + rho (m - n_target) = 0,
/// the stationarity condition of one ADMM Step-1 coordinate. Strictly
/// increasing in m; solved by safeguarded Newton bracketed in [-60, 60]
/// to |gradient| <= 1e-10.
double newton_1d_m(double y, double l, double s, double n_target,
                   double alpha_j, double rho);

struct AdmmRowResult {
  Vector m;             // updated variational mean row
  int iterations = 0;
  double delta_obj = 0.0;       // last relative objective change
  double primal_residual = 0.0; // ||m - n||_2 at exit
  bool converged = false;
};

/// One run of the M-step ADMM for row (i, g): alternates the p independent
/// Step-1 Newton solves, the closed-form N-update through the cached
/// factorization, and the multiplier step, until the relative change of the
/// augmented objective drops below tol or max_iter is hit.
AdmmRowResult m_row_update(const Vector& counts_row, double scaling,
                           const Vector& var_variance_row,
                           const Vector& m_row_init, const AdmmWorkspace& ws);

}  // namespace mplnet
