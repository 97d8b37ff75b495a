#include "mplnet/admm.hpp"

#include <cmath>
#include <string>

namespace mplnet {

void AdmmWorkspace::prepare(const Matrix& precision, const Vector& mean) {
  const Eigen::Index p = precision.rows();
  Matrix shifted = precision;
  shifted.diagonal().array() += rho_;
  solver_.compute(shifted);
  if (solver_.info() != Eigen::Success)
    throw parameter_error("admm: rho I + Theta is not positive definite");
  precision_ = precision;
  mean_ = mean;
  precision_times_mean_ = precision * mean;
  prepared_ = true;
  ++factorization_count_;
  (void)p;
}

double newton_1d_m(double y, double l, double s, double n_target,
                   double alpha_j, double rho) {
  if (!(s > 0.0) || !(rho > 0.0))
    throw parameter_error("newton_1d_m: s and rho must be positive");
  const double expo_base = std::log(l) + 0.5 * s;
  const auto grad = [&](double m) {
    return -y + std::exp(std::min(m + expo_base, 700.0)) + alpha_j +
           rho * (m - n_target);
  };
  double lo = -60.0, hi = 60.0;
  if (grad(lo) > 0.0 || grad(hi) < 0.0)
    throw numerical_error("newton_1d_m: no sign change in [-60, 60]");

  double m = std::min(std::max(n_target, lo), hi);
  for (int it = 0; it < 200; ++it) {
    const double r = grad(m);
    if (std::abs(r) <= 1e-10) return m;
    if (r > 0.0)
      hi = m;
    else
      lo = m;
    const double rp = std::exp(std::min(m + expo_base, 700.0)) + rho;
    double next = m - r / rp;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    m = next;
  }
  throw numerical_error("newton_1d_m: Newton did not converge");
}

namespace {

// Augmented-objective value L_M(M, N) = L1(N) + sum_j L2(M_j):
//   L1(N) = (N - mu)' Theta (N - mu) / 2,
//   L2(M_j) = -Y_j M_j + exp(M_j + S_j/2 + log l).
double consensus_objective(const Vector& m, const Vector& n_aux,
                           const Vector& y, const Vector& expo_base,
                           const AdmmWorkspace& ws) {
  const Vector d = n_aux - ws.mean();
  double acc = 0.5 * d.dot(ws.precision() * d);
  acc -= y.dot(m);
  acc += (m + expo_base).cwiseMin(700.0).array().exp().sum();
  return acc;
}

}  // namespace

AdmmRowResult m_row_update(const Vector& counts_row, double scaling,
                           const Vector& var_variance_row,
                           const Vector& m_row_init, const AdmmWorkspace& ws) {
  if (!ws.prepared())
    throw parameter_error("m_row_update: workspace not prepared");
  const Eigen::Index p = counts_row.size();
  const double rho = ws.rho();
  const double log_l = std::log(scaling);

  const Vector expo_base =
      (0.5 * var_variance_row.array() + log_l).matrix();

  AdmmRowResult out;
  out.m = m_row_init;
  Vector n_aux = m_row_init;
  Vector alpha = Vector::Zero(p);

  double obj = consensus_objective(out.m, n_aux, counts_row, expo_base, ws);
  double delta = 1e6;
  int t = 0;
  // Step-1 Newton solves are vectorized over coordinates: the p stationarity
  // equations share the iteration count, with per-coordinate bisection
  // safeguards against leaving the bracket.
  Vector lo(p), hi(p);
  while (t < ws.max_iter() && delta > ws.tol()) {
    // Step 1: coordinate-wise minimizer of L2 + alpha (M - N) + rho/2 (M-N)^2.
    lo.setConstant(-60.0);
    hi.setConstant(60.0);
    const Vector glo = (-counts_row.array() +
                        (expo_base.array() - 60.0).min(700.0).exp() +
                        alpha.array() + rho * (-60.0 - n_aux.array()))
                           .matrix();
    const Vector ghi = (-counts_row.array() +
                        (expo_base.array() + 60.0).min(700.0).exp() +
                        alpha.array() + rho * (60.0 - n_aux.array()))
                           .matrix();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (glo(j) > 0.0 || ghi(j) < 0.0)
        throw numerical_error("m_row_update: coordinate " + std::to_string(j) +
                              " has no root in [-60, 60]");
    }
    Vector m_new = out.m.cwiseMax(lo).cwiseMin(hi);
    for (int newton_it = 0; newton_it < 200; ++newton_it) {
      const Vector expv = (m_new + expo_base).cwiseMin(700.0).array().exp();
      const Vector r = -counts_row + expv + alpha +
                       rho * (m_new - n_aux);
      const double worst = r.cwiseAbs().maxCoeff();
      if (worst <= 1e-10) break;
      if (newton_it == 199)
        throw numerical_error("m_row_update: Step-1 Newton did not converge");
      for (Eigen::Index j = 0; j < p; ++j) {
        if (r(j) > 0.0)
          hi(j) = m_new(j);
        else
          lo(j) = m_new(j);
        const double rp = expv(j) + rho;
        double next = m_new(j) - r(j) / rp;
        if (!(next > lo(j)) || !(next < hi(j)))
          next = 0.5 * (lo(j) + hi(j));
        m_new(j) = next;
      }
    }
    out.m = m_new;

    // Step 2: N = (rho I + Theta)^{-1} (rho M - alpha + Theta mu).
    n_aux = ws.solver().solve(rho * out.m - alpha + ws.precision_times_mean());

    // Step 3: dual ascent.
    alpha += rho * (out.m - n_aux);

    const double obj_new =
        consensus_objective(out.m, n_aux, counts_row, expo_base, ws);
    delta = std::abs(obj_new - obj) / std::max(std::abs(obj), 1e-300);
    obj = obj_new;
    ++t;
  }

  out.iterations = t;
  out.delta_obj = delta;
  out.primal_residual = (out.m - n_aux).norm();
  out.converged = delta <= ws.tol() &&
                  out.primal_residual <= 1e-6 * (1.0 + out.m.norm());
  return out;
}

}  // namespace mplnet
