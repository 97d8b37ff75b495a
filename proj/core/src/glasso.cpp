#include "mplnet/glasso.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mplnet {

void ZeroEdgeSet::add(int l, int m) {
  if (l == m) throw input_error("zero edges: diagonal pair not allowed");
  if (l > m) std::swap(l, m);
  pairs.insert({l, m});
}

bool ZeroEdgeSet::contains(int l, int m) const {
  if (l > m) std::swap(l, m);
  return pairs.count({l, m}) > 0;
}

void ZeroEdgeSet::validate(Eigen::Index p) const {
  for (const auto& [l, m] : pairs) {
    if (l < 0 || m < 0 || l >= p || m >= p)
      throw input_error("zero edges: index out of range");
    if (l == m) throw input_error("zero edges: diagonal pair not allowed");
  }
}

double glasso_objective(const Matrix& precision, const Matrix& cov,
                        double lambda_eff) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw parameter_error("glasso_objective: precision not positive definite");
  const Matrix lmat = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < precision.rows(); ++j)
    log_det += 2.0 * std::log(lmat(j, j));
  double l1_off = precision.cwiseAbs().sum() -
                  precision.diagonal().cwiseAbs().sum();
  return -0.5 * log_det + 0.5 * (precision * cov).trace() +
         lambda_eff * l1_off;
}

double offdiag_density(const Matrix& precision) {
  const Eigen::Index p = precision.rows();
  if (p < 2) return 0.0;
  long nonzero = 0;
  for (Eigen::Index l = 0; l < p; ++l)
    for (Eigen::Index m = l + 1; m < p; ++m)
      if (precision(l, m) != 0.0) ++nonzero;
  return static_cast<double>(nonzero) /
         (0.5 * static_cast<double>(p) * static_cast<double>(p - 1));
}

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Recovers Theta from the working covariance W and the per-column lasso
// coefficients B: theta_jj = 1 / (w_jj - w12' beta_j), theta_:j = -beta theta_jj.
Matrix recover_precision(const Matrix& w, const Matrix& b) {
  const Eigen::Index p = w.rows();
  Matrix theta = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double dot = 0.0;
    for (Eigen::Index k = 0; k < p; ++k)
      if (k != j) dot += w(k, j) * b(k, j);
    const double denom = w(j, j) - dot;
    if (!(denom > 0.0))
      throw numerical_error("glasso: non-positive diagonal in recovery");
    const double tjj = 1.0 / denom;
    theta(j, j) = tjj;
    for (Eigen::Index k = 0; k < p; ++k)
      if (k != j) theta(k, j) = (b(k, j) == 0.0) ? 0.0 : -b(k, j) * tjj;
  }
  // Exact zeros stay exact: the average of two exact zeros is zero.
  for (Eigen::Index l = 0; l < p; ++l) {
    for (Eigen::Index m = l + 1; m < p; ++m) {
      const double v = 0.5 * (theta(l, m) + theta(m, l));
      theta(l, m) = v;
      theta(m, l) = v;
    }
  }
  return theta;
}

struct KktResiduals {
  double offdiag = 0.0;
  double diag = 0.0;
};

KktResiduals kkt_residuals(const Matrix& theta, const Matrix& cov,
                           double lambda_eff, const ZeroEdgeSet& zeros) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success)
    throw numerical_error("glasso: iterate lost positive definiteness");
  const Eigen::Index p = theta.rows();
  const Matrix w = llt.solve(Matrix::Identity(p, p));
  KktResiduals res;
  const double thr = 2.0 * lambda_eff;
  for (Eigen::Index l = 0; l < p; ++l) {
    res.diag = std::max(res.diag, std::abs(cov(l, l) - w(l, l)));
    for (Eigen::Index m = l + 1; m < p; ++m) {
      if (zeros.contains(static_cast<int>(l), static_cast<int>(m))) continue;
      const double grad = cov(l, m) - w(l, m);
      double r;
      if (theta(l, m) != 0.0)
        r = std::abs(grad + thr * (theta(l, m) > 0.0 ? 1.0 : -1.0));
      else
        r = std::max(0.0, std::abs(grad) - thr);
      res.offdiag = std::max(res.offdiag, r);
    }
  }
  return res;
}

}  // namespace

GlassoSolution glasso_fit(const Matrix& cov_in, double lambda_eff,
                          const ZeroEdgeSet& zeros, double tol,
                          const Matrix* warm_start, int max_sweeps) {
  const Eigen::Index p = cov_in.rows();
  if (cov_in.cols() != p) throw input_error("glasso: covariance not square");
  if (!detail::is_symmetric(cov_in, 1e-10))
    throw input_error("glasso: covariance not symmetric");
  if (!(lambda_eff >= 0.0)) throw input_error("glasso: negative penalty");
  zeros.validate(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(cov_in(j, j) > 0.0))
      throw input_error("glasso: covariance diagonal must be positive");
  }

  Matrix cov = 0.5 * (cov_in + cov_in.transpose());
  {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      cov.diagonal().array() += 1e-8 * cov.diagonal().mean();
  }

  GlassoSolution sol;
  if (p == 1) {
    sol.precision = Matrix::Constant(1, 1, 1.0 / cov(0, 0));
    sol.objective = glasso_objective(sol.precision, cov, lambda_eff);
    sol.kkt_residual = 0.0;
    sol.iterations = 0;
    return sol;
  }

  const double thr = 2.0 * lambda_eff;

  // Working covariance W (diagonal pinned to cov's) and lasso coefficients B.
  Matrix w = cov;
  Matrix b = Matrix::Zero(p, p);
  if (warm_start != nullptr) {
    Eigen::LLT<Matrix> llt(*warm_start);
    if (llt.info() == Eigen::Success) {
      w = llt.solve(Matrix::Identity(p, p));
      w = 0.5 * (w + w.transpose()).eval();
      w.diagonal() = cov.diagonal();
      for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < p; ++k)
          if (k != j)
            b(k, j) = zeros.contains(static_cast<int>(k), static_cast<int>(j))
                          ? 0.0
                          : -(*warm_start)(k, j) / (*warm_start)(j, j);
    }
  }

  const double inner_tol =
      0.1 * tol / std::max(cov.diagonal().maxCoeff(), 1.0);

  double best_residual = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      // v = W11 beta maintained incrementally over the free coordinates.
      Vector v = Vector::Zero(p);
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j || b(k, j) == 0.0) continue;
        v += b(k, j) * w.col(k);
      }
      for (int pass = 0; pass < 200; ++pass) {
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          if (zeros.contains(static_cast<int>(k), static_cast<int>(j)))
            continue;
          const double old = b(k, j);
          const double r = cov(k, j) - (v(k) - w(k, k) * old);
          const double next = soft_threshold(r, thr) / w(k, k);
          const double change = next - old;
          if (change != 0.0) {
            v += change * w.col(k);
            b(k, j) = next;
            max_change = std::max(max_change, std::abs(change));
          }
        }
        if (max_change <= inner_tol) break;
      }
      // w12 <- W11 beta; w(j, j) stays pinned to the covariance diagonal.
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j) continue;
        w(k, j) = v(k);
        w(j, k) = v(k);
      }
    }

    Matrix theta = recover_precision(w, b);
    const KktResiduals res = kkt_residuals(theta, cov, lambda_eff, zeros);
    const double worst = std::max(res.offdiag, res.diag);
    sol.precision = std::move(theta);
    sol.kkt_residual = res.offdiag;
    sol.iterations = sweep;
    if (worst <= tol) {
      sol.objective = glasso_objective(sol.precision, cov, lambda_eff);
      return sol;
    }
    if (worst < best_residual - 1e-15) {
      best_residual = worst;
      stagnant = 0;
    } else if (++stagnant >= 20) {
      throw numerical_error(
          "glasso: stalled before reaching KKT tolerance (residual " +
          std::to_string(worst) + ")");
    }
  }
  throw numerical_error("glasso: no convergence in " +
                        std::to_string(max_sweeps) +
                        " sweeps (KKT residual " +
                        std::to_string(sol.kkt_residual) + ")");
}

}  // namespace mplnet
