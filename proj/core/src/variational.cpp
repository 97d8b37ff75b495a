#include "mplnet/variational.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <cmath>
#include <string>

#include "mplnet/parallel.hpp"

namespace mplnet {

namespace {

double chol_log_det(const Matrix& precision) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw parameter_error("elbo: precision matrix not positive definite");
  const Matrix lmat = llt.matrixL();
  double ld = 0.0;
  for (Eigen::Index j = 0; j < lmat.rows(); ++j)
    ld += 2.0 * std::log(lmat(j, j));
  return ld;
}

// F1 matrix exp(M + S/2 + log l) with the exponent cap.
Matrix f1_matrix(const Matrix& m, const Matrix& s, const Vector& log_l) {
  Matrix expo = m + 0.5 * s;
  expo.colwise() += log_l;
  const double mx = expo.maxCoeff();
  if (mx > kF1ExponentCap) {
    warn("elbo: F1 exponent " + std::to_string(mx) + " clamped at " +
         std::to_string(kF1ExponentCap));
    expo = expo.cwiseMin(kF1ExponentCap);
  }
  return expo.array().exp();
}

// F2 vector over samples: (log det Theta - tr(Theta Sigma_gi)) / 2 with
// Sigma_gi = (M_i - mu)(M_i - mu)' + diag(S_i).
Vector f2_vector(const Matrix& m, const Matrix& s, const Vector& mu,
                 const Matrix& theta, double log_det) {
  Matrix centered = m.rowwise() - mu.transpose();
  Vector quad = ((centered * theta).array() * centered.array()).rowwise().sum();
  Vector trace_s = s * theta.diagonal();
  return 0.5 * (Vector::Constant(m.rows(), log_det) - quad - trace_s);
}

void check_state(const CountDataset& data, const MixtureParams& params,
                 const VariationalState& state) {
  const Eigen::Index n = data.counts.rows();
  const Eigen::Index p = data.counts.cols();
  const int G = params.n_components();
  if (state.n_components() != G ||
      static_cast<int>(state.var_variances.size()) != G)
    throw input_error("variational state: component count mismatch");
  if (state.responsibilities.rows() != n || state.responsibilities.cols() != G)
    throw input_error("variational state: responsibility shape mismatch");
  for (int g = 0; g < G; ++g) {
    if (state.var_means[g].rows() != n || state.var_means[g].cols() != p ||
        state.var_variances[g].rows() != n ||
        state.var_variances[g].cols() != p)
      throw input_error("variational state: M/S shape mismatch");
    if (!(state.var_variances[g].minCoeff() > 0.0))
      throw input_error("variational state: variances must be positive");
  }
}

}  // namespace

void VariationalState::validate() const {
  const int G = n_components();
  if (G < 1) throw input_error("variational state: no components");
  if (responsibilities.cols() != G)
    throw input_error("variational state: responsibility width != G");
  for (int g = 0; g < G; ++g) {
    if (!(var_variances[g].minCoeff() > 0.0))
      throw input_error("variational state: variances must be positive");
  }
  for (Eigen::Index i = 0; i < responsibilities.rows(); ++i) {
    if (responsibilities.row(i).minCoeff() < 0.0)
      throw input_error("variational state: negative responsibility");
    if (std::abs(responsibilities.row(i).sum() - 1.0) > 1e-12)
      throw input_error("variational state: responsibility row off simplex");
  }
}

Vector log_count_constants(const CountDataset& data) {
  const Eigen::Index n = data.counts.rows();
  Vector c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double log_l = std::log(data.scaling(i));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < data.counts.cols(); ++j) {
      const double y = data.counts(i, j);
      acc += -std::lgamma(y + 1.0) + y * log_l;
    }
    c(i) = acc;
  }
  return c;
}

ElboBreakdown elbo(const CountDataset& data, const MixtureParams& params,
                   const VariationalState& state, const Vector* row_constants) {
  check_state(data, params, state);
  const int G = params.n_components();
  const Eigen::Index n = data.counts.rows();

  Vector constants;
  if (row_constants == nullptr) {
    constants = log_count_constants(data);
    row_constants = &constants;
  }
  const Vector log_l = data.scaling.array().log();

  ElboBreakdown out;
  out.per_component.resize(G);
  out.term_values.resize(G, 6);

  for (int g = 0; g < G; ++g) {
    const Matrix& m = state.var_means[g];
    const Matrix& s = state.var_variances[g];
    const Vector pg = state.responsibilities.col(g);

    const double log_det = chol_log_det(params.precisions[g]);
    const Vector lambda1 = (data.counts.array() * m.array()).rowwise().sum();
    const Vector lambda2 = f1_matrix(m, s, log_l).rowwise().sum();
    const Vector lambda3 = (0.5 * s.array().log()).rowwise().sum();
    const Vector lambda5 =
        f2_vector(m, s, params.means[g], params.precisions[g], log_det);

    double term4 = 0.0;
    const double log_pi = std::log(params.proportions(g));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pig = pg(i);
      if (pig > 0.0) term4 += pig * (log_pi - std::log(pig));
    }

    const double t1 = pg.dot(lambda1);
    const double t2 = pg.dot(lambda2);
    const double t3 = pg.dot(lambda3);
    const double t5 = pg.dot(lambda5);
    const double kg = pg.dot(*row_constants);
    out.term_values.row(g) << t1, t2, t3, term4, t5, kg;
    out.per_component(g) = t1 - t2 + t3 + term4 + t5 + kg;
  }
  out.total = out.per_component.sum();
  return out;
}

Matrix p_step(const CountDataset& data, const MixtureParams& params,
              const VariationalState& state, PStepMode mode, int n_threads) {
  check_state(data, params, state);
  const int G = params.n_components();
  const Eigen::Index n = data.counts.rows();
  const Vector log_l = data.scaling.array().log();

  Matrix log_w(n, G);
  parallel_for(
      0, static_cast<std::size_t>(G),
      [&](std::size_t gi) {
        const int g = static_cast<int>(gi);
        const Matrix& m = state.var_means[g];
        const Matrix& s = state.var_variances[g];
        const double log_det = chol_log_det(params.precisions[g]);
        Vector u =
            f2_vector(m, s, params.means[g], params.precisions[g], log_det);
        if (mode == PStepMode::exact) {
          u += (data.counts.array() * m.array()).rowwise().sum().matrix();
          u -= f1_matrix(m, s, log_l).rowwise().sum();
          u += (0.5 * s.array().log()).rowwise().sum().matrix();
        }
        log_w.col(g) =
            u.array() + std::log(params.proportions(g));
      },
      n_threads);

  Matrix p(n, G);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = log_w.row(i).maxCoeff();
    if (!std::isfinite(mx))
      throw numerical_error("p_step: all scores non-finite at row " +
                            std::to_string(i));
    Vector w = (log_w.row(i).array() - mx).exp();
    p.row(i) = w / w.sum();
  }
  return p;
}

Vector pi_step(const VariationalState& state) {
  const Eigen::Index n = state.responsibilities.rows();
  if (n == 0) throw input_error("pi_step: empty responsibilities");
  return state.responsibilities.colwise().sum() / static_cast<double>(n);
}

std::vector<Vector> mu_step(const VariationalState& state) {
  const int G = state.n_components();
  std::vector<Vector> mus(G);
  for (int g = 0; g < G; ++g) {
    const Vector w = state.responsibilities.col(g);
    const double sw = w.sum();
    if (sw <= kResponsibilityFloor)
      throw degenerate_error("mu_step: component " + std::to_string(g) +
                             " has responsibility mass " + std::to_string(sw));
    mus[g] = state.var_means[g].transpose() * w / sw;
  }
  return mus;
}

double s_step_scalar(double log_l, double m, double theta_jj,
                     double init) {
  if (!(theta_jj > 0.0))
    throw parameter_error("s_step: precision diagonal must be positive");
  const double expo_base = m + log_l;
  const auto grad = [&](double s) {
    return 0.5 * std::exp(std::min(expo_base + 0.5 * s, 700.0)) +
           0.5 * theta_jj - 0.5 / s;
  };
  // grad is strictly increasing; it is negative near 0 and positive past
  // 1/theta_jj, so the bracket below always contains the root.
  double lo = 1e-12;
  double hi = std::max(2.0 / theta_jj, 1.0);
  while (grad(hi) <= 0.0) hi *= 2.0;
  if (grad(lo) >= 0.0) return lo;

  double s = std::min(std::max(init > 0 ? init : 1.0, lo), hi);
  for (int it = 0; it < 200; ++it) {
    const double r = grad(s);
    if (std::abs(r) <= 1e-8) return s;
    if (r > 0.0)
      hi = s;
    else
      lo = s;
    const double rp = 0.25 * std::exp(std::min(expo_base + 0.5 * s, 700.0)) +
                      0.5 / (s * s);
    double next = s - r / rp;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  throw numerical_error("s_step: Newton did not converge");
}

void s_step(const CountDataset& data, const MixtureParams& params,
            VariationalState& state, int n_threads) {
  check_state(data, params, state);
  const int G = params.n_components();
  const Eigen::Index n = data.counts.rows();
  const Eigen::Index p = data.counts.cols();
  const Vector log_l = data.scaling.array().log();

  for (int g = 0; g < G; ++g) {
    const Vector theta_diag = params.precisions[g].diagonal();
    Matrix& s = state.var_variances[g];
    const Matrix& m = state.var_means[g];
    parallel_for(
        0, static_cast<std::size_t>(n),
        [&](std::size_t i) {
          for (Eigen::Index j = 0; j < p; ++j) {
            try {
              s(static_cast<Eigen::Index>(i), j) = s_step_scalar(
                  log_l(static_cast<Eigen::Index>(i)),
                  m(static_cast<Eigen::Index>(i), j), theta_diag(j),
                  s(static_cast<Eigen::Index>(i), j));
            } catch (const numerical_error&) {
              throw numerical_error("s_step: no convergence at (i=" +
                                    std::to_string(i) + ", g=" +
                                    std::to_string(g) + ", j=" +
                                    std::to_string(j) + ")");
            }
          }
        },
        n_threads);
  }
}

Matrix weighted_covariance(const VariationalState& state, const Vector& mean,
                           int g) {
  const Vector w = state.responsibilities.col(g);
  const double sw = w.sum();
  if (sw <= kResponsibilityFloor)
    throw degenerate_error("weighted_covariance: component " +
                           std::to_string(g) + " is degenerate");
  const Matrix centered = state.var_means[g].rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * w.asDiagonal() * centered;
  cov.diagonal() += state.var_variances[g].transpose() * w;
  cov /= sw;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

}  // namespace mplnet
