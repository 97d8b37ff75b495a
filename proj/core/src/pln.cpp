#include "mplnet/pln.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mplnet/parallel.hpp"
#include "mplnet/rng.hpp"

namespace mplnet {

namespace {

constexpr double kMaxPoissonRate = 1e9;

int sample_component(std::mt19937_64& eng, const Vector& proportions) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(eng);
  double cum = 0.0;
  const int G = static_cast<int>(proportions.size());
  for (int g = 0; g < G; ++g) {
    cum += proportions(g);
    if (u < cum) return g;
  }
  return G - 1;
}

double logsumexp(const std::vector<double>& terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

}  // namespace

CountDataset sample_mpln(const MixtureParams& params, const Vector& scaling,
                         std::uint64_t seed, int n_threads) {
  params.validate();
  const Eigen::Index n = scaling.size();
  const Eigen::Index p = params.n_features();
  const int G = params.n_components();
  if (n == 0) throw input_error("sample_mpln: empty scaling vector");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(scaling(i) > 0.0) || !std::isfinite(scaling(i)))
      throw input_error("sample_mpln: scaling factors must be positive");
  }

  // One Cholesky per component: X = mu + L^{-T} xi has covariance Theta^{-1}.
  std::vector<Eigen::LLT<Matrix>> llts;
  llts.reserve(G);
  for (int g = 0; g < G; ++g) {
    llts.emplace_back(params.precisions[g]);
    if (llts.back().info() != Eigen::Success)
      throw parameter_error("sample_mpln: precision " + std::to_string(g) +
                            " is not positive definite");
  }

  CountDataset out;
  out.counts.resize(n, p);
  out.scaling = scaling;
  out.feature_names = default_feature_names(p);
  out.true_labels = IntVector(n);
  out.latent = Matrix(n, p);

  parallel_for(
      0, static_cast<std::size_t>(n),
      [&](std::size_t i) {
        auto eng = make_engine(seed, rng_stream::sampler_row, i);
        const int z = sample_component(eng, params.proportions);
        (*out.true_labels)(static_cast<Eigen::Index>(i)) = z;

        std::normal_distribution<double> normal(0.0, 1.0);
        Vector xi(p);
        for (Eigen::Index j = 0; j < p; ++j) xi(j) = normal(eng);
        Vector x = params.means[z] +
                   llts[z].matrixU().solve(xi);  // U = L^T
        out.latent->row(static_cast<Eigen::Index>(i)) = x.transpose();

        for (Eigen::Index j = 0; j < p; ++j) {
          const double rate = scaling(static_cast<Eigen::Index>(i)) *
                              std::exp(x(j));
          if (!std::isfinite(rate) || rate > kMaxPoissonRate)
            throw numerical_error(
                "sample_mpln: Poisson rate overflow at sample " +
                std::to_string(i) + ", feature " + std::to_string(j));
          std::poisson_distribution<long> pois(rate);
          out.counts(static_cast<Eigen::Index>(i), j) =
              static_cast<double>(pois(eng));
        }
      },
      n_threads);

  return out;
}

double falling_factorial(double y, int n) {
  double prod = 1.0;
  for (int k = 1; k <= n; ++k) prod *= (y - k + 1);
  return prod;
}

double pln_log_factorial_moment(const MomentIndex& index, const Vector& mean,
                                const Matrix& precision) {
  index.validate();
  if (index.orders.size() != mean.size() || precision.rows() != mean.size())
    throw input_error("factorial moment: dimension mismatch");
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw parameter_error("factorial moment: precision not positive definite");
  const Vector nd = index.orders.cast<double>();
  const Vector solved = llt.solve(nd);
  return nd.dot(mean) + 0.5 * nd.dot(solved);
}

double pln_factorial_moment(const MomentIndex& index, const Vector& mean,
                            const Matrix& precision) {
  return std::exp(pln_log_factorial_moment(index, mean, precision));
}

std::pair<double, double> empirical_factorial_moment(const CountDataset& data,
                                                     const MomentIndex& index) {
  index.validate();
  const Eigen::Index n = data.counts.rows();
  if (n == 0) throw input_error("empirical moment: empty dataset");
  if (index.orders.size() != data.counts.cols())
    throw input_error("empirical moment: index dimension mismatch");

  Vector products(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prod = 1.0;
    for (Eigen::Index j = 0; j < index.orders.size(); ++j)
      prod *= falling_factorial(data.counts(i, j), index.orders(j));
    products(i) = prod;
  }
  const double mean = products.mean();
  if (n == 1) return {mean, 0.0};
  const double ss = (products.array() - mean).square().sum();
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n))};
}

namespace detail {

// Golub-Welsch on the Hermite Jacobi matrix: diag 0, off-diagonal sqrt(k/2).
void gauss_hermite(int n, Vector& nodes, Vector& weights) {
  if (n < 1) throw input_error("gauss_hermite: need at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  nodes = es.eigenvalues();
  weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    weights(k) = sqrt_pi * v0 * v0;
  }
}

}  // namespace detail

namespace {

// Unnormalized log integrand of one (sample, component) integral:
//   sum_j [y_j (log l + x_j) - l e^{x_j} - lgamma(y_j + 1)]
//   + log det(Theta)/2 - p log(2 pi)/2 - (x - mu)' Theta (x - mu)/2.
struct Integrand {
  const Vector& y;
  double log_l;
  double l;
  const Vector& mu;
  const Matrix& theta;
  double log_det_theta;

  double log_value(const Vector& x) const {
    const Eigen::Index p = y.size();
    double acc = 0.5 * log_det_theta - 0.5 * p * std::log(2.0 * M_PI);
    for (Eigen::Index j = 0; j < p; ++j) {
      acc += y(j) * (log_l + x(j)) - l * std::exp(x(j)) -
             std::lgamma(y(j) + 1.0);
    }
    const Vector d = x - mu;
    acc -= 0.5 * d.dot(theta * d);
    return acc;
  }

  Vector gradient(const Vector& x) const {
    Vector g = y;
    for (Eigen::Index j = 0; j < y.size(); ++j)
      g(j) -= l * std::exp(x(j));
    g -= theta * (x - mu);
    return g;
  }

  Matrix neg_hessian(const Vector& x) const {
    Matrix h = theta;
    for (Eigen::Index j = 0; j < y.size(); ++j)
      h(j, j) += l * std::exp(x(j));
    return h;
  }
};

Vector laplace_mode(const Integrand& f) {
  const Eigen::Index p = f.y.size();
  Vector x(p);
  for (Eigen::Index j = 0; j < p; ++j)
    x(j) = std::log((f.y(j) + 0.5) / f.l);
  double fx = f.log_value(x);
  for (int it = 0; it < 200; ++it) {
    const Vector grad = f.gradient(x);
    if (grad.cwiseAbs().maxCoeff() < 1e-11) return x;
    const Matrix h = f.neg_hessian(x);
    Vector step = Eigen::LLT<Matrix>(h).solve(grad);
    double t = 1.0;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector cand = x + t * step;
      const double fc = f.log_value(cand);
      if (fc >= fx) {
        x = cand;
        fx = fc;
        break;
      }
      t *= 0.5;
      if (bt == 59)
        throw numerical_error("loglik_oracle: Laplace mode search stalled");
    }
  }
  if (f.gradient(x).cwiseAbs().maxCoeff() > 1e-6)
    throw numerical_error("loglik_oracle: Laplace mode did not converge");
  return x;
}

// log of the mode-centered Gauss-Hermite estimate of int exp(log_value(x)) dx.
double log_integral_gh(const Integrand& f, int nodes) {
  const Eigen::Index p = f.y.size();
  const Vector mode = laplace_mode(f);
  const Matrix h = f.neg_hessian(mode);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success)
    throw numerical_error("loglik_oracle: indefinite curvature at mode");
  const Matrix lmat = llt.matrixL();

  Vector t_nodes, t_weights;
  detail::gauss_hermite(nodes, t_nodes, t_weights);

  double log_jacobian = 0.5 * p * std::log(2.0);
  for (Eigen::Index j = 0; j < p; ++j)
    log_jacobian -= std::log(lmat(j, j));

  std::vector<double> terms;
  if (p == 1) {
    terms.reserve(nodes);
    for (int k = 0; k < nodes; ++k) {
      Vector t(1);
      t(0) = t_nodes(k);
      const Vector x = mode + std::sqrt(2.0) *
                                  llt.matrixU().solve(t);  // L^{-T} t
      terms.push_back(std::log(t_weights(k)) + t_nodes(k) * t_nodes(k) +
                      f.log_value(x));
    }
  } else {
    terms.reserve(static_cast<std::size_t>(nodes) * nodes);
    for (int k1 = 0; k1 < nodes; ++k1) {
      for (int k2 = 0; k2 < nodes; ++k2) {
        Vector t(2);
        t << t_nodes(k1), t_nodes(k2);
        const Vector x = mode + std::sqrt(2.0) * llt.matrixU().solve(t);
        terms.push_back(std::log(t_weights(k1)) + std::log(t_weights(k2)) +
                        t.squaredNorm() + f.log_value(x));
      }
    }
  }
  return log_jacobian + logsumexp(terms);
}

// Refines the node count until two successive estimates agree to 1e-7.
double log_integral_adaptive(const Integrand& f, int nodes) {
  double prev = log_integral_gh(f, nodes);
  for (int round = 0; round < 3; ++round) {
    const int finer = nodes + (nodes >> 1);
    const double next = log_integral_gh(f, finer);
    if (std::abs(next - prev) <= 1e-7) return next;
    prev = next;
    nodes = finer;
  }
  const double final_check = log_integral_gh(f, nodes + (nodes >> 1));
  if (std::abs(final_check - prev) > 1e-6)
    throw numerical_error(
        "loglik_oracle: quadrature did not converge (last delta " +
        std::to_string(std::abs(final_check - prev)) + ")");
  return final_check;
}

}  // namespace

double loglik_oracle(const CountDataset& data, const MixtureParams& params,
                     int quad_nodes) {
  data.validate();
  params.validate();
  const Eigen::Index p = data.counts.cols();
  if (p > 2)
    throw unsupported_error("loglik_oracle: only p <= 2 is supported");
  if (quad_nodes < 50)
    throw input_error("loglik_oracle: need at least 50 quadrature nodes");
  if (params.n_features() != p)
    throw input_error("loglik_oracle: parameter dimension mismatch");

  const int G = params.n_components();
  std::vector<double> log_dets(G);
  for (int g = 0; g < G; ++g) {
    Eigen::LLT<Matrix> llt(params.precisions[g]);
    const Matrix lmat = llt.matrixL();
    double ld = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) ld += 2.0 * std::log(lmat(j, j));
    log_dets[g] = ld;
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < data.counts.rows(); ++i) {
    const Vector y = data.counts.row(i).transpose();
    const double l = data.scaling(i);
    std::vector<double> log_terms(G);
    for (int g = 0; g < G; ++g) {
      Integrand f{y,       std::log(l), l, params.means[g],
                  params.precisions[g], log_dets[g]};
      log_terms[g] =
          std::log(params.proportions(g)) + log_integral_adaptive(f, quad_nodes);
    }
    total += logsumexp(log_terms);
  }
  return total;
}

}  // namespace mplnet
