#include "mplnet/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mplnet/kmeans.hpp"
#include "mplnet/parallel.hpp"
#include "mplnet/pln.hpp"

namespace mplnet {

namespace {
std::atomic<int> g_default_threads{0};
}

int default_thread_count() {
  const int set = g_default_threads.load();
  if (set > 0) return set;
  if (const char* env = std::getenv("MPLNET_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_default_thread_count(int n) { g_default_threads.store(n); }

void FitConfig::validate() const {
  if (components < 1) throw input_error("config: components must be >= 1");
  if (!(lambda >= 0.0)) throw input_error("config: lambda must be >= 0");
  if (!lambda_per_component.empty()) {
    if (static_cast<int>(lambda_per_component.size()) != components)
      throw input_error("config: lambda_per_component length != G");
    for (double l : lambda_per_component)
      if (!(l >= 0.0)) throw input_error("config: lambda must be >= 0");
  }
  if (!(tol_elbo > 0.0) || !(tol_sign > 0.0) || !(glasso_tol > 0.0))
    throw input_error("config: tolerances must be positive");
  if (min_outer < 1 || max_outer < min_outer)
    throw input_error("config: need max_outer >= min_outer >= 1");
  if (!(admm.rho > 0.0)) throw input_error("config: rho must be positive");
}

Vector resolve_scaling(const CountDataset& data) {
  if (data.scaling.size() == data.counts.rows()) return data.scaling;
  return data.counts.rowwise().sum() / 1e4;
}

Matrix normalize_counts(const CountDataset& data) {
  const Vector l = resolve_scaling(data);
  Matrix out = (data.counts.array() + 1.0).log();
  out.colwise() -= l.array().log().matrix();
  return out;
}

namespace {

struct ClusterInit {
  IntVector labels;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<int> sizes;
};

ClusterInit cluster_statistics(const Matrix& normalized, int G,
                               std::uint64_t seed, int restarts) {
  ClusterInit init;
  try {
    init.labels = kmeans(normalized, G, seed, restarts).labels;
  } catch (const numerical_error& e) {
    throw numerical_error(std::string(e.what()) +
                          "; initialization failed, consider a smaller G");
  }
  const Eigen::Index p = normalized.cols();
  init.means.assign(G, Vector::Zero(p));
  init.covariances.assign(G, Matrix::Zero(p, p));
  init.sizes.assign(G, 0);
  for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
    const int g = init.labels(i);
    init.means[g] += normalized.row(i).transpose();
    init.sizes[g] += 1;
  }
  for (int g = 0; g < G; ++g) {
    if (init.sizes[g] == 0)
      throw numerical_error("initialize: empty cluster, consider a smaller G");
    init.means[g] /= init.sizes[g];
  }
  for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
    const int g = init.labels(i);
    const Vector d = normalized.row(i).transpose() - init.means[g];
    init.covariances[g] += d * d.transpose();
  }
  for (int g = 0; g < G; ++g) {
    init.covariances[g] /= init.sizes[g];
    // Singleton or duplicate-row clusters give rank-deficient covariances.
    if (!(init.covariances[g].diagonal().minCoeff() > 0.0))
      init.covariances[g].diagonal().array() += 1e-8;
  }
  return init;
}

double l1_offdiag(const Matrix& m) {
  return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
}

// Sign pattern of the strict upper triangle, for the delta_s statistic.
std::vector<signed char> sign_pattern(const Matrix& m) {
  const Eigen::Index p = m.rows();
  std::vector<signed char> s;
  s.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
  for (Eigen::Index l = 0; l < p; ++l)
    for (Eigen::Index j = l + 1; j < p; ++j)
      s.push_back(m(l, j) > 0.0 ? 1 : (m(l, j) < 0.0 ? -1 : 0));
  return s;
}

double sign_delta(const std::vector<std::vector<signed char>>& prev,
                  const std::vector<std::vector<signed char>>& next,
                  Eigen::Index p) {
  if (p < 2) return 0.0;
  const double pairs = 0.5 * static_cast<double>(p) *
                       static_cast<double>(p - 1);
  double worst = 0.0;
  for (std::size_t g = 0; g < prev.size(); ++g) {
    double acc = 0.0;
    for (std::size_t k = 0; k < prev[g].size(); ++k)
      acc += std::abs(static_cast<int>(next[g][k]) -
                      static_cast<int>(prev[g][k]));
    worst = std::max(worst, acc / pairs);
  }
  return worst;
}

void sort_components_by_proportion(MixtureParams& params,
                                   VariationalState& state) {
  const int G = params.n_components();
  std::vector<int> order(G);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return params.proportions(a) > params.proportions(b);
  });
  if (std::is_sorted(order.begin(), order.end())) return;

  Vector pi(G);
  std::vector<Vector> means(G);
  std::vector<Matrix> precisions(G), vm(G), vv(G);
  Matrix resp(state.responsibilities.rows(), G);
  for (int g = 0; g < G; ++g) {
    pi(g) = params.proportions(order[g]);
    means[g] = std::move(params.means[order[g]]);
    precisions[g] = std::move(params.precisions[order[g]]);
    vm[g] = std::move(state.var_means[order[g]]);
    vv[g] = std::move(state.var_variances[order[g]]);
    resp.col(g) = state.responsibilities.col(order[g]);
  }
  params.proportions = pi;
  params.means = std::move(means);
  params.precisions = std::move(precisions);
  state.var_means = std::move(vm);
  state.var_variances = std::move(vv);
  state.responsibilities = std::move(resp);
}

FitResult fit_core(const CountDataset& data_in, const FitConfig& config,
                   MixtureParams params, VariationalState state) {
  CountDataset data = data_in;
  data.scaling = resolve_scaling(data_in);
  data.validate();
  const Eigen::Index n = data.counts.rows();
  const Eigen::Index p = data.counts.cols();
  const int G = config.components;
  const Vector row_constants = log_count_constants(data);

  FitResult result;
  result.scaling_used = data.scaling;

  std::vector<AdmmWorkspace> workspaces;
  workspaces.reserve(G);
  for (int g = 0; g < G; ++g)
    workspaces.emplace_back(config.admm.rho, config.admm.max_iter,
                            config.admm.tol);

  ElboBreakdown breakdown = elbo(data, params, state, &row_constants);
  double elbo_prev = breakdown.total;
  std::vector<std::vector<signed char>> signs_prev(G);
  for (int g = 0; g < G; ++g) signs_prev[g] = sign_pattern(params.precisions[g]);

  result.status = FitStatus::max_iter;
  bool degenerate = false;
  int k = 0;
  while (k < config.max_outer) {
    ++k;

    // P-step.
    state.responsibilities =
        p_step(data, params, state, config.p_step_mode, config.n_threads);
    for (int g = 0; g < G; ++g) {
      if (state.responsibilities.col(g).sum() <= kResponsibilityFloor) {
        warn("fit: component " + std::to_string(g) +
             " lost responsibility mass at iteration " + std::to_string(k));
        degenerate = true;
      }
    }
    if (degenerate) break;

    // pi-step.
    params.proportions = pi_step(state);

    // M-step: one factorization per component, rows in parallel.
    std::atomic<long> unconverged{0};
    for (int g = 0; g < G; ++g) {
      workspaces[g].prepare(params.precisions[g], params.means[g]);
      Matrix& m = state.var_means[g];
      const Matrix& s = state.var_variances[g];
      parallel_for(
          0, static_cast<std::size_t>(n),
          [&](std::size_t i) {
            const auto idx = static_cast<Eigen::Index>(i);
            AdmmRowResult row = m_row_update(
                data.counts.row(idx).transpose(), data.scaling(idx),
                s.row(idx).transpose(), m.row(idx).transpose(), workspaces[g]);
            m.row(idx) = row.m.transpose();
            if (!row.converged) unconverged.fetch_add(1);
          },
          config.n_threads);
    }
    if (unconverged.load() > 0)
      warn("fit: " + std::to_string(unconverged.load()) +
           " ADMM row updates stopped before full convergence at iteration " +
           std::to_string(k));

    // S-step.
    s_step(data, params, state, config.n_threads);

    // mu-step.
    params.means = mu_step(state);

    // Theta-step: G independent glasso problems, warm-started.
    for (int g = 0; g < G; ++g) {
      const double mass = state.responsibilities.col(g).sum();
      const Matrix cov = weighted_covariance(state, params.means[g], g);
      const double lambda_eff =
          config.lambda_for(g) * static_cast<double>(n) / mass;
      const Matrix warm = params.precisions[g];
      GlassoSolution sol = glasso_fit(cov, lambda_eff, config.zero_edges,
                                      config.glasso_tol, &warm);
      params.precisions[g] = sol.precision;
    }

    // Evaluation.
    breakdown = elbo(data, params, state, &row_constants);
    std::vector<std::vector<signed char>> signs(G);
    for (int g = 0; g < G; ++g) signs[g] = sign_pattern(params.precisions[g]);
    const double delta_sign = sign_delta(signs_prev, signs, p);
    const double delta_elbo =
        std::abs(breakdown.total - elbo_prev) /
        std::max(std::abs(elbo_prev), 1e-300);
    double penalty = 0.0;
    for (int g = 0; g < G; ++g)
      penalty += config.lambda_for(g) * l1_offdiag(params.precisions[g]);
    result.trace.push_back({k, breakdown.total,
                            -breakdown.total + static_cast<double>(n) * penalty,
                            delta_elbo, delta_sign});
    elbo_prev = breakdown.total;
    signs_prev = std::move(signs);

    if (k >= config.min_outer && delta_elbo <= config.tol_elbo &&
        delta_sign <= config.tol_sign) {
      result.status = FitStatus::converged;
      break;
    }
  }

  if (degenerate) result.status = FitStatus::degenerate;
  result.outer_iterations = k;
  for (int g = 0; g < G; ++g)
    result.admm_factorizations += workspaces[g].factorization_count();

  sort_components_by_proportion(params, state);
  result.final_elbo = elbo(data, params, state, &row_constants);
  result.params = std::move(params);
  result.state = std::move(state);
  return result;
}

}  // namespace

std::pair<MixtureParams, VariationalState> initialize(const CountDataset& data,
                                                      const FitConfig& config) {
  config.validate();
  CountDataset work = data;
  work.scaling = resolve_scaling(data);
  work.validate();
  const Eigen::Index n = work.counts.rows();
  const Eigen::Index p = work.counts.cols();
  const int G = config.components;
  if (G > n) throw input_error("initialize: more components than samples");

  const Matrix normalized = normalize_counts(work);
  const ClusterInit clusters =
      cluster_statistics(normalized, G, config.seed, config.kmeans_restarts);

  MixtureParams params;
  params.proportions.resize(G);
  params.means.resize(G);
  params.precisions.resize(G);

  VariationalState state;
  state.var_means.assign(G, normalized);
  state.var_variances.assign(G, Matrix::Ones(n, p));
  state.responsibilities.resize(n, G);

  const double smooth = 1e-6;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int g = 0; g < G; ++g)
      state.responsibilities(i, g) =
          ((clusters.labels(i) == g ? 1.0 : 0.0) + smooth) /
          (1.0 + G * smooth);
  }

  for (int g = 0; g < G; ++g) {
    params.proportions(g) =
        static_cast<double>(clusters.sizes[g]) / static_cast<double>(n);
    params.means[g] = clusters.means[g];
    const double lambda_eff = config.lambda_for(g) * static_cast<double>(n) /
                              static_cast<double>(clusters.sizes[g]);
    params.precisions[g] = glasso_fit(clusters.covariances[g], lambda_eff,
                                      config.zero_edges, config.glasso_tol)
                               .precision;
  }
  // K-means can leave empty-adjacent proportions badly scaled; normalize.
  params.proportions /= params.proportions.sum();
  return {params, state};
}

FitResult fit(const CountDataset& data, const FitConfig& config) {
  auto [params, state] = initialize(data, config);
  return fit_core(data, config, std::move(params), std::move(state));
}

FitResult fit_from(const CountDataset& data, const FitConfig& config,
                   const MixtureParams& params0,
                   const VariationalState& state0) {
  config.validate();
  return fit_core(data, config, params0, state0);
}

double icl_score(const FitResult& fit_result, int g,
                 bool count_offdiag_pairs_only) {
  const Matrix& theta = fit_result.params.precisions.at(g);
  const double mass = fit_result.state.responsibilities.col(g).sum();
  if (!(mass > 0.0))
    throw degenerate_error("icl_score: component has no responsibility mass");
  long s = 0;
  if (count_offdiag_pairs_only) {
    for (Eigen::Index l = 0; l < theta.rows(); ++l)
      for (Eigen::Index m = l + 1; m < theta.cols(); ++m)
        if (theta(l, m) != 0.0) ++s;
  } else {
    for (Eigen::Index l = 0; l < theta.rows(); ++l)
      for (Eigen::Index m = 0; m < theta.cols(); ++m)
        if (theta(l, m) != 0.0) ++s;
  }
  return -2.0 * fit_result.final_elbo.per_component(g) +
         std::log(mass) * static_cast<double>(s);
}

std::vector<double> default_lambda_grid(const CountDataset& data,
                                        const FitConfig& config, int size) {
  CountDataset work = data;
  work.scaling = resolve_scaling(data);
  const Matrix normalized = normalize_counts(work);
  const ClusterInit clusters = cluster_statistics(
      normalized, config.components, config.seed, config.kmeans_restarts);
  double scale = 0.0;
  for (const Matrix& cov : clusters.covariances) {
    Matrix off = cov;
    off.diagonal().setZero();
    scale = std::max(scale, off.cwiseAbs().maxCoeff());
  }
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<double> grid(size);
  const double lo = std::log(1e-3 * scale);
  const double hi = std::log(scale);
  for (int i = 0; i < size; ++i) {
    const double t = size == 1 ? 1.0 : static_cast<double>(i) / (size - 1);
    grid[i] = std::exp(lo + t * (hi - lo));
  }
  return grid;
}

LambdaSelection select_lambda_icl(const CountDataset& data,
                                  const FitConfig& config,
                                  const std::vector<double>& grid_in) {
  if (grid_in.empty()) throw input_error("select_lambda_icl: empty grid");
  std::vector<double> grid = grid_in;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const int G = config.components;
  std::vector<double> best_lambda(G, grid.front());
  std::vector<double> best_icl(G, std::numeric_limits<double>::infinity());
  bool any_usable = false;

  FitConfig point_config = config;
  point_config.lambda_per_component.clear();
  std::optional<FitResult> previous;
  for (double lambda : grid) {
    point_config.lambda = lambda;
    FitResult r = previous
                      ? fit_from(data, point_config, previous->params,
                                 previous->state)
                      : fit(data, point_config);
    if (r.status != FitStatus::degenerate) {
      any_usable = true;
      for (int g = 0; g < G; ++g) {
        const double score =
            icl_score(r, g, config.icl_count_offdiag_pairs_only);
        // Ties break toward the larger (sparser) lambda.
        if (score <= best_icl[g]) {
          best_icl[g] = score;
          best_lambda[g] = lambda;
        }
      }
    }
    previous = std::move(r);
  }
  if (!any_usable)
    throw degenerate_error("select_lambda_icl: every grid fit was degenerate");

  FitConfig final_config = config;
  final_config.lambda_per_component = best_lambda;
  LambdaSelection sel;
  sel.lambda = best_lambda;
  sel.fit = fit(data, final_config);
  return sel;
}

LambdaSelection select_lambda_density(const CountDataset& data,
                                      const FitConfig& config,
                                      double target_density, bool per_component,
                                      int max_steps) {
  if (!(target_density > 0.0) || target_density > 1.0)
    throw input_error("select_lambda_density: target must be in (0, 1]");
  const int G = config.components;

  FitConfig zero_config = config;
  zero_config.lambda = 0.0;
  zero_config.lambda_per_component.clear();
  FitResult dense_fit = fit(data, zero_config);
  std::vector<double> dense_density(G);
  for (int g = 0; g < G; ++g)
    dense_density[g] = offdiag_density(dense_fit.params.precisions[g]);

  const auto within = [&](double d) {
    return std::abs(d - target_density) <= 0.1 * target_density;
  };

  bool dense_ok = true;
  for (int g = 0; g < G; ++g) dense_ok = dense_ok && within(dense_density[g]);
  if (dense_ok) {
    LambdaSelection sel;
    sel.lambda.assign(G, 0.0);
    sel.fit = std::move(dense_fit);
    return sel;
  }

  // Components whose lambda = 0 density is already below the reachable
  // band cannot be driven up by any penalty.
  bool unreachable = false;
  for (int g = 0; g < G; ++g) {
    if (dense_density[g] < target_density && !within(dense_density[g]))
      unreachable = true;
  }
  if (unreachable) {
    warn("select_lambda_density: target density " +
         std::to_string(target_density) +
         " unreachable even at lambda = 0; returning the unpenalized fit");
    LambdaSelection sel;
    sel.lambda.assign(G, 0.0);
    sel.fit = std::move(dense_fit);
    sel.density_warning = true;
    return sel;
  }

  // Geometric bisection brackets per component (shared when !per_component).
  std::vector<double> grid = default_lambda_grid(data, config, 2);
  const double scale = grid.back();
  std::vector<double> lo(G, scale * 1e-5), hi(G, scale * 10.0);
  std::vector<double> current(G);
  std::vector<bool> frozen(G, false);

  FitConfig step_config = config;
  std::optional<FitResult> previous = std::move(dense_fit);
  LambdaSelection sel;
  for (int step = 0; step < max_steps; ++step) {
    bool all_frozen = true;
    for (int g = 0; g < G; ++g) {
      if (!frozen[g]) {
        current[g] = std::sqrt(lo[g] * hi[g]);
        all_frozen = false;
      }
    }
    if (!per_component) {
      // One shared lambda: drive the mean density to the target.
      double shared = 0.0;
      int active = 0;
      for (int g = 0; g < G; ++g)
        if (!frozen[g]) {
          shared += std::log(current[g]);
          ++active;
        }
      if (active > 0) {
        shared = std::exp(shared / active);
        for (int g = 0; g < G; ++g) current[g] = shared;
      }
    }
    if (all_frozen) break;

    step_config.lambda_per_component = current;
    FitResult r = fit_from(data, step_config, previous->params,
                           previous->state);
    if (per_component) {
      for (int g = 0; g < G; ++g) {
        if (frozen[g]) continue;
        const double d = offdiag_density(r.params.precisions[g]);
        if (within(d)) {
          frozen[g] = true;
        } else if (d > target_density) {
          lo[g] = current[g];
        } else {
          hi[g] = current[g];
        }
      }
    } else {
      double mean_density = 0.0;
      for (int g = 0; g < G; ++g)
        mean_density += offdiag_density(r.params.precisions[g]);
      mean_density /= G;
      if (within(mean_density)) {
        std::fill(frozen.begin(), frozen.end(), true);
      } else if (mean_density > target_density) {
        for (int g = 0; g < G; ++g) lo[g] = current[g];
      } else {
        for (int g = 0; g < G; ++g) hi[g] = current[g];
      }
    }
    previous = std::move(r);
    sel.fit = *previous;
    sel.lambda = current;
    const bool done =
        std::all_of(frozen.begin(), frozen.end(), [](bool b) { return b; });
    if (done) break;
  }
  if (sel.lambda.empty()) {
    sel.lambda = current;
    sel.fit = std::move(*previous);
  }
  return sel;
}

}  // namespace mplnet
