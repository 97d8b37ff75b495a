#include "mplnet/types.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <cmath>
#include <cstdio>

namespace mplnet {

namespace {
void default_warning(const std::string& msg) {
  std::fprintf(stderr, "[mplnet] warning: %s\n", msg.c_str());
}
std::atomic<warning_handler> g_warning_handler{&default_warning};
}  // namespace

void set_warning_handler(warning_handler h) {
  g_warning_handler.store(h ? h : &default_warning);
}

void warn(const std::string& msg) { g_warning_handler.load()(msg); }

void CountDataset::validate() const {
  const Eigen::Index n = counts.rows();
  const Eigen::Index p = counts.cols();
  if (n == 0 || p == 0) throw input_error("dataset: empty count matrix");
  if (scaling.size() != n)
    throw input_error("dataset: scaling length != number of samples");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(scaling(i) > 0.0) || !std::isfinite(scaling(i)))
      throw input_error("dataset: scaling factors must be positive and finite");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double y = counts(i, j);
      if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y))
        throw input_error("dataset: counts must be non-negative integers");
    }
  }
  if (!feature_names.empty() &&
      static_cast<Eigen::Index>(feature_names.size()) != p)
    throw input_error("dataset: feature_names length != number of features");
  if (true_labels && true_labels->size() != n)
    throw input_error("dataset: true_labels length != number of samples");
  if (latent && (latent->rows() != n || latent->cols() != p))
    throw input_error("dataset: latent matrix dimensions mismatch");
}

void MixtureParams::validate() const {
  const int G = n_components();
  if (G < 1) throw parameter_error("params: need at least one component");
  double sum = 0.0;
  for (int g = 0; g < G; ++g) {
    if (!(proportions(g) > 0.0))
      throw parameter_error("params: proportions must be strictly positive");
    sum += proportions(g);
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw parameter_error("params: proportions must sum to 1");
  if (static_cast<int>(means.size()) != G ||
      static_cast<int>(precisions.size()) != G)
    throw parameter_error("params: means/precisions count != G");
  const Eigen::Index p = means.front().size();
  for (int g = 0; g < G; ++g) {
    if (means[g].size() != p)
      throw parameter_error("params: inconsistent mean dimensions");
    const Matrix& theta = precisions[g];
    if (theta.rows() != p || theta.cols() != p)
      throw parameter_error("params: inconsistent precision dimensions");
    if (!detail::is_symmetric(theta))
      throw parameter_error("params: precision matrix not symmetric");
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() != Eigen::Success)
      throw parameter_error("params: precision matrix not positive definite");
  }
}

void MomentIndex::validate() const {
  if (orders.size() == 0) throw input_error("moment index: empty");
  for (Eigen::Index j = 0; j < orders.size(); ++j) {
    if (orders(j) < 0)
      throw input_error("moment index: orders must be non-negative");
  }
}

std::vector<std::string> default_feature_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j)
    names.push_back("gene_" + std::to_string(j + 1));
  return names;
}

namespace detail {
bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}
}  // namespace detail

}  // namespace mplnet
