#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mplnet/errors.hpp"

namespace mplnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Observed count matrix Y (n x p) with per-sample scaling factors l_i.
/// Synthetic datasets also carry the true labels and the latent normals.
struct CountDataset {
  Matrix counts;                           // non-negative integers stored as doubles
  Vector scaling;                          // l_i > 0
  std::vector<std::string> feature_names;  // length p
  std::optional<IntVector> true_labels;    // Z_i in [0, G)
  std::optional<Matrix> latent;            // X (n x p)

  Eigen::Index n_samples() const { return counts.rows(); }
  Eigen::Index n_features() const { return counts.cols(); }

  /// Throws input_error on any invariant violation.
  void validate() const;
};

/// Mixture parameters theta = (pi, {mu_g}, {Theta_g}).
struct MixtureParams {
  Vector proportions;             // simplex, length G
  std::vector<Vector> means;      // G vectors of length p
  std::vector<Matrix> precisions; // G symmetric positive definite p x p

  int n_components() const { return static_cast<int>(proportions.size()); }
  Eigen::Index n_features() const {
    return means.empty() ? 0 : means.front().size();
  }

  /// Throws parameter_error on any invariant violation (PD checked by
  /// attempting a Cholesky factorization).
  void validate() const;
};

/// Multi-index N = (n_1, ..., n_p) for factorial moments.
struct MomentIndex {
  IntVector orders;

  void validate() const;
};

/// Default feature names gene_1 ... gene_p.
std::vector<std::string> default_feature_names(Eigen::Index p);

namespace detail {
bool is_symmetric(const Matrix& m, double tol = 1e-10);
}  // namespace detail

}  // namespace mplnet
