#pragma once

#include <cstdint>
#include <set>
#include <utility>

#include "mplnet/types.hpp"

namespace mplnet {

/// Unordered feature pairs whose precision entries are pinned to zero.
struct ZeroEdgeSet {
  std::set<std::pair<int, int>> pairs;  // stored with first < second

  void add(int l, int m);
  bool contains(int l, int m) const;
  bool empty() const { return pairs.empty(); }
  void validate(Eigen::Index p) const;
};

struct GlassoSolution {
  Matrix precision;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// -log det(Theta)/2 + tr(Theta Sigma)/2 + lambda sum_{l != m} |Theta_lm|.
/// Both orders of each off-diagonal pair count, matching the l1,off norm.
double glasso_objective(const Matrix& precision, const Matrix& cov,
                        double lambda_eff);

/// Solves  min -log det(Theta)/2 + tr(Theta Sigma)/2 + lambda ||Theta||_1,off
/// over positive definite Theta with E_p entries fixed at zero, by blockwise
/// coordinate descent; constrained coordinates are excluded from the sweep,
/// never zeroed after the fact. KKT residual is measured on the free
/// off-diagonal coordinates with the factor-2 subgradient (both orders of a
/// pair are penalized):  |Sigma - Theta^{-1} + 2 lambda sign(Theta)|_inf.
/// A warm start reuses the previous precision; the converged objective never
/// exceeds the warm start's.
GlassoSolution glasso_fit(const Matrix& cov, double lambda_eff,
                          const ZeroEdgeSet& zeros = {}, double tol = 1e-7,
                          const Matrix* warm_start = nullptr,
                          int max_sweeps = 500);

/// Fraction of nonzero off-diagonal pairs among p(p-1)/2.
double offdiag_density(const Matrix& precision);

}  // namespace mplnet
