#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "mplnet/glasso.hpp"
#include "mplnet/types.hpp"

namespace mplnet {

using EdgePair = std::pair<int, int>;  // l < m
using EdgeSet = std::set<EdgePair>;

struct EdgeScore {
  int l = 0;
  int m = 0;
  double score = 0.0;
};

/// Scores for every pair l < m; zero entries are recorded as unconnected.
struct EdgeScoreList {
  std::vector<EdgeScore> entries;
  double density = 0.0;  // fraction of nonzero scores among p(p-1)/2

  /// Edge set of the `count` highest-scoring pairs (score descending,
  /// pair order as tiebreak).
  EdgeSet top_edges(std::size_t count) const;
  EdgeSet nonzero_edges() const;
};

struct EvalReport {
  double pauprc = 0.0;
  double pauprc_ratio = 0.0;
  double ari = 0.0;
  double stability_jaccard = 0.0;
  double density = 0.0;
};

/// score(l, m) = |-Theta_lm / sqrt(Theta_ll Theta_mm)|, the absolute
/// partial correlation.
EdgeScoreList edge_scores(const Matrix& precision);

/// Area under the partial precision-recall curve over the achieved recall
/// span, and its ratio to the random-predictor baseline d0 * span with
/// d0 = |truth| / C(p,2). Thresholds are the distinct positive scores.
std::pair<double, double> pauprc_ratio(const EdgeScoreList& scores,
                                       const EdgeSet& truth);

/// One stability replicate: per-component edge scores plus the
/// responsibilities of the subsampled rows (for component matching).
struct StabilityFit {
  std::vector<EdgeScoreList> component_scores;
  Matrix responsibilities;  // n_sub x G
};
using StabilityProcedure =
    std::function<StabilityFit(const CountDataset& subsample)>;

/// Median pairwise Jaccard index of the density-thresholded edge sets over
/// `reps` row-subsamples, averaged over components after best-match
/// relabeling by responsibility overlap on the shared rows.
double jaccard_stability(const CountDataset& data,
                         const StabilityProcedure& fit_procedure,
                         double downsample_frac, int reps,
                         double density_target, std::uint64_t seed);

struct TwoStepResult {
  std::vector<GlassoSolution> networks;
  std::vector<double> lambda;  // per cluster
  IntVector labels;
};

/// K-means + per-cluster glasso baseline. When density_target > 0 each
/// cluster's lambda is bisected to reach it; otherwise `lambda` is used.
TwoStepResult two_step_baseline(const CountDataset& data, int G, double lambda,
                                double density_target, std::uint64_t seed = 0,
                                int kmeans_restarts = 10);

/// Best component permutation (maximum total overlap) between two
/// responsibility matrices evaluated on paired rows; brute force over
/// permutations (G <= 10).
std::vector<int> match_components(const Matrix& resp_a, const Matrix& resp_b);

}  // namespace mplnet
