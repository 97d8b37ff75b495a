#pragma once

#include <cstdint>
#include <string>

#include "mplnet/types.hpp"

namespace mplnet {

enum class GraphKind { random, hub, blocked, scale_free };
enum class DropoutLevel { low, high };
enum class MixingLevel { low, middle, high };

GraphKind parse_graph_kind(const std::string& s);
std::string to_string(GraphKind k);
std::string to_string(DropoutLevel d);
std::string to_string(MixingLevel m);

/// ARI band targeted by each mixing level: (0.9, 1], (0.75, 0.85],
/// (0.65, 0.75].
std::pair<double, double> ari_band(MixingLevel level);

/// Mean-entry values (v1, v2, v3, v4) for the dropout level:
/// (2.4, -0.1, 0.9, -0.1) low, (1.4, -1.1, -0.1, -1.1) high.
Eigen::Vector4d dropout_values(DropoutLevel level);

struct SimConfig {
  int populations = 3;                      // G
  Vector proportions;                       // default uniform
  int n = 3000;
  int p = 100;
  GraphKind graph_kind = GraphKind::random;
  DropoutLevel dropout_level = DropoutLevel::low;
  MixingLevel mixing_level = MixingLevel::low;
  double edge_magnitude = 0.3;
  std::uint64_t seed = 0;
  int n_threads = 0;

  Vector resolved_proportions() const;
  void validate() const;
};

struct SyntheticDataset {
  CountDataset dataset;
  std::vector<Matrix> true_precisions;
  double achieved_ari = 0.0;
  int p_d_used = 0;
};

/// Precision matrix for one of the four graph families: edges per the
/// family's connection rule, nonzero off-diagonals +-edge_magnitude with
/// random signs, diagonal 1 + c with c = max(0, 0.1 - lambda_min) + 0.01
/// so the smallest eigenvalue stays >= 0.1.
Matrix gen_graph(GraphKind kind, int p, std::uint64_t seed,
                 double edge_magnitude = 0.3);

/// Adjusted Rand index between two labelings.
double ari(const IntVector& labels_a, const IntVector& labels_b);

/// Searches the number of discriminative mean coordinates p_d (5-seed
/// average per candidate) until the K-means-vs-truth ARI on the normalized
/// data lands in the mixing level's band. Returns (p_d, achieved mean ARI).
/// Throws numerical_error with the closest achieved value when the band is
/// unreachable within 50 candidates.
std::pair<int, double> calibrate_mixing(const SimConfig& config);

/// Full benchmark dataset: G graph-family precisions, mean vectors with p_d
/// discriminative coordinates, log-normal scaling factors, MPLN counts, and
/// the dataset's own K-means ARI (kept inside the mixing band).
SyntheticDataset gen_dataset(const SimConfig& config);

/// As gen_dataset but with an explicit p_d (no calibration).
SyntheticDataset gen_dataset_with_pd(const SimConfig& config, int p_d);

}  // namespace mplnet
