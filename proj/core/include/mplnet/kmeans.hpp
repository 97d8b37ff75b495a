#pragma once

#include <cstdint>

#include "mplnet/types.hpp"

namespace mplnet {

struct KMeansResult {
  IntVector labels;
  Matrix centers;  // k x p
  double inertia = 0.0;
};

/// Lloyd iterations with k-means++ seeding; best of `restarts` by inertia.
/// Deterministic for a given seed. Throws numerical_error when no restart
/// can keep k non-empty clusters (e.g. fewer distinct rows than k).
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    int restarts = 10, int max_iter = 100);

}  // namespace mplnet
