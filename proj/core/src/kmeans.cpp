#include "mplnet/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "mplnet/rng.hpp"

namespace mplnet {

namespace {

// Squared distances from every point to every center via the expansion
// ||x||^2 - 2 x'c + ||c||^2; one GEMM instead of an n*k loop.
Matrix squared_distances(const Matrix& points, const Matrix& centers,
                         const Vector& point_sq) {
  Matrix d = -2.0 * (points * centers.transpose());
  d.colwise() += point_sq;
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

struct Run {
  IntVector labels;
  Matrix centers;
  double inertia = std::numeric_limits<double>::infinity();
  bool ok = false;
};

Run run_once(const Matrix& points, int k, std::mt19937_64& eng, int max_iter,
             const Vector& point_sq) {
  const Eigen::Index n = points.rows();
  const Eigen::Index p = points.cols();
  Run run;
  run.centers.resize(k, p);

  // k-means++ seeding.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  run.centers.row(0) = points.row(pick(eng));
  Vector d2 =
      (points.rowwise() - run.centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (!(total > 0.0)) return run;  // fewer than k distinct rows
    double u = unif(eng) * total;
    Eigen::Index chosen = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      u -= d2(i);
      if (u <= 0.0) {
        chosen = i;
        break;
      }
    }
    run.centers.row(c) = points.row(chosen);
    d2 = d2.cwiseMin(
        (points.rowwise() - run.centers.row(c)).rowwise().squaredNorm());
  }

  run.labels.resize(n);
  run.labels.setConstant(-1);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix d = squared_distances(points, run.centers, point_sq);
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      d.row(i).minCoeff(&best);
      if (run.labels(i) != static_cast<int>(best)) {
        run.labels(i) = static_cast<int>(best);
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, p);
    IntVector counts = IntVector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.labels(i)) += points.row(i);
      counts(run.labels(i)) += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) == 0) {
        // Reseed an empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        d.rowwise().minCoeff().maxCoeff(&far);
        if (d(far, run.labels(far)) <= 0.0) return run;  // nothing to split
        run.centers.row(c) = points.row(far);
        changed = true;
      } else {
        run.centers.row(c) = sums.row(c) / counts(c);
      }
    }
    if (!changed) break;
  }

  const Matrix d = squared_distances(points, run.centers, point_sq);
  run.inertia = 0.0;
  IntVector counts = IntVector::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best;
    run.inertia += d.row(i).minCoeff(&best);
    run.labels(i) = static_cast<int>(best);
    counts(best) += 1;
  }
  if (counts.minCoeff() == 0) return run;
  run.ok = true;
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    int restarts, int max_iter) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw input_error("kmeans: k must be >= 1");
  if (k > n) throw input_error("kmeans: k exceeds the number of points");
  if (restarts < 1) throw input_error("kmeans: need at least one restart");

  const Vector point_sq = points.rowwise().squaredNorm();
  Run best;
  for (int r = 0; r < restarts; ++r) {
    auto eng = make_engine(seed, rng_stream::kmeans, static_cast<std::uint64_t>(r));
    const Run run = run_once(points, k, eng, max_iter, point_sq);
    if (run.ok && run.inertia < best.inertia) best = run;
  }
  if (!best.ok)
    throw numerical_error(
        "kmeans: empty cluster in every restart (k = " + std::to_string(k) +
        " may exceed the number of distinct rows)");
  return {best.labels, best.centers, best.inertia};
}

}  // namespace mplnet
