#pragma once

#include <vector>

#include "pcar/tensor.hpp"

namespace pcar {

// Greedy max-min farthest point sampling. Each selected index maximizes the
// minimum squared distance to the already-selected set; ties break to the
// lowest index, so the result is deterministic. A prefix of the result is
// itself a valid FPS run for a smaller m with the same start.
template <typename Real>
std::vector<Index> farthest_point_sample(const Tensor2<Real>& coords, Index m,
                                         Index start);

// Index of the lexicographically smallest coordinate row. Used as a
// permutation-independent FPS start point.
template <typename Real>
Index lowest_coord_index(const Tensor2<Real>& coords);

// k nearest reference points per query, row-major n_query x k. Neighbors are
// ordered by ascending squared distance with ties broken by lowest index.
template <typename Real>
struct KnnResult {
  Index k = 0;
  std::vector<Index> indices;
  std::vector<Real> sq_dists;

  Index neighbor(Index query, Index j) const {
    return indices[static_cast<std::size_t>(query * k + j)];
  }
  Real sq_dist(Index query, Index j) const {
    return sq_dists[static_cast<std::size_t>(query * k + j)];
  }
};

template <typename Real>
KnnResult<Real> knn(const Tensor2<Real>& query_coords,
                    const Tensor2<Real>& ref_coords, Index k);

// Inverse-squared-distance interpolation weights from a coarse cloud up to
// fine positions. Each fine point draws from its K nearest coarse points with
// weights 1/d^2 normalized to sum 1; when a coarse point (numerically)
// coincides with the fine point (d^2 < 1e-12) the plan copies that coarse
// row exactly. Weight arithmetic runs in double regardless of Real.
template <typename Real>
struct InterpolationPlan {
  Index fine_count = 0;
  Index coarse_count = 0;
  Index k = 0;
  std::vector<Index> neighbors;  // fine_count * k, row-major
  Tensor2<Real> weights;         // fine_count x k, each row sums to 1

  Index neighbor(Index fine, Index j) const {
    return neighbors[static_cast<std::size_t>(fine * k + j)];
  }
};

template <typename Real>
InterpolationPlan<Real> build_interpolation_plan(
    const Tensor2<Real>& coarse_coords, const Tensor2<Real>& fine_coords,
    Index k = 3);

// Apply a plan: out.row(i) = sum_j weights(i,j) * coarse.row(neighbor(i,j)).
template <typename Real>
Tensor2<Real> interpolate_up(const Tensor2<Real>& coarse_features,
                             const InterpolationPlan<Real>& plan);

// The plan as a dense fine_count x coarse_count matrix M with
// M * coarse_features == interpolate_up(coarse_features, plan).
template <typename Real>
Tensor2<Real> plan_matrix(const InterpolationPlan<Real>& plan);

}  // namespace pcar
