#include "pcar/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pcar {

namespace {

template <typename Real>
double sq_dist(const Tensor2<Real>& a, Index i, const Tensor2<Real>& b,
               Index j) {
  double s = 0.0;
  for (Index c = 0; c < a.cols(); ++c) {
    const double d = static_cast<double>(a(i, c)) - static_cast<double>(b(j, c));
    s += d * d;
  }
  return s;
}

}  // namespace

template <typename Real>
std::vector<Index> farthest_point_sample(const Tensor2<Real>& coords, Index m,
                                         Index start) {
  const Index n = coords.rows();
  if (m < 1 || m > n)
    throw std::invalid_argument("farthest_point_sample: m = " +
                                std::to_string(m) + " outside [1, " +
                                std::to_string(n) + "]");
  if (start < 0 || start >= n)
    throw std::invalid_argument("farthest_point_sample: start out of range");

  std::vector<Index> selected;
  selected.reserve(static_cast<std::size_t>(m));
  std::vector<double> min_sq(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);

  Index current = start;
  selected.push_back(current);
  taken[static_cast<std::size_t>(current)] = 1;
  while (static_cast<Index>(selected.size()) < m) {
    Index best = -1;
    double best_sq = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      auto& dm = min_sq[static_cast<std::size_t>(i)];
      dm = std::min(dm, sq_dist(coords, i, coords, current));
      if (dm > best_sq) {  // strict: ties keep the lowest index
        best_sq = dm;
        best = i;
      }
    }
    current = best;
    selected.push_back(current);
    taken[static_cast<std::size_t>(current)] = 1;
  }
  return selected;
}

template <typename Real>
Index lowest_coord_index(const Tensor2<Real>& coords) {
  if (coords.rows() < 1)
    throw std::invalid_argument("lowest_coord_index: empty input");
  Index best = 0;
  for (Index i = 1; i < coords.rows(); ++i) {
    for (Index c = 0; c < coords.cols(); ++c) {
      if (coords(i, c) < coords(best, c)) {
        best = i;
        break;
      }
      if (coords(i, c) > coords(best, c)) break;
    }
  }
  return best;
}

template <typename Real>
KnnResult<Real> knn(const Tensor2<Real>& query_coords,
                    const Tensor2<Real>& ref_coords, Index k) {
  const Index nq = query_coords.rows();
  const Index nr = ref_coords.rows();
  if (k < 1 || k > nr)
    throw std::invalid_argument("knn: k = " + std::to_string(k) +
                                " outside [1, " + std::to_string(nr) + "]");
  KnnResult<Real> out;
  out.k = k;
  out.indices.resize(static_cast<std::size_t>(nq * k));
  out.sq_dists.resize(static_cast<std::size_t>(nq * k));

  std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(nr));
  for (Index q = 0; q < nq; ++q) {
    for (Index r = 0; r < nr; ++r)
      cand[static_cast<std::size_t>(r)] = {sq_dist(query_coords, q, ref_coords, r), r};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (Index j = 0; j < k; ++j) {
      out.indices[static_cast<std::size_t>(q * k + j)] =
          cand[static_cast<std::size_t>(j)].second;
      out.sq_dists[static_cast<std::size_t>(q * k + j)] =
          static_cast<Real>(cand[static_cast<std::size_t>(j)].first);
    }
  }
  return out;
}

template <typename Real>
InterpolationPlan<Real> build_interpolation_plan(
    const Tensor2<Real>& coarse_coords, const Tensor2<Real>& fine_coords,
    Index k) {
  if (coarse_coords.rows() < k)
    throw std::invalid_argument(
        "build_interpolation_plan: coarse cloud has fewer than K points");
  const auto nn = knn(fine_coords, coarse_coords, k);
  InterpolationPlan<Real> plan;
  plan.fine_count = fine_coords.rows();
  plan.coarse_count = coarse_coords.rows();
  plan.k = k;
  plan.neighbors = nn.indices;
  plan.weights = Tensor2<Real>(plan.fine_count, k);

  constexpr double kCoincident = 1e-12;
  for (Index i = 0; i < plan.fine_count; ++i) {
    // Neighbors are distance-ascending, so a coincident coarse point, if any,
    // sits in slot 0; the plan then copies it exactly.
    if (static_cast<double>(nn.sq_dist(i, 0)) < kCoincident) {
      plan.weights(i, 0) = Real(1);
      continue;
    }
    double sum = 0.0;
    for (Index j = 0; j < k; ++j)
      sum += 1.0 / static_cast<double>(nn.sq_dist(i, j));
    for (Index j = 0; j < k; ++j)
      plan.weights(i, j) = static_cast<Real>(
          (1.0 / static_cast<double>(nn.sq_dist(i, j))) / sum);
  }
  return plan;
}

template <typename Real>
Tensor2<Real> interpolate_up(const Tensor2<Real>& coarse_features,
                             const InterpolationPlan<Real>& plan) {
  if (coarse_features.rows() != plan.coarse_count)
    throw std::invalid_argument(
        "interpolate_up: features have " +
        std::to_string(coarse_features.rows()) + " rows, plan expects " +
        std::to_string(plan.coarse_count));
  Tensor2<Real> out(plan.fine_count, coarse_features.cols());
  for (Index i = 0; i < plan.fine_count; ++i)
    for (Index j = 0; j < plan.k; ++j) {
      const Real w = plan.weights(i, j);
      if (w == Real(0)) continue;
      const Index src = plan.neighbor(i, j);
      for (Index c = 0; c < coarse_features.cols(); ++c)
        out(i, c) += w * coarse_features(src, c);
    }
  return out;
}

template <typename Real>
Tensor2<Real> plan_matrix(const InterpolationPlan<Real>& plan) {
  Tensor2<Real> m(plan.fine_count, plan.coarse_count);
  for (Index i = 0; i < plan.fine_count; ++i)
    for (Index j = 0; j < plan.k; ++j)
      m(i, plan.neighbor(i, j)) += plan.weights(i, j);
  return m;
}

#define PCAR_INSTANTIATE(Real)                                              \
  template std::vector<Index> farthest_point_sample(const Tensor2<Real>&,  \
                                                    Index, Index);         \
  template Index lowest_coord_index(const Tensor2<Real>&);                 \
  template struct KnnResult<Real>;                                         \
  template KnnResult<Real> knn(const Tensor2<Real>&, const Tensor2<Real>&, \
                               Index);                                     \
  template struct InterpolationPlan<Real>;                                 \
  template InterpolationPlan<Real> build_interpolation_plan(               \
      const Tensor2<Real>&, const Tensor2<Real>&, Index);                  \
  template Tensor2<Real> interpolate_up(const Tensor2<Real>&,              \
                                        const InterpolationPlan<Real>&);   \
  template Tensor2<Real> plan_matrix(const InterpolationPlan<Real>&);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
