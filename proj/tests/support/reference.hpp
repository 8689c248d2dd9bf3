#pragma once

// Independent reference implementations used as oracles. These deliberately
// share no code with src/: different algorithms, same contracts.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcar/metrics.hpp"
#include "pcar/tensor.hpp"

namespace pcar::testing {

// ---- geometry ---------------------------------------------------------------

inline double sq_dist(const Tensor2<float>& coords, Index a, Index b) {
  double acc = 0.0;
  for (Index j = 0; j < 3; ++j) {
    const double d = static_cast<double>(coords(a, j)) - coords(b, j);
    acc += d * d;
  }
  return acc;
}

// O(n^2 m) farthest point sampling: recompute every candidate's distance to
// the whole selected set at every step.
inline std::vector<Index> brute_force_fps(const Tensor2<float>& coords,
                                          Index m, Index start) {
  const Index n = coords.rows();
  std::vector<Index> selected{start};
  while (static_cast<Index>(selected.size()) < m) {
    Index best = -1;
    double best_dist = -1.0;
    for (Index c = 0; c < n; ++c) {
      if (std::find(selected.begin(), selected.end(), c) != selected.end())
        continue;
      double to_set = std::numeric_limits<double>::infinity();
      for (Index s : selected) to_set = std::min(to_set, sq_dist(coords, c, s));
      if (to_set > best_dist) {
        best_dist = to_set;
        best = c;
      }
    }
    selected.push_back(best);
  }
  return selected;
}

// Full-sort k nearest neighbors for one query point.
inline std::vector<Index> brute_force_knn(const Tensor2<float>& points,
                                          const Tensor2<float>& queries,
                                          Index query, Index k) {
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < points.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < 3; ++j) {
      const double d = static_cast<double>(queries(query, j)) - points(i, j);
      acc += d * d;
    }
    all.emplace_back(acc, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

// ---- optimizer --------------------------------------------------------------

// Scalar Adam, written straight from the update equations.
struct ScalarAdam {
  double lr, beta1, beta2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double param, double grad) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double m_hat = m / (1.0 - std::pow(beta1, t));
    const double v_hat = v / (1.0 - std::pow(beta2, t));
    return param - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

// ---- Bjontegaard delta rate ---------------------------------------------------

// Second, independent BD-rate route: the cubic through the 4 points is
// evaluated with the Lagrange basis (no coefficient solve) and the average
// log-rate difference is computed by composite Simpson quadrature.
inline double lagrange_log_rate(const RdCurve& curve, double p) {
  const auto& pts = curve.points;
  if (pts.size() != 4)
    throw std::invalid_argument("reference bd-rate expects 4-point curves");
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    double basis = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      basis *= (p - pts[j].psnr) / (pts[i].psnr - pts[j].psnr);
    }
    acc += basis * std::log10(pts[i].rate);
  }
  return acc;
}

inline double reference_bd_rate(const RdCurve& anchor, const RdCurve& test) {
  double lo = std::max(
      std::min_element(anchor.points.begin(), anchor.points.end(),
                       [](auto& a, auto& b) { return a.psnr < b.psnr; })
          ->psnr,
      std::min_element(test.points.begin(), test.points.end(),
                       [](auto& a, auto& b) { return a.psnr < b.psnr; })
          ->psnr);
  double hi = std::min(
      std::max_element(anchor.points.begin(), anchor.points.end(),
                       [](auto& a, auto& b) { return a.psnr < b.psnr; })
          ->psnr,
      std::max_element(test.points.begin(), test.points.end(),
                       [](auto& a, auto& b) { return a.psnr < b.psnr; })
          ->psnr);
  if (!(lo < hi))
    throw std::invalid_argument("reference bd-rate: no PSNR overlap");

  const int intervals = 4096;  // even, for Simpson's rule
  const double h = (hi - lo) / intervals;
  auto f = [&](double p) {
    return lagrange_log_rate(test, p) - lagrange_log_rate(anchor, p);
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i)
    sum += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double integral = sum * h / 3.0;
  const double delta = integral / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

}  // namespace pcar::testing
