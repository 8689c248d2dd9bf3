#pragma once

// Deterministic synthetic data for tests: clouds whose colors are smooth
// functions of position (so graph smoothing has something to learn) and
// plain random tensors.

#include "pcar/point_cloud.hpp"
#include "pcar/rng.hpp"
#include "pcar/tensor.hpp"

namespace pcar::testing {

inline Tensor2<float> random_coords(Index n, Rng& rng, double lo = 0.0,
                                    double hi = 1.0) {
  Tensor2<float> coords(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 3; ++j)
      coords(i, j) = static_cast<float>(rng.uniform(lo, hi));
  return coords;
}

template <typename Real>
Tensor2<Real> random_tensor(Index rows, Index cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor2<Real> t(rows, cols);
  for (Index i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

// RGB cloud with colors that vary smoothly over the unit cube.
inline PointCloud smooth_cloud(Index n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.coords = random_coords(n, rng);
  cloud.attrs = Tensor2<float>(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double x = cloud.coords(i, 0);
    const double y = cloud.coords(i, 1);
    const double z = cloud.coords(i, 2);
    cloud.attrs(i, 0) = static_cast<float>(30.0 + 190.0 * x);
    cloud.attrs(i, 1) = static_cast<float>(40.0 + 60.0 * y + 120.0 * z);
    cloud.attrs(i, 2) = static_cast<float>(200.0 - 75.0 * (x + y));
  }
  return cloud;
}

// RGB cloud with integer coordinates and integer colors (voxel-grid style),
// for bitwise round-trip tests.
inline PointCloud integer_cloud(Index n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.coords = Tensor2<float>(n, 3);
  cloud.attrs = Tensor2<float>(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 3; ++j)
      cloud.coords(i, j) = static_cast<float>(rng.uniform_int(1024));
    for (Index j = 0; j < 3; ++j)
      cloud.attrs(i, j) = static_cast<float>(rng.uniform_int(256));
  }
  return cloud;
}

// A ready-to-run block: normalized-scale coordinates, [0,1] attributes,
// positive qsteps. `qstep_hi / qstep_lo` controls the qstep spread.
inline Block random_block(Index n, std::uint64_t seed, double qstep_lo = 8.0,
                          double qstep_hi = 128.0) {
  Rng rng(seed);
  Block block;
  block.cloud.coords = random_coords(n, rng);
  block.cloud.attrs = Tensor2<float>(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 3; ++j)
      block.cloud.attrs(i, j) = static_cast<float>(rng.uniform());
  block.cloud.qsteps = Tensor2<float>(n, 1);
  for (Index i = 0; i < n; ++i)
    block.cloud.qsteps(i, 0) =
        static_cast<float>(rng.uniform(qstep_lo, qstep_hi));
  block.source_begin = 0;
  block.source_end = n;
  block.pad_count = 0;
  return block;
}

}  // namespace pcar::testing
