#pragma once

#include <vector>

#include "pcar/tensor.hpp"

namespace pcar {

// A point cloud: positions in voxel units, attribute channels (RGB or YUV in
// [0,255]), and an optional per-point codec quantization step.
struct PointCloud {
  Tensor2<float> coords;  // N x 3
  Tensor2<float> attrs;   // N x C
  Tensor2<float> qsteps;  // N x 1, or empty when absent

  Index size() const { return coords.rows(); }
  bool has_qsteps() const { return !qsteps.empty(); }

  // Throws std::invalid_argument when row counts disagree or a qstep is not
  // strictly positive.
  void validate() const;
};

// A fixed-size slice of a parent cloud. The final block of a partition is
// padded with duplicates of its last real point; pad_count records how many
// rows are padding and source range [source_begin, source_end) locates the
// real rows in the parent.
struct Block {
  PointCloud cloud;
  Index source_begin = 0;
  Index source_end = 0;
  Index pad_count = 0;
};

// Split into ceil(N/n) blocks of exactly n points each, in original point
// order; the last block repeats its final point to fill up to n. qsteps, when
// present, are carried along.
std::vector<Block> partition_blocks(const PointCloud& cloud, Index n);

// Inverse of partition_blocks: concatenates blocks in source order with
// padded rows dropped. Throws std::invalid_argument when source ranges
// overlap, leave gaps, or do not start at 0.
PointCloud combine_blocks(const std::vector<Block>& blocks);

// Translate to centroid zero and scale so the largest point norm is 1. If
// every point coincides the scale step is skipped and the output is all
// zeros. Arithmetic runs in double regardless of Real.
template <typename Real>
Tensor2<Real> normalize_block_coords(const Tensor2<Real>& coords);

}  // namespace pcar
