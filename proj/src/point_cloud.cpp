#include "pcar/point_cloud.hpp"

#include <cmath>
#include <stdexcept>

namespace pcar {

void PointCloud::validate() const {
  if (coords.cols() != 3)
    throw std::invalid_argument("point cloud: coords must be N x 3, got " +
                                shape_str(coords.rows(), coords.cols()));
  if (attrs.rows() != coords.rows())
    throw std::invalid_argument(
        "point cloud: attrs rows " + std::to_string(attrs.rows()) +
        " != coords rows " + std::to_string(coords.rows()));
  if (!qsteps.empty()) {
    if (qsteps.rows() != coords.rows() || qsteps.cols() != 1)
      throw std::invalid_argument("point cloud: qsteps must be N x 1, got " +
                                  shape_str(qsteps.rows(), qsteps.cols()));
    for (Index i = 0; i < qsteps.rows(); ++i)
      if (!(qsteps(i, 0) > 0.0f))
        throw std::invalid_argument("point cloud: qstep at row " +
                                    std::to_string(i) +
                                    " is not strictly positive");
  }
}

namespace {

Tensor2<float> slice_pad(const Tensor2<float>& src, Index begin, Index end,
                         Index n) {
  Tensor2<float> out(n, src.cols());
  for (Index i = 0; i < n; ++i) {
    const Index r = std::min(begin + i, end - 1);
    for (Index j = 0; j < src.cols(); ++j) out(i, j) = src(r, j);
  }
  return out;
}

}  // namespace

std::vector<Block> partition_blocks(const PointCloud& cloud, Index n) {
  cloud.validate();
  if (n < 1) throw std::invalid_argument("partition_blocks: n must be >= 1");
  const Index total = cloud.size();
  if (total < 1)
    throw std::invalid_argument("partition_blocks: empty cloud");
  const Index count = (total + n - 1) / n;
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(count));
  for (Index b = 0; b < count; ++b) {
    const Index begin = b * n;
    const Index end = std::min(begin + n, total);
    Block blk;
    blk.source_begin = begin;
    blk.source_end = end;
    blk.pad_count = n - (end - begin);
    blk.cloud.coords = slice_pad(cloud.coords, begin, end, n);
    blk.cloud.attrs = slice_pad(cloud.attrs, begin, end, n);
    if (cloud.has_qsteps())
      blk.cloud.qsteps = slice_pad(cloud.qsteps, begin, end, n);
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

PointCloud combine_blocks(const std::vector<Block>& blocks) {
  if (blocks.empty())
    throw std::invalid_argument("combine_blocks: no blocks");
  // Order blocks by source range and check they tile [0, N) exactly.
  std::vector<const Block*> ordered;
  ordered.reserve(blocks.size());
  for (const auto& b : blocks) ordered.push_back(&b);
  std::sort(ordered.begin(), ordered.end(),
            [](const Block* a, const Block* b) {
              return a->source_begin < b->source_begin;
            });
  Index expected = 0;
  for (const Block* b : ordered) {
    if (b->source_begin != expected)
      throw std::invalid_argument(
          "combine_blocks: source ranges leave a gap or overlap at row " +
          std::to_string(expected));
    if (b->source_end <= b->source_begin)
      throw std::invalid_argument("combine_blocks: empty source range");
    if (b->source_end - b->source_begin + b->pad_count != b->cloud.size())
      throw std::invalid_argument(
          "combine_blocks: block size does not match source range plus "
          "padding");
    expected = b->source_end;
  }

  const Index total = expected;
  const Index attr_cols = ordered.front()->cloud.attrs.cols();
  const bool with_qsteps = ordered.front()->cloud.has_qsteps();
  PointCloud out;
  out.coords = Tensor2<float>(total, 3);
  out.attrs = Tensor2<float>(total, attr_cols);
  if (with_qsteps) out.qsteps = Tensor2<float>(total, 1);
  for (const Block* b : ordered) {
    if (b->cloud.attrs.cols() != attr_cols ||
        b->cloud.has_qsteps() != with_qsteps)
      throw std::invalid_argument("combine_blocks: inconsistent channels");
    const Index real = b->source_end - b->source_begin;
    for (Index i = 0; i < real; ++i) {
      const Index dst = b->source_begin + i;
      for (Index j = 0; j < 3; ++j)
        out.coords(dst, j) = b->cloud.coords(i, j);
      for (Index j = 0; j < attr_cols; ++j)
        out.attrs(dst, j) = b->cloud.attrs(i, j);
      if (with_qsteps) out.qsteps(dst, 0) = b->cloud.qsteps(i, 0);
    }
  }
  return out;
}

template <typename Real>
Tensor2<Real> normalize_block_coords(const Tensor2<Real>& coords) {
  const Index n = coords.rows();
  if (n < 1)
    throw std::invalid_argument("normalize_block_coords: empty input");
  const Index d = coords.cols();

  bool all_equal = true;
  for (Index i = 1; i < n && all_equal; ++i)
    for (Index j = 0; j < d; ++j)
      if (coords(i, j) != coords(0, j)) {
        all_equal = false;
        break;
      }
  if (all_equal) return Tensor2<Real>(n, d);

  std::vector<double> centroid(static_cast<std::size_t>(d), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      centroid[static_cast<std::size_t>(j)] += static_cast<double>(coords(i, j));
  for (double& c : centroid) c /= static_cast<double>(n);

  double max_sq = 0.0;
  for (Index i = 0; i < n; ++i) {
    double sq = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double r = static_cast<double>(coords(i, j)) -
                       centroid[static_cast<std::size_t>(j)];
      sq += r * r;
    }
    max_sq = std::max(max_sq, sq);
  }
  const double inv = max_sq > 0.0 ? 1.0 / std::sqrt(max_sq) : 1.0;

  Tensor2<Real> out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) {
      const double r = static_cast<double>(coords(i, j)) -
                       centroid[static_cast<std::size_t>(j)];
      out(i, j) = static_cast<Real>(r * inv);
    }
  return out;
}

template Tensor2<float> normalize_block_coords(const Tensor2<float>&);
template Tensor2<double> normalize_block_coords(const Tensor2<double>&);

}  // namespace pcar
