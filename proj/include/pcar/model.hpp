#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pcar/layers.hpp"
#include "pcar/point_cloud.hpp"
#include "pcar/sampling.hpp"

namespace pcar {

enum class Component { Y = 0, U = 1, V = 2 };

const char* to_string(Component c);
Component component_from_string(const std::string& s);

enum class LayerKind { ChebConv, Attention };

// Architecture description. The first scale is the full block resolution;
// coarser scales are farthest-point-sampled subsets. Every extraction layer
// outputs feature_width channels; each branch ends in a bottleneck MLP and
// the fused branches feed the reconstruction head.
struct ModelConfig {
  Index block_size = 2048;
  std::vector<Index> scales{2048, 1024, 512};
  Index cheb_order = 3;  // K, in [1, 6]
  std::vector<LayerKind> extraction_layout{
      LayerKind::ChebConv, LayerKind::Attention, LayerKind::ChebConv,
      LayerKind::Attention};
  Index feature_width = 64;
  Index bottleneck_width = 64;
  std::vector<Index> head_widths{512, 256, 128, 64, 1};
  bool rescale_laplacian = false;
  // One model for all three components (4 input channels, 3 outputs) instead
  // of the default one-model-per-component (2 in, 1 out).
  bool joint_yuv = false;
  std::uint64_t seed = 1;

  Index input_channels() const { return joint_yuv ? 4 : 2; }
  Index output_channels() const { return joint_yuv ? 3 : 1; }

  // Throws std::invalid_argument on any inconsistency (scales not strictly
  // decreasing from block_size, widths < 1, head not ending at the output
  // channel count, cheb_order outside [1,6], ...).
  void validate() const;

  // Small preset used by gradient checks and fast experiments:
  // 32-point blocks, scales 32/16/8, width 8 everywhere, head 16/8/1.
  static ModelConfig tiny();
};

template <typename Real>
struct BranchParams {
  std::vector<std::variant<ChebConvParams<Real>, AttentionParams<Real>>>
      layers;
  MlpParams<Real> bottleneck;
};

template <typename Real>
struct ModelParams {
  std::vector<BranchParams<Real>> branches;
  std::vector<ChebConvParams<Real>> head;
};

// Canonical parameter enumeration, in a fixed deterministic order:
//   branch{b}.layer{j}.<layer params>   (see layers.hpp for the leaf names)
//   branch{b}.bottleneck.l{i}.{w,b}
//   head.l{j}.t{k}
template <typename Real, typename Fn>
void visit_params(ModelParams<Real>& p, Fn&& fn) {
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    const std::string bp = "branch" + std::to_string(b);
    for (std::size_t j = 0; j < p.branches[b].layers.size(); ++j) {
      const std::string lp = bp + ".layer" + std::to_string(j);
      std::visit([&](auto& layer) { visit_params(layer, lp, fn); },
                 p.branches[b].layers[j]);
    }
    visit_params(p.branches[b].bottleneck, bp + ".bottleneck", fn);
  }
  for (std::size_t j = 0; j < p.head.size(); ++j)
    visit_params(p.head[j], "head.l" + std::to_string(j), fn);
}

template <typename Real, typename Fn>
void visit_params(const ModelParams<Real>& p, Fn&& fn) {
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    const std::string bp = "branch" + std::to_string(b);
    for (std::size_t j = 0; j < p.branches[b].layers.size(); ++j) {
      const std::string lp = bp + ".layer" + std::to_string(j);
      std::visit([&](const auto& layer) { visit_params(layer, lp, fn); },
                 p.branches[b].layers[j]);
    }
    visit_params(p.branches[b].bottleneck, bp + ".bottleneck", fn);
  }
  for (std::size_t j = 0; j < p.head.size(); ++j)
    visit_params(p.head[j], "head.l" + std::to_string(j), fn);
}

// Copies of every parameter tensor keyed by canonical name, and the inverse
// (which requires every name to be present with a matching shape).
template <typename Real>
NamedTensors<Real> collect_params(const ModelParams<Real>& p);
template <typename Real>
void assign_params(ModelParams<Real>& p, const NamedTensors<Real>& values);
template <typename Real>
Index param_count(const ModelParams<Real>& p);

// Deterministic initialization from config.seed. The final head layer starts
// at zero, so a fresh model is exactly the identity map on its input
// attribute (the residual path contributes nothing).
template <typename Real>
ModelParams<Real> build_model(const ModelConfig& config);

// The forward pass recorded as a reusable tape. The tape depends only on
// config and parameter shapes; per-block data is bound through the input
// tensors produced by make_forward_inputs, so one tape serves every block of
// a training run. Attention matrices are marked as outputs
// ("attention0", "attention1", ...) next to "restored".
template <typename Real>
struct ForwardTape {
  Tape<Real> tape;
  NodeId restored = -1;
  std::vector<NodeId> attention;
};

template <typename Real>
ForwardTape<Real> build_forward_tape(const ModelParams<Real>& params,
                                     const ModelConfig& config);

// Per-block constants: block-normalized coordinates turned into graph
// operators, per-scale feature/step inputs, attention step weights, and
// interpolation matrices. `component` selects the attribute column unless
// config.joint_yuv is set. Block attributes must be pre-scaled to [0,1] and
// qsteps must be present.
template <typename Real>
NamedTensors<Real> make_forward_inputs(const Block& block, Component component,
                                       const ModelConfig& config);

// Restored component values (block order, [0,1] domain): n x 1 for
// per-component models, n x 3 when config.joint_yuv is set.
template <typename Real>
Tensor2<Real> forward(const Block& block, Component component,
                      const ModelParams<Real>& params,
                      const ModelConfig& config);

// Full-cloud restoration: RGB -> YUV, partition into blocks, run every
// component's model on every block, recombine, and convert back to RGB with
// rounding and clamping. `models` holds the Y, U, V models in that order, or
// a single model when config.joint_yuv is set. The cloud must carry qsteps;
// coordinates pass through bitwise-unchanged.
template <typename Real>
PointCloud restore_cloud(const PointCloud& cloud,
                         std::span<const ModelParams<Real>* const> models,
                         const ModelConfig& config);

}  // namespace pcar
