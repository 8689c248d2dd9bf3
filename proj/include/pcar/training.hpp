#pragma once

#include <vector>

#include "pcar/adam.hpp"
#include "pcar/model.hpp"

namespace pcar {

struct TrainConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  Index batch_size = 8;
  Index epochs = 1;
  Component component = Component::Y;
  std::uint64_t seed = 1;
  std::vector<int> qp_set{51, 46, 40, 34};

  void validate() const;
};

// Sum of squared differences over all entries (the training objective is a
// sum, not a mean).
template <typename Real>
Real mse_loss(const Tensor2<Real>& restored, const Tensor2<Real>& target);

// Codec-style quantization step for a QP: round(2^((qp-4)/6)), at least 1.
// The default qp_set maps to steps 228 (QP51), 128 (QP46), 64 (QP40),
// 32 (QP34).
int qp_step(int qp);

// Synthetic degradation standing in for a codec round trip: every point
// draws one of the qp_set's steps (uniformly, seeded), each YUV component is
// quantized to round(v/q)*q and clamped to [0,255], and the chosen step is
// recorded as the point's qstep. `targets` is the untouched clean attribute
// matrix, returned alongside for convenience.
struct DegradeResult {
  PointCloud degraded;
  Tensor2<float> targets;
};
DegradeResult synth_degrade(const PointCloud& clean_yuv,
                            const std::vector<int>& qp_set,
                            std::uint64_t seed);

// One training example: a degraded block (attributes scaled to [0,1],
// qsteps present) and the clean per-component target in the same [0,1]
// scale. For joint models the target has 3 columns.
struct TrainSample {
  Block block;
  Tensor2<float> target;
};

// Partition a clean/degraded cloud pair into aligned blocks and package them
// as samples for `component` (ignored when config.joint_yuv is set).
std::vector<TrainSample> make_train_samples(const PointCloud& clean_yuv,
                                            const PointCloud& degraded_yuv,
                                            Component component,
                                            const ModelConfig& config);

// Appends the training objective to a forward tape: binds inputs
// "in.target" (n x C), "in.ones_row" (1 x n), "in.ones_col" (C x 1) and
// marks the scalar sum of squared differences as output "loss".
template <typename Real>
NodeId append_loss(Tape<Real>& tape, NodeId restored);

// The loss inputs matching append_loss, added to an existing input map.
template <typename Real>
void add_loss_inputs(NamedTensors<Real>& inputs, const Tensor2<Real>& target);

// Mini-batch Adam over the dataset: per epoch, sample order is reshuffled
// (seeded), gradients are averaged over each batch, and one Adam step is
// taken per batch. The model is updated in place; the return value is the
// mean per-sample loss of each epoch. Deterministic for a fixed seed.
template <typename Real>
std::vector<double> train(const std::vector<TrainSample>& dataset,
                          ModelParams<Real>& model,
                          const ModelConfig& model_config,
                          const TrainConfig& train_config);

// Compares reverse-mode gradients of the loss against central finite
// differences for `per_kind` randomly chosen scalar parameters of each layer
// kind (chebyshev coefficients, attention MLPs, bottleneck MLPs) and returns
// the maximum relative error. Runs in double precision. The model's zero
// final head layer would zero every upstream gradient and make the check
// vacuous, so those coefficients are re-randomized (seeded) on a working
// copy first.
// The default step balances truncation against roundoff: the loss is O(1)
// while many gradients are O(1e-7), so steps much below 1e-4 drown the
// difference quotient in floating-point noise.
double gradient_check(const ModelParams<double>& model,
                      const TrainSample& sample, const ModelConfig& config,
                      double step = 1e-4, Index per_kind = 10,
                      std::uint64_t seed = 7);

}  // namespace pcar
