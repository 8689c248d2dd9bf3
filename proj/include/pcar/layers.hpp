#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcar/graph.hpp"
#include "pcar/rng.hpp"
#include "pcar/tape.hpp"

namespace pcar {

// Multi-layer perceptron applied per point (per row). Biases are row vectors
// added to every row.
template <typename Real>
struct MlpParams {
  struct Layer {
    Tensor2<Real> weight;  // F_in x F_out
    Tensor2<Real> bias;    // 1 x F_out
  };
  std::vector<Layer> layers;
};

// One Chebyshev graph convolution: K coefficient matrices, all C_in x C_out.
template <typename Real>
struct ChebConvParams {
  std::vector<Tensor2<Real>> theta;
};

// Weighted graph attention: three per-point MLPs. delta and gamma build the
// pairwise similarity, phi produces the values that attention mixes.
template <typename Real>
struct AttentionParams {
  MlpParams<Real> delta;
  MlpParams<Real> gamma;
  MlpParams<Real> phi;
};

// Intermediates of one attention application, kept for inspection: the raw
// similarity S, the step-weighted logits M, and the row-stochastic softmax.
template <typename Real>
struct AttentionTrace {
  Tensor2<Real> similarity;
  Tensor2<Real> weighted_logits;
  Tensor2<Real> attention;
};

// ---- deterministic initialization ------------------------------------------
// Weights are uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.

template <typename Real>
Tensor2<Real> glorot_uniform(Index rows, Index cols, Rng& rng);

// widths = [F_0, F_1, ..., F_depth]; one layer per consecutive pair.
template <typename Real>
MlpParams<Real> make_mlp(std::span<const Index> widths, Rng& rng);

template <typename Real>
ChebConvParams<Real> make_cheb(Index k, Index c_in, Index c_out, Rng& rng,
                               bool zero_init = false);

// All three MLPs are [f_in, width, width] (two layers).
template <typename Real>
AttentionParams<Real> make_attention(Index f_in, Index width, Rng& rng);

// ---- canonical parameter naming --------------------------------------------
// Visitors enumerate every tensor as (name, tensor) in a fixed order. The
// same names are used for tape params, optimizer state, and checkpoints:
//   mlp:       {prefix}.l{i}.w / {prefix}.l{i}.b
//   cheb conv: {prefix}.t{k}
//   attention: {prefix}.delta..., {prefix}.gamma..., {prefix}.phi...

template <typename Real, typename Fn>
void visit_params(MlpParams<Real>& p, const std::string& prefix, Fn&& fn) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    fn(base + ".w", p.layers[i].weight);
    fn(base + ".b", p.layers[i].bias);
  }
}

template <typename Real, typename Fn>
void visit_params(const MlpParams<Real>& p, const std::string& prefix,
                  Fn&& fn) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    fn(base + ".w", p.layers[i].weight);
    fn(base + ".b", p.layers[i].bias);
  }
}

template <typename Real, typename Fn>
void visit_params(ChebConvParams<Real>& p, const std::string& prefix,
                  Fn&& fn) {
  for (std::size_t k = 0; k < p.theta.size(); ++k)
    fn(prefix + ".t" + std::to_string(k), p.theta[k]);
}

template <typename Real, typename Fn>
void visit_params(const ChebConvParams<Real>& p, const std::string& prefix,
                  Fn&& fn) {
  for (std::size_t k = 0; k < p.theta.size(); ++k)
    fn(prefix + ".t" + std::to_string(k), p.theta[k]);
}

template <typename Real, typename Fn>
void visit_params(AttentionParams<Real>& p, const std::string& prefix,
                  Fn&& fn) {
  visit_params(p.delta, prefix + ".delta", fn);
  visit_params(p.gamma, prefix + ".gamma", fn);
  visit_params(p.phi, prefix + ".phi", fn);
}

template <typename Real, typename Fn>
void visit_params(const AttentionParams<Real>& p, const std::string& prefix,
                  Fn&& fn) {
  visit_params(p.delta, prefix + ".delta", fn);
  visit_params(p.gamma, prefix + ".gamma", fn);
  visit_params(p.phi, prefix + ".phi", fn);
}

// ---- eager (tensor-level) application --------------------------------------

// Affine + ReLU per layer; ReLU after the last layer only when final_relu is
// set (the reconstruction head's tail turns it off).
template <typename Real>
Tensor2<Real> mlp_forward(const Tensor2<Real>& h, const MlpParams<Real>& p,
                          bool final_relu = true);

// relu(cheb_apply(op, H, theta)), or the raw filter output when relu_flag is
// unset. `op` is the matrix the recurrence runs on (see cheb_operator).
template <typename Real>
Tensor2<Real> cheb_conv_layer(const Tensor2<Real>& op, const Tensor2<Real>& h,
                              const ChebConvParams<Real>& p,
                              bool relu_flag = true);

template <typename Real>
Tensor2<Real> cheb_conv_layer(const GraphOperator<Real>& graph,
                              const Tensor2<Real>& h,
                              const ChebConvParams<Real>& p,
                              bool relu_flag = true);

// S = MLP_delta(H) MLP_gamma(H)^T; M = diag(q) S (row i scaled by q_i);
// H' = row_softmax(M) MLP_phi(H). q must be strictly positive (callers pass
// block-normalized quantization steps).
template <typename Real>
std::pair<Tensor2<Real>, AttentionTrace<Real>> weighted_graph_attention(
    const Tensor2<Real>& h, const Tensor2<Real>& q,
    const AttentionParams<Real>& p);

// Column-concatenate per-point features from several layers, then reduce
// through an MLP.
template <typename Real>
Tensor2<Real> bottleneck(std::span<const Tensor2<Real>* const> h_list,
                         const MlpParams<Real>& p, bool final_relu = true);

// ---- tape builders ----------------------------------------------------------
// Each builder records the same computation on a tape, declaring one tape
// param per tensor under the canonical names above. The params struct is read
// for shapes only; values are bound at evaluation time.

template <typename Real>
NodeId mlp_node(Tape<Real>& tape, NodeId h, const MlpParams<Real>& p,
                const std::string& prefix, bool final_relu = true);

template <typename Real>
NodeId cheb_conv_node(Tape<Real>& tape, NodeId op, NodeId h,
                      const ChebConvParams<Real>& p, const std::string& prefix,
                      bool relu_flag = true);

struct AttentionNodes {
  NodeId out = -1;
  NodeId similarity = -1;
  NodeId weighted_logits = -1;
  NodeId attention = -1;
};

// `qrep` must be an n x n node whose row i is constant q_i, so the Hadamard
// product realizes the per-row weighting without any broadcast.
template <typename Real>
AttentionNodes attention_node(Tape<Real>& tape, NodeId h, NodeId qrep,
                              const AttentionParams<Real>& p,
                              const std::string& prefix);

template <typename Real>
NodeId bottleneck_node(Tape<Real>& tape, const std::vector<NodeId>& h_list,
                       const MlpParams<Real>& p, const std::string& prefix,
                       bool final_relu = true);

// Row-repeated q as a dense matrix: out(i, j) = q(i, 0).
template <typename Real>
Tensor2<Real> repeat_rows(const Tensor2<Real>& q, Index cols);

}  // namespace pcar
