#include "pcar/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace pcar {

template <typename Real>
Tensor2<Real> glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2<Real> t(rows, cols);
  for (Index i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<Real>(rng.uniform(-limit, limit));
  return t;
}

template <typename Real>
MlpParams<Real> make_mlp(std::span<const Index> widths, Rng& rng) {
  if (widths.size() < 2)
    throw std::invalid_argument("make_mlp: need at least one layer");
  MlpParams<Real> p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    typename MlpParams<Real>::Layer layer;
    layer.weight = glorot_uniform<Real>(widths[i], widths[i + 1], rng);
    layer.bias = Tensor2<Real>(1, widths[i + 1]);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename Real>
ChebConvParams<Real> make_cheb(Index k, Index c_in, Index c_out, Rng& rng,
                               bool zero_init) {
  if (k < 1) throw std::invalid_argument("make_cheb: K must be >= 1");
  ChebConvParams<Real> p;
  for (Index i = 0; i < k; ++i)
    p.theta.push_back(zero_init ? Tensor2<Real>(c_in, c_out)
                                : glorot_uniform<Real>(c_in, c_out, rng));
  return p;
}

template <typename Real>
AttentionParams<Real> make_attention(Index f_in, Index width, Rng& rng) {
  const std::vector<Index> widths{f_in, width, width};
  AttentionParams<Real> p;
  p.delta = make_mlp<Real>(widths, rng);
  p.gamma = make_mlp<Real>(widths, rng);
  p.phi = make_mlp<Real>(widths, rng);
  return p;
}

template <typename Real>
Tensor2<Real> mlp_forward(const Tensor2<Real>& h, const MlpParams<Real>& p,
                          bool final_relu) {
  if (p.layers.empty()) throw std::invalid_argument("mlp_forward: no layers");
  Tensor2<Real> x = h;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    x = add(matmul(x, p.layers[i].weight), p.layers[i].bias);
    if (final_relu || i + 1 < p.layers.size()) x = relu(x);
  }
  return x;
}

template <typename Real>
Tensor2<Real> cheb_conv_layer(const Tensor2<Real>& op, const Tensor2<Real>& h,
                              const ChebConvParams<Real>& p, bool relu_flag) {
  Tensor2<Real> out =
      cheb_apply(op, h, std::span<const Tensor2<Real>>(p.theta));
  return relu_flag ? relu(out) : out;
}

template <typename Real>
Tensor2<Real> cheb_conv_layer(const GraphOperator<Real>& graph,
                              const Tensor2<Real>& h,
                              const ChebConvParams<Real>& p, bool relu_flag) {
  return cheb_conv_layer(cheb_operator(graph), h, p, relu_flag);
}

template <typename Real>
std::pair<Tensor2<Real>, AttentionTrace<Real>> weighted_graph_attention(
    const Tensor2<Real>& h, const Tensor2<Real>& q,
    const AttentionParams<Real>& p) {
  if (q.rows() != h.rows() || q.cols() != 1)
    throw std::invalid_argument("weighted_graph_attention: q must be n x 1");
  for (Index i = 0; i < q.rows(); ++i)
    if (!(q(i, 0) > Real(0)))
      throw std::invalid_argument(
          "weighted_graph_attention: q must be strictly positive (row " +
          std::to_string(i) + ")");

  const Tensor2<Real> delta = mlp_forward(h, p.delta);
  const Tensor2<Real> gamma = mlp_forward(h, p.gamma);
  const Tensor2<Real> phi = mlp_forward(h, p.phi);

  AttentionTrace<Real> trace;
  trace.similarity = matmul_nt(delta, gamma);
  trace.weighted_logits = trace.similarity;
  for (Index i = 0; i < trace.weighted_logits.rows(); ++i)
    for (Index j = 0; j < trace.weighted_logits.cols(); ++j)
      trace.weighted_logits(i, j) *= q(i, 0);
  trace.attention = row_softmax(trace.weighted_logits);
  return {matmul(trace.attention, phi), std::move(trace)};
}

template <typename Real>
Tensor2<Real> bottleneck(std::span<const Tensor2<Real>* const> h_list,
                         const MlpParams<Real>& p, bool final_relu) {
  return mlp_forward(concat_cols(h_list), p, final_relu);
}

template <typename Real>
NodeId mlp_node(Tape<Real>& tape, NodeId h, const MlpParams<Real>& p,
                const std::string& prefix, bool final_relu) {
  if (p.layers.empty()) throw std::invalid_argument("mlp_node: no layers");
  NodeId x = h;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    const NodeId w = tape.param(base + ".w", p.layers[i].weight.rows(),
                                p.layers[i].weight.cols());
    const NodeId b =
        tape.param(base + ".b", 1, p.layers[i].bias.cols());
    x = tape.add(tape.matmul(x, w), b);
    if (final_relu || i + 1 < p.layers.size()) x = tape.relu(x);
  }
  return x;
}

template <typename Real>
NodeId cheb_conv_node(Tape<Real>& tape, NodeId op, NodeId h,
                      const ChebConvParams<Real>& p, const std::string& prefix,
                      bool relu_flag) {
  std::vector<NodeId> theta;
  theta.reserve(p.theta.size());
  for (std::size_t k = 0; k < p.theta.size(); ++k)
    theta.push_back(tape.param(prefix + ".t" + std::to_string(k),
                               p.theta[k].rows(), p.theta[k].cols()));
  NodeId out =
      cheb_apply_node(tape, op, h, std::span<const NodeId>(theta));
  return relu_flag ? tape.relu(out) : out;
}

template <typename Real>
AttentionNodes attention_node(Tape<Real>& tape, NodeId h, NodeId qrep,
                              const AttentionParams<Real>& p,
                              const std::string& prefix) {
  const NodeId delta = mlp_node(tape, h, p.delta, prefix + ".delta");
  const NodeId gamma = mlp_node(tape, h, p.gamma, prefix + ".gamma");
  const NodeId phi = mlp_node(tape, h, p.phi, prefix + ".phi");
  AttentionNodes nodes;
  nodes.similarity = tape.matmul_nt(delta, gamma);
  nodes.weighted_logits = tape.hadamard(qrep, nodes.similarity);
  nodes.attention = tape.row_softmax(nodes.weighted_logits);
  nodes.out = tape.matmul(nodes.attention, phi);
  return nodes;
}

template <typename Real>
NodeId bottleneck_node(Tape<Real>& tape, const std::vector<NodeId>& h_list,
                       const MlpParams<Real>& p, const std::string& prefix,
                       bool final_relu) {
  return mlp_node(tape, tape.concat_cols(h_list), p, prefix, final_relu);
}

template <typename Real>
Tensor2<Real> repeat_rows(const Tensor2<Real>& q, Index cols) {
  if (q.cols() != 1)
    throw std::invalid_argument("repeat_rows: q must be a column");
  Tensor2<Real> out(q.rows(), cols);
  for (Index i = 0; i < q.rows(); ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = q(i, 0);
  return out;
}

#define PCAR_INSTANTIATE(Real)                                                \
  template struct MlpParams<Real>;                                            \
  template struct ChebConvParams<Real>;                                       \
  template struct AttentionParams<Real>;                                      \
  template struct AttentionTrace<Real>;                                       \
  template Tensor2<Real> glorot_uniform<Real>(Index, Index, Rng&);            \
  template MlpParams<Real> make_mlp<Real>(std::span<const Index>, Rng&);      \
  template ChebConvParams<Real> make_cheb<Real>(Index, Index, Index, Rng&,    \
                                                bool);                        \
  template AttentionParams<Real> make_attention<Real>(Index, Index, Rng&);    \
  template Tensor2<Real> mlp_forward(const Tensor2<Real>&,                    \
                                     const MlpParams<Real>&, bool);           \
  template Tensor2<Real> cheb_conv_layer(const Tensor2<Real>&,                \
                                         const Tensor2<Real>&,                \
                                         const ChebConvParams<Real>&, bool);  \
  template Tensor2<Real> cheb_conv_layer(const GraphOperator<Real>&,          \
                                         const Tensor2<Real>&,                \
                                         const ChebConvParams<Real>&, bool);  \
  template std::pair<Tensor2<Real>, AttentionTrace<Real>>                     \
  weighted_graph_attention(const Tensor2<Real>&, const Tensor2<Real>&,        \
                           const AttentionParams<Real>&);                     \
  template Tensor2<Real> bottleneck(std::span<const Tensor2<Real>* const>,    \
                                    const MlpParams<Real>&, bool);            \
  template NodeId mlp_node(Tape<Real>&, NodeId, const MlpParams<Real>&,       \
                           const std::string&, bool);                         \
  template NodeId cheb_conv_node(Tape<Real>&, NodeId, NodeId,                 \
                                 const ChebConvParams<Real>&,                 \
                                 const std::string&, bool);                   \
  template AttentionNodes attention_node(Tape<Real>&, NodeId, NodeId,         \
                                         const AttentionParams<Real>&,        \
                                         const std::string&);                 \
  template NodeId bottleneck_node(Tape<Real>&, const std::vector<NodeId>&,    \
                                  const MlpParams<Real>&, const std::string&, \
                                  bool);                                      \
  template Tensor2<Real> repeat_rows(const Tensor2<Real>&, Index);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
