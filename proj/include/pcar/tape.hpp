#pragma once

#include <map>
#include <string>
#include <vector>

#include "pcar/tensor.hpp"

namespace pcar {

template <typename Real>
using NamedTensors = std::map<std::string, Tensor2<Real>>;

using NodeId = Index;

enum class OpKind {
  Input,
  Param,
  MatMul,
  Add,
  Hadamard,
  Relu,
  RowSoftmax,
  ConcatCols,
  ScalarScale,
};

const char* op_name(OpKind kind);

// Define-by-run computation graph over Tensor2 values. Nodes are created with
// their shapes fully determined, so shape mismatches surface at graph
// construction time rather than during evaluation. Leaves are either inputs
// (per-example data, never differentiated against) or params (trainable,
// gradients reported per name).
template <typename Real>
class Tape {
 public:
  struct Node {
    OpKind kind;
    Index rows = 0;
    Index cols = 0;
    std::vector<NodeId> args;
    Real scalar = Real(0);     // ScalarScale only
    bool transpose_b = false;  // MatMul only: compute a * b^T
    std::string name;          // Input / Param only
  };

  NodeId input(const std::string& name, Index rows, Index cols);
  NodeId param(const std::string& name, Index rows, Index cols);

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);  // a * b^T (matmul with b transposed)
  NodeId add(NodeId a, NodeId b);  // equal shapes, or b a 1xC row broadcast
  NodeId hadamard(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId row_softmax(NodeId a);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId scale(NodeId a, Real s);

  void mark_output(const std::string& name, NodeId id);

  Index num_nodes() const { return static_cast<Index>(nodes_.size()); }
  const Node& node(NodeId id) const;
  Index rows(NodeId id) const { return node(id).rows; }
  Index cols(NodeId id) const { return node(id).cols; }
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }
  const std::map<std::string, NodeId>& input_nodes() const { return inputs_; }
  const std::map<std::string, NodeId>& param_nodes() const { return params_; }

 private:
  NodeId push(Node n);
  NodeId leaf(OpKind kind, std::map<std::string, NodeId>& registry,
              const std::string& name, Index rows, Index cols);
  std::string describe(NodeId id) const;
  [[noreturn]] void fail(const std::string& op, const std::string& detail,
                         const std::vector<NodeId>& args) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> inputs_;
  std::map<std::string, NodeId> params_;
  std::map<std::string, NodeId> outputs_;
};

// Forward evaluation of every node. Checks that the supplied tensors match
// the declared leaf shapes and that every computed value stays finite; any
// violation names the offending node. Returns one tensor per node.
template <typename Real>
std::vector<Tensor2<Real>> evaluate_nodes(const Tape<Real>& tape,
                                          const NamedTensors<Real>& inputs,
                                          const NamedTensors<Real>& params);

// Forward evaluation returning only the marked outputs by name.
template <typename Real>
NamedTensors<Real> evaluate(const Tape<Real>& tape,
                            const NamedTensors<Real>& inputs,
                            const NamedTensors<Real>& params);

// Reverse-mode gradients of a scalar (1x1) loss node with respect to every
// declared param. Params that do not influence the loss get zero tensors of
// their declared shape, so the result always has one entry per param.
template <typename Real>
NamedTensors<Real> gradients(const Tape<Real>& tape, NodeId loss,
                             const NamedTensors<Real>& inputs,
                             const NamedTensors<Real>& params);

template <typename Real>
struct LossAndGradients {
  Real loss = Real(0);
  NamedTensors<Real> grads;
};

// Single forward + backward pass through the named scalar output.
template <typename Real>
LossAndGradients<Real> loss_and_gradients(const Tape<Real>& tape,
                                          const std::string& loss_output,
                                          const NamedTensors<Real>& inputs,
                                          const NamedTensors<Real>& params);

}  // namespace pcar
