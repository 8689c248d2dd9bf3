#include "pcar/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pcar {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Relu: return "relu";
    case OpKind::RowSoftmax: return "row_softmax";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::ScalarScale: return "scale";
  }
  return "?";
}

template <typename Real>
const typename Tape<Real>::Node& Tape<Real>::node(NodeId id) const {
  if (id < 0 || id >= num_nodes())
    throw std::invalid_argument("tape: node id " + std::to_string(id) +
                                " out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

template <typename Real>
NodeId Tape<Real>::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

template <typename Real>
std::string Tape<Real>::describe(NodeId id) const {
  const Node& n = node(id);
  std::string s = "n" + std::to_string(id) + ":" + op_name(n.kind);
  if (!n.name.empty()) s += "('" + n.name + "')";
  s += shape_str(n.rows, n.cols);
  return s;
}

template <typename Real>
void Tape<Real>::fail(const std::string& op, const std::string& detail,
                      const std::vector<NodeId>& args) const {
  std::string s = "tape " + op + ": " + detail;
  if (!args.empty()) {
    s += " (args:";
    for (NodeId a : args) s += " " + describe(a);
    s += ")";
  }
  throw std::invalid_argument(s);
}

template <typename Real>
NodeId Tape<Real>::leaf(OpKind kind, std::map<std::string, NodeId>& registry,
                        const std::string& name, Index rows, Index cols) {
  if (name.empty()) fail(op_name(kind), "leaf name must be non-empty", {});
  if (rows < 1 || cols < 1)
    fail(op_name(kind),
         "'" + name + "' has invalid shape " + shape_str(rows, cols), {});
  if (inputs_.count(name) || params_.count(name))
    fail(op_name(kind), "leaf name '" + name + "' already declared", {});
  const NodeId id = push({kind, rows, cols, {}, Real(0), false, name});
  registry.emplace(name, id);
  return id;
}

template <typename Real>
NodeId Tape<Real>::input(const std::string& name, Index rows, Index cols) {
  return leaf(OpKind::Input, inputs_, name, rows, cols);
}

template <typename Real>
NodeId Tape<Real>::param(const std::string& name, Index rows, Index cols) {
  return leaf(OpKind::Param, params_, name, rows, cols);
}

template <typename Real>
NodeId Tape<Real>::matmul(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (na.cols != nb.rows) fail("matmul", "inner dimensions differ", {a, b});
  return push({OpKind::MatMul, na.rows, nb.cols, {a, b}, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::matmul_nt(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (na.cols != nb.cols) fail("matmul_nt", "inner dimensions differ", {a, b});
  return push({OpKind::MatMul, na.rows, nb.rows, {a, b}, Real(0), true, {}});
}

template <typename Real>
NodeId Tape<Real>::add(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  const bool equal = na.rows == nb.rows && na.cols == nb.cols;
  const bool row_broadcast = nb.rows == 1 && nb.cols == na.cols;
  if (!equal && !row_broadcast)
    fail("add", "shapes must match or b must be a 1-row broadcast", {a, b});
  return push({OpKind::Add, na.rows, na.cols, {a, b}, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::hadamard(NodeId a, NodeId b) {
  const Node &na = node(a), &nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols)
    fail("hadamard", "shapes differ", {a, b});
  return push({OpKind::Hadamard, na.rows, na.cols, {a, b}, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::relu(NodeId a) {
  const Node& na = node(a);
  return push({OpKind::Relu, na.rows, na.cols, {a}, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::row_softmax(NodeId a) {
  const Node& na = node(a);
  return push({OpKind::RowSoftmax, na.rows, na.cols, {a}, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) fail("concat_cols", "needs at least one part", {});
  const Index rows = node(parts[0]).rows;
  Index cols = 0;
  for (NodeId p : parts) {
    if (node(p).rows != rows) fail("concat_cols", "row counts differ", parts);
    cols += node(p).cols;
  }
  return push({OpKind::ConcatCols, rows, cols, parts, Real(0), false, {}});
}

template <typename Real>
NodeId Tape<Real>::scale(NodeId a, Real s) {
  const Node& na = node(a);
  if (!std::isfinite(static_cast<double>(s)))
    fail("scale", "factor must be finite", {a});
  return push({OpKind::ScalarScale, na.rows, na.cols, {a}, s, false, {}});
}

template <typename Real>
void Tape<Real>::mark_output(const std::string& name, NodeId id) {
  node(id);  // range check
  if (name.empty()) fail("mark_output", "output name must be non-empty", {});
  if (outputs_.count(name))
    fail("mark_output", "output name '" + name + "' already used", {});
  outputs_.emplace(name, id);
}

namespace {

template <typename Real>
const Tensor2<Real>& fetch_leaf(const typename Tape<Real>::Node& n,
                                const NamedTensors<Real>& values,
                                const char* which) {
  auto it = values.find(n.name);
  if (it == values.end())
    throw std::invalid_argument(std::string("evaluate: missing ") + which +
                                " '" + n.name + "'");
  const Tensor2<Real>& t = it->second;
  if (t.rows() != n.rows || t.cols() != n.cols)
    throw std::invalid_argument(
        std::string("evaluate: ") + which + " '" + n.name + "' has shape " +
        shape_str(t.rows(), t.cols()) + ", declared " +
        shape_str(n.rows, n.cols));
  return t;
}

}  // namespace

template <typename Real>
std::vector<Tensor2<Real>> evaluate_nodes(const Tape<Real>& tape,
                                          const NamedTensors<Real>& inputs,
                                          const NamedTensors<Real>& params) {
  std::vector<Tensor2<Real>> values;
  values.reserve(static_cast<std::size_t>(tape.num_nodes()));
  for (NodeId id = 0; id < tape.num_nodes(); ++id) {
    const auto& n = tape.node(id);
    auto val = [&](NodeId a) -> const Tensor2<Real>& {
      return values[static_cast<std::size_t>(a)];
    };
    switch (n.kind) {
      case OpKind::Input:
        values.push_back(fetch_leaf<Real>(n, inputs, "input"));
        break;
      case OpKind::Param:
        values.push_back(fetch_leaf<Real>(n, params, "param"));
        break;
      case OpKind::MatMul:
        values.push_back(n.transpose_b
                             ? matmul_nt(val(n.args[0]), val(n.args[1]))
                             : matmul(val(n.args[0]), val(n.args[1])));
        break;
      case OpKind::Add:
        values.push_back(add(val(n.args[0]), val(n.args[1])));
        break;
      case OpKind::Hadamard:
        values.push_back(hadamard(val(n.args[0]), val(n.args[1])));
        break;
      case OpKind::Relu:
        values.push_back(relu(val(n.args[0])));
        break;
      case OpKind::RowSoftmax:
        values.push_back(row_softmax(val(n.args[0])));
        break;
      case OpKind::ConcatCols: {
        std::vector<const Tensor2<Real>*> parts;
        parts.reserve(n.args.size());
        for (NodeId a : n.args) parts.push_back(&val(a));
        values.push_back(
            concat_cols(std::span<const Tensor2<Real>* const>(parts)));
        break;
      }
      case OpKind::ScalarScale:
        values.push_back(scale(val(n.args[0]), n.scalar));
        break;
    }
    if (!values.back().all_finite())
      throw std::runtime_error("evaluate: non-finite value in node n" +
                               std::to_string(id) + ":" + op_name(n.kind) +
                               (n.name.empty() ? "" : " '" + n.name + "'"));
  }
  return values;
}

template <typename Real>
NamedTensors<Real> evaluate(const Tape<Real>& tape,
                            const NamedTensors<Real>& inputs,
                            const NamedTensors<Real>& params) {
  const auto values = evaluate_nodes(tape, inputs, params);
  NamedTensors<Real> out;
  for (const auto& [name, id] : tape.outputs())
    out.emplace(name, values[static_cast<std::size_t>(id)]);
  return out;
}

namespace {

// Reverse sweep from a scalar loss node; returns one gradient per param name.
template <typename Real>
NamedTensors<Real> backward_params(const Tape<Real>& tape, NodeId loss,
                                   const std::vector<Tensor2<Real>>& values) {
  const auto& loss_node = tape.node(loss);
  if (loss_node.rows != 1 || loss_node.cols != 1)
    throw std::invalid_argument("gradients: loss node has shape " +
                                shape_str(loss_node.rows, loss_node.cols) +
                                ", expected [1x1]");

  std::vector<Tensor2<Real>> adj(values.size());
  auto bump = [&](NodeId id, const Tensor2<Real>& delta) {
    auto& a = adj[static_cast<std::size_t>(id)];
    if (a.empty())
      a = delta;
    else
      accumulate(a, delta);
  };
  adj[static_cast<std::size_t>(loss)] = Tensor2<Real>::full(1, 1, Real(1));

  for (NodeId id = loss; id >= 0; --id) {
    const auto& g = adj[static_cast<std::size_t>(id)];
    if (g.empty()) continue;
    const auto& n = tape.node(id);
    auto val = [&](NodeId a) -> const Tensor2<Real>& {
      return values[static_cast<std::size_t>(a)];
    };
    switch (n.kind) {
      case OpKind::Input:
      case OpKind::Param:
        break;
      case OpKind::MatMul:
        if (n.transpose_b) {
          // c = a * b^T: da = g * b, db = g^T * a
          bump(n.args[0], matmul(g, val(n.args[1])));
          bump(n.args[1], matmul_tn(g, val(n.args[0])));
        } else {
          // c = a * b: da = g * b^T, db = a^T * g
          bump(n.args[0], matmul_nt(g, val(n.args[1])));
          bump(n.args[1], matmul_tn(val(n.args[0]), g));
        }
        break;
      case OpKind::Add: {
        bump(n.args[0], g);
        const auto& nb = tape.node(n.args[1]);
        if (nb.rows == n.rows)
          bump(n.args[1], g);
        else
          bump(n.args[1], column_sums(g));  // 1-row broadcast
        break;
      }
      case OpKind::Hadamard:
        bump(n.args[0], hadamard(g, val(n.args[1])));
        bump(n.args[1], hadamard(g, val(n.args[0])));
        break;
      case OpKind::Relu: {
        Tensor2<Real> d = g;
        const auto& x = val(n.args[0]);
        for (Index i = 0; i < d.size(); ++i)
          if (x.data()[i] <= Real(0)) d.data()[i] = Real(0);
        bump(n.args[0], d);
        break;
      }
      case OpKind::RowSoftmax: {
        // y = softmax(x) per row; dx = y .* (g - <g, y>_row)
        const auto& y = values[static_cast<std::size_t>(id)];
        Tensor2<Real> d(n.rows, n.cols);
        for (Index i = 0; i < n.rows; ++i) {
          Real dot = Real(0);
          for (Index j = 0; j < n.cols; ++j) dot += g(i, j) * y(i, j);
          for (Index j = 0; j < n.cols; ++j)
            d(i, j) = y(i, j) * (g(i, j) - dot);
        }
        bump(n.args[0], d);
        break;
      }
      case OpKind::ConcatCols: {
        Index offset = 0;
        for (NodeId a : n.args) {
          const auto& na = tape.node(a);
          Tensor2<Real> d(na.rows, na.cols);
          for (Index i = 0; i < na.rows; ++i)
            for (Index j = 0; j < na.cols; ++j) d(i, j) = g(i, offset + j);
          bump(a, d);
          offset += na.cols;
        }
        break;
      }
      case OpKind::ScalarScale:
        bump(n.args[0], scale(g, n.scalar));
        break;
    }
  }

  NamedTensors<Real> out;
  for (const auto& [name, id] : tape.param_nodes()) {
    auto& a = adj[static_cast<std::size_t>(id)];
    if (a.empty()) {
      const auto& n = tape.node(id);
      out.emplace(name, Tensor2<Real>(n.rows, n.cols));
    } else {
      out.emplace(name, std::move(a));
    }
  }
  return out;
}

}  // namespace

template <typename Real>
NamedTensors<Real> gradients(const Tape<Real>& tape, NodeId loss,
                             const NamedTensors<Real>& inputs,
                             const NamedTensors<Real>& params) {
  const auto values = evaluate_nodes(tape, inputs, params);
  return backward_params(tape, loss, values);
}

template <typename Real>
LossAndGradients<Real> loss_and_gradients(const Tape<Real>& tape,
                                          const std::string& loss_output,
                                          const NamedTensors<Real>& inputs,
                                          const NamedTensors<Real>& params) {
  auto it = tape.outputs().find(loss_output);
  if (it == tape.outputs().end())
    throw std::invalid_argument("loss_and_gradients: no output named '" +
                                loss_output + "'");
  const NodeId loss = it->second;
  const auto values = evaluate_nodes(tape, inputs, params);
  LossAndGradients<Real> result;
  result.loss = values[static_cast<std::size_t>(loss)](0, 0);
  result.grads = backward_params(tape, loss, values);
  return result;
}

#define PCAR_INSTANTIATE(Real)                                               \
  template class Tape<Real>;                                                 \
  template std::vector<Tensor2<Real>> evaluate_nodes(                        \
      const Tape<Real>&, const NamedTensors<Real>&,                          \
      const NamedTensors<Real>&);                                            \
  template NamedTensors<Real> evaluate(const Tape<Real>&,                    \
                                       const NamedTensors<Real>&,            \
                                       const NamedTensors<Real>&);           \
  template NamedTensors<Real> gradients(const Tape<Real>&, NodeId,           \
                                        const NamedTensors<Real>&,           \
                                        const NamedTensors<Real>&);          \
  template LossAndGradients<Real> loss_and_gradients(                        \
      const Tape<Real>&, const std::string&, const NamedTensors<Real>&,      \
      const NamedTensors<Real>&);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
