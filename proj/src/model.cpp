#include "pcar/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcar/graph.hpp"
#include "pcar/metrics.hpp"

namespace pcar {

const char* to_string(Component c) {
  switch (c) {
    case Component::Y: return "Y";
    case Component::U: return "U";
    case Component::V: return "V";
  }
  return "?";
}

Component component_from_string(const std::string& s) {
  if (s == "Y" || s == "y") return Component::Y;
  if (s == "U" || s == "u") return Component::U;
  if (s == "V" || s == "v") return Component::V;
  throw std::invalid_argument("unknown component '" + s +
                              "' (expected Y, U, or V)");
}

void ModelConfig::validate() const {
  if (block_size < 1)
    throw std::invalid_argument("model config: block_size must be >= 1");
  if (scales.empty())
    throw std::invalid_argument("model config: scales must be non-empty");
  if (scales.front() != block_size)
    throw std::invalid_argument(
        "model config: first scale must equal block_size");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i] < 1)
      throw std::invalid_argument("model config: scales must be >= 1");
    if (i > 0 && scales[i] >= scales[i - 1])
      throw std::invalid_argument(
          "model config: scales must strictly decrease");
    if (i > 0 && scales[i] < 3)
      throw std::invalid_argument(
          "model config: coarse scales need >= 3 points (interpolation uses "
          "3 neighbors)");
  }
  if (cheb_order < 1 || cheb_order > 6)
    throw std::invalid_argument("model config: cheb_order must be in [1,6]");
  if (extraction_layout.empty())
    throw std::invalid_argument("model config: extraction layout is empty");
  if (feature_width < 1 || bottleneck_width < 1)
    throw std::invalid_argument("model config: widths must be >= 1");
  if (head_widths.empty())
    throw std::invalid_argument("model config: head_widths is empty");
  for (Index w : head_widths)
    if (w < 1)
      throw std::invalid_argument("model config: head widths must be >= 1");
  if (head_widths.back() != output_channels())
    throw std::invalid_argument(
        "model config: head must end at " +
        std::to_string(output_channels()) + " channel(s), ends at " +
        std::to_string(head_widths.back()));
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.block_size = 32;
  c.scales = {32, 16, 8};
  c.feature_width = 8;
  c.bottleneck_width = 8;
  c.head_widths = {16, 8, 1};
  return c;
}

template <typename Real>
NamedTensors<Real> collect_params(const ModelParams<Real>& p) {
  NamedTensors<Real> out;
  visit_params(p, [&](const std::string& name, const Tensor2<Real>& t) {
    out.emplace(name, t);
  });
  return out;
}

template <typename Real>
void assign_params(ModelParams<Real>& p, const NamedTensors<Real>& values) {
  visit_params(p, [&](const std::string& name, Tensor2<Real>& t) {
    auto it = values.find(name);
    if (it == values.end())
      throw std::invalid_argument("assign_params: missing tensor '" + name +
                                  "'");
    if (!t.same_shape(it->second))
      throw std::invalid_argument(
          "assign_params: '" + name + "' has shape " +
          shape_str(it->second.rows(), it->second.cols()) + ", expected " +
          shape_str(t.rows(), t.cols()));
    t = it->second;
  });
}

template <typename Real>
Index param_count(const ModelParams<Real>& p) {
  Index count = 0;
  visit_params(p, [&](const std::string&, const Tensor2<Real>& t) {
    count += t.size();
  });
  return count;
}

template <typename Real>
ModelParams<Real> build_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ModelParams<Real> params;
  const Index in_ch = config.input_channels();
  const Index width = config.feature_width;

  for (std::size_t b = 0; b < config.scales.size(); ++b) {
    BranchParams<Real> branch;
    Index cur = in_ch;
    for (LayerKind kind : config.extraction_layout) {
      if (kind == LayerKind::ChebConv) {
        branch.layers.emplace_back(
            make_cheb<Real>(config.cheb_order, cur, width, rng));
      } else {
        branch.layers.emplace_back(make_attention<Real>(cur, width, rng));
      }
      cur = width;
    }
    const Index concat_width =
        width * static_cast<Index>(config.extraction_layout.size());
    const std::vector<Index> bott_widths{concat_width, config.bottleneck_width,
                                         config.bottleneck_width};
    branch.bottleneck = make_mlp<Real>(bott_widths, rng);
    params.branches.push_back(std::move(branch));
  }

  Index cur = config.bottleneck_width * static_cast<Index>(config.scales.size());
  for (std::size_t j = 0; j < config.head_widths.size(); ++j) {
    const bool last = j + 1 == config.head_widths.size();
    params.head.push_back(make_cheb<Real>(config.cheb_order, cur,
                                          config.head_widths[j], rng,
                                          /*zero_init=*/last));
    cur = config.head_widths[j];
  }
  return params;
}

namespace {

template <typename Real>
void check_params_match(const ModelParams<Real>& params,
                        const ModelConfig& config) {
  if (params.branches.size() != config.scales.size())
    throw std::invalid_argument("model: params have " +
                                std::to_string(params.branches.size()) +
                                " branches, config expects " +
                                std::to_string(config.scales.size()));
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const auto& branch = params.branches[b];
    if (branch.layers.size() != config.extraction_layout.size())
      throw std::invalid_argument("model: branch " + std::to_string(b) +
                                  " layer count does not match the layout");
    for (std::size_t j = 0; j < branch.layers.size(); ++j) {
      const bool want_conv =
          config.extraction_layout[j] == LayerKind::ChebConv;
      const bool is_conv =
          std::holds_alternative<ChebConvParams<Real>>(branch.layers[j]);
      if (want_conv != is_conv)
        throw std::invalid_argument(
            "model: branch " + std::to_string(b) + " layer " +
            std::to_string(j) + " kind does not match the layout");
    }
  }
  if (params.head.size() != config.head_widths.size())
    throw std::invalid_argument(
        "model: head layer count does not match config");
}

}  // namespace

template <typename Real>
ForwardTape<Real> build_forward_tape(const ModelParams<Real>& params,
                                     const ModelConfig& config) {
  config.validate();
  check_params_match(params, config);

  ForwardTape<Real> fwd;
  Tape<Real>& tape = fwd.tape;
  const Index n = config.block_size;
  const Index in_ch = config.input_channels();
  const Index out_ch = config.output_channels();
  const std::size_t num_branches = config.scales.size();

  std::vector<NodeId> h(num_branches), op(num_branches), qrep(num_branches);
  std::vector<NodeId> up(num_branches, -1);
  for (std::size_t b = 0; b < num_branches; ++b) {
    const Index nb = config.scales[b];
    const std::string sb = std::to_string(b);
    h[b] = tape.input("in.h" + sb, nb, in_ch);
    op[b] = tape.input("in.op" + sb, nb, nb);
    qrep[b] = tape.input("in.qrep" + sb, nb, nb);
    if (b > 0) up[b] = tape.input("in.up" + sb, n, nb);
  }
  const NodeId attr = tape.input("in.attr", n, out_ch);

  std::vector<NodeId> fused;
  for (std::size_t b = 0; b < num_branches; ++b) {
    const std::string bp = "branch" + std::to_string(b);
    NodeId x = h[b];
    std::vector<NodeId> collected;
    for (std::size_t j = 0; j < config.extraction_layout.size(); ++j) {
      const std::string lp = bp + ".layer" + std::to_string(j);
      if (config.extraction_layout[j] == LayerKind::ChebConv) {
        x = cheb_conv_node(
            tape, op[b], x,
            std::get<ChebConvParams<Real>>(params.branches[b].layers[j]), lp);
      } else {
        const AttentionNodes nodes = attention_node(
            tape, x, qrep[b],
            std::get<AttentionParams<Real>>(params.branches[b].layers[j]), lp);
        fwd.attention.push_back(nodes.attention);
        x = nodes.out;
      }
      collected.push_back(x);
    }
    const NodeId bott = bottleneck_node(tape, collected,
                                        params.branches[b].bottleneck,
                                        bp + ".bottleneck");
    fused.push_back(b == 0 ? bott : tape.matmul(up[b], bott));
  }

  NodeId x = fused.size() == 1 ? fused[0] : tape.concat_cols(fused);
  for (std::size_t j = 0; j < params.head.size(); ++j) {
    const bool last = j + 1 == params.head.size();
    x = cheb_conv_node(tape, op[0], x, params.head[j],
                       "head.l" + std::to_string(j), /*relu_flag=*/!last);
  }
  fwd.restored = tape.add(x, attr);
  tape.mark_output("restored", fwd.restored);
  for (std::size_t i = 0; i < fwd.attention.size(); ++i)
    tape.mark_output("attention" + std::to_string(i), fwd.attention[i]);
  return fwd;
}

template <typename Real>
NamedTensors<Real> make_forward_inputs(const Block& block, Component component,
                                       const ModelConfig& config) {
  config.validate();
  block.cloud.validate();
  if (!block.cloud.has_qsteps())
    throw std::invalid_argument("forward: block has no qsteps");
  const Index n = block.cloud.size();
  if (n != config.block_size)
    throw std::invalid_argument("forward: block has " + std::to_string(n) +
                                " points, config expects " +
                                std::to_string(config.block_size));
  if (block.cloud.attrs.cols() != 3)
    throw std::invalid_argument("forward: block attrs must be n x 3 (YUV)");
  for (Index i = 0; i < block.cloud.attrs.size(); ++i) {
    const float v = block.cloud.attrs.data()[i];
    if (!(v >= 0.0f && v <= 1.0f + 1e-5f))
      throw std::invalid_argument(
          "forward: attributes must be pre-scaled to [0,1]");
  }

  const Tensor2<Real> norm =
      normalize_block_coords(block.cloud.coords.template cast<Real>());

  // Per-point attribute input and normalized steps at full resolution.
  const Index out_ch = config.output_channels();
  Tensor2<Real> attr(n, out_ch);
  if (config.joint_yuv) {
    attr = block.cloud.attrs.template cast<Real>();
  } else {
    const Index c = static_cast<Index>(component);
    for (Index i = 0; i < n; ++i)
      attr(i, 0) = static_cast<Real>(block.cloud.attrs(i, c));
  }
  Real qmax = Real(0);
  for (Index i = 0; i < n; ++i)
    qmax = std::max(qmax, static_cast<Real>(block.cloud.qsteps(i, 0)));
  Tensor2<Real> qnorm(n, 1);
  for (Index i = 0; i < n; ++i)
    qnorm(i, 0) = static_cast<Real>(block.cloud.qsteps(i, 0)) / qmax;

  // One FPS run covers every coarse scale: a greedy prefix is itself a valid
  // FPS result, so scale b takes the first scales[b] indices. The start point
  // is the lexicographically smallest coordinate, which is stable under
  // point reordering.
  std::vector<Index> fps;
  if (config.scales.size() > 1)
    fps = farthest_point_sample(norm, config.scales[1],
                                lowest_coord_index(norm));

  NamedTensors<Real> inputs;
  for (std::size_t b = 0; b < config.scales.size(); ++b) {
    const Index nb = config.scales[b];
    const std::string sb = std::to_string(b);
    Tensor2<Real> coords_b, attr_b, qnorm_b;
    if (b == 0) {
      coords_b = norm;
      attr_b = attr;
      qnorm_b = qnorm;
    } else {
      const std::span<const Index> idx(fps.data(),
                                       static_cast<std::size_t>(nb));
      coords_b = norm.gather_rows(idx);
      attr_b = attr.gather_rows(idx);
      qnorm_b = qnorm.gather_rows(idx);
    }

    Tensor2<Real> h(nb, attr_b.cols() + 1);
    for (Index i = 0; i < nb; ++i) {
      for (Index j = 0; j < attr_b.cols(); ++j) h(i, j) = attr_b(i, j);
      h(i, attr_b.cols()) = qnorm_b(i, 0);
    }
    inputs.emplace("in.h" + sb, std::move(h));

    const GraphOperator<Real> graph =
        build_graph(coords_b, config.rescale_laplacian);
    inputs.emplace("in.op" + sb, cheb_operator(graph));
    inputs.emplace("in.qrep" + sb, repeat_rows(qnorm_b, nb));

    if (b > 0) {
      const InterpolationPlan<Real> plan =
          build_interpolation_plan(coords_b, norm, 3);
      inputs.emplace("in.up" + sb, plan_matrix(plan));
    }
  }
  inputs.emplace("in.attr", std::move(attr));
  return inputs;
}

template <typename Real>
Tensor2<Real> forward(const Block& block, Component component,
                      const ModelParams<Real>& params,
                      const ModelConfig& config) {
  const ForwardTape<Real> fwd = build_forward_tape(params, config);
  const NamedTensors<Real> inputs =
      make_forward_inputs<Real>(block, component, config);
  NamedTensors<Real> outputs =
      evaluate(fwd.tape, inputs, collect_params(params));
  return std::move(outputs.at("restored"));
}

template <typename Real>
PointCloud restore_cloud(const PointCloud& cloud,
                         std::span<const ModelParams<Real>* const> models,
                         const ModelConfig& config) {
  config.validate();
  cloud.validate();
  if (!cloud.has_qsteps())
    throw std::invalid_argument("restore_cloud: cloud has no qsteps");
  const std::size_t expected = config.joint_yuv ? 1 : 3;
  if (models.size() != expected)
    throw std::invalid_argument(
        "restore_cloud: expected " + std::to_string(expected) +
        " model(s), got " + std::to_string(models.size()));
  for (const auto* m : models)
    if (m == nullptr)
      throw std::invalid_argument("restore_cloud: null model");

  PointCloud yuv_cloud;
  yuv_cloud.coords = cloud.coords;
  yuv_cloud.attrs = rgb_to_yuv(cloud.attrs);
  yuv_cloud.qsteps = cloud.qsteps;

  std::vector<Block> blocks = partition_blocks(yuv_cloud, config.block_size);
  for (Block& block : blocks) {
    Block scaled = block;
    for (Index i = 0; i < scaled.cloud.attrs.size(); ++i)
      scaled.cloud.attrs.data()[i] /= 255.0f;

    Tensor2<float> restored(block.cloud.size(), 3);
    if (config.joint_yuv) {
      const Tensor2<Real> out =
          forward(scaled, Component::Y, *models[0], config);
      for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < 3; ++j)
          restored(i, j) = static_cast<float>(out(i, j)) * 255.0f;
    } else {
      for (int c = 0; c < 3; ++c) {
        const Tensor2<Real> out = forward(
            scaled, static_cast<Component>(c), *models[static_cast<std::size_t>(c)],
            config);
        for (Index i = 0; i < out.rows(); ++i)
          restored(i, static_cast<Index>(c)) =
              static_cast<float>(out(i, 0)) * 255.0f;
      }
    }
    block.cloud.attrs = std::move(restored);
  }

  PointCloud combined = combine_blocks(blocks);
  PointCloud result;
  result.coords = cloud.coords;
  result.attrs = yuv_to_rgb(combined.attrs);
  result.qsteps = cloud.qsteps;
  return result;
}

#define PCAR_INSTANTIATE(Real)                                                \
  template struct BranchParams<Real>;                                         \
  template struct ModelParams<Real>;                                          \
  template NamedTensors<Real> collect_params(const ModelParams<Real>&);       \
  template void assign_params(ModelParams<Real>&, const NamedTensors<Real>&); \
  template Index param_count(const ModelParams<Real>&);                       \
  template ModelParams<Real> build_model<Real>(const ModelConfig&);           \
  template ForwardTape<Real> build_forward_tape(const ModelParams<Real>&,     \
                                                const ModelConfig&);          \
  template NamedTensors<Real> make_forward_inputs<Real>(const Block&,         \
                                                        Component,            \
                                                        const ModelConfig&);  \
  template Tensor2<Real> forward(const Block&, Component,                     \
                                 const ModelParams<Real>&,                    \
                                 const ModelConfig&);                         \
  template PointCloud restore_cloud(                                          \
      const PointCloud&, std::span<const ModelParams<Real>* const>,           \
      const ModelConfig&);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
