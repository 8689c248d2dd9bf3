#include "pcar/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pcar/rng.hpp"

namespace pcar {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("train config: lr must be >= 0");
  // beta = 1 would zero Adam's bias-correction denominator
  if (!(beta1 >= 0.0 && beta1 < 1.0))
    throw std::invalid_argument("train config: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train config: beta2 must be in [0, 1)");
  if (batch_size < 1)
    throw std::invalid_argument("train config: batch_size must be >= 1");
  if (epochs < 1)
    throw std::invalid_argument("train config: epochs must be >= 1");
  if (qp_set.empty())
    throw std::invalid_argument("train config: qp_set must be non-empty");
}

template <typename Real>
Real mse_loss(const Tensor2<Real>& restored, const Tensor2<Real>& target) {
  if (!restored.same_shape(target))
    throw std::invalid_argument("mse_loss: shapes differ, " +
                                shape_str(restored.rows(), restored.cols()) +
                                " vs " +
                                shape_str(target.rows(), target.cols()));
  Real acc = Real(0);
  for (Index i = 0; i < restored.size(); ++i) {
    const Real d = restored.data()[i] - target.data()[i];
    acc += d * d;
  }
  return acc;
}

template float mse_loss(const Tensor2<float>&, const Tensor2<float>&);
template double mse_loss(const Tensor2<double>&, const Tensor2<double>&);

int qp_step(int qp) {
  const double step = std::pow(2.0, (static_cast<double>(qp) - 4.0) / 6.0);
  return std::max(1, static_cast<int>(std::llround(step)));
}

DegradeResult synth_degrade(const PointCloud& clean_yuv,
                            const std::vector<int>& qp_set,
                            std::uint64_t seed) {
  clean_yuv.validate();
  if (qp_set.empty())
    throw std::invalid_argument("synth_degrade: qp_set must be non-empty");
  for (Index i = 0; i < clean_yuv.attrs.size(); ++i) {
    const float v = clean_yuv.attrs.data()[i];
    if (!(v >= 0.0f && v <= 255.0f))
      throw std::invalid_argument(
          "synth_degrade: attributes must lie in [0,255]");
  }

  std::vector<float> steps;
  steps.reserve(qp_set.size());
  for (int qp : qp_set) steps.push_back(static_cast<float>(qp_step(qp)));

  Rng rng(seed);
  const Index n = clean_yuv.size();
  DegradeResult result;
  result.degraded.coords = clean_yuv.coords;
  result.degraded.attrs = Tensor2<float>(n, clean_yuv.attrs.cols());
  result.degraded.qsteps = Tensor2<float>(n, 1);
  result.targets = clean_yuv.attrs;
  for (Index i = 0; i < n; ++i) {
    const float q = steps[static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(steps.size())))];
    result.degraded.qsteps(i, 0) = q;
    for (Index j = 0; j < clean_yuv.attrs.cols(); ++j) {
      const double v = clean_yuv.attrs(i, j);
      const double quantized = std::round(v / q) * q;
      result.degraded.attrs(i, j) =
          static_cast<float>(std::clamp(quantized, 0.0, 255.0));
    }
  }
  return result;
}

std::vector<TrainSample> make_train_samples(const PointCloud& clean_yuv,
                                            const PointCloud& degraded_yuv,
                                            Component component,
                                            const ModelConfig& config) {
  clean_yuv.validate();
  degraded_yuv.validate();
  if (clean_yuv.size() != degraded_yuv.size())
    throw std::invalid_argument(
        "make_train_samples: clean and degraded sizes differ");
  if (!degraded_yuv.has_qsteps())
    throw std::invalid_argument(
        "make_train_samples: degraded cloud has no qsteps");

  std::vector<Block> degraded_blocks =
      partition_blocks(degraded_yuv, config.block_size);
  const std::vector<Block> clean_blocks =
      partition_blocks(clean_yuv, config.block_size);

  std::vector<TrainSample> samples;
  samples.reserve(degraded_blocks.size());
  for (std::size_t i = 0; i < degraded_blocks.size(); ++i) {
    TrainSample s;
    s.block = std::move(degraded_blocks[i]);
    for (Index k = 0; k < s.block.cloud.attrs.size(); ++k)
      s.block.cloud.attrs.data()[k] /= 255.0f;

    const Tensor2<float>& clean_attrs = clean_blocks[i].cloud.attrs;
    const Index n = clean_attrs.rows();
    if (config.joint_yuv) {
      s.target = Tensor2<float>(n, 3);
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < 3; ++c)
          s.target(r, c) = clean_attrs(r, c) / 255.0f;
    } else {
      const Index c = static_cast<Index>(component);
      s.target = Tensor2<float>(n, 1);
      for (Index r = 0; r < n; ++r) s.target(r, 0) = clean_attrs(r, c) / 255.0f;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

template <typename Real>
NodeId append_loss(Tape<Real>& tape, NodeId restored) {
  const Index n = tape.rows(restored);
  const Index c = tape.cols(restored);
  const NodeId target = tape.input("in.target", n, c);
  const NodeId ones_row = tape.input("in.ones_row", 1, n);
  const NodeId ones_col = tape.input("in.ones_col", c, 1);
  const NodeId diff = tape.add(restored, tape.scale(target, Real(-1)));
  const NodeId sq = tape.hadamard(diff, diff);
  const NodeId loss = tape.matmul(ones_row, tape.matmul(sq, ones_col));
  tape.mark_output("loss", loss);
  return loss;
}

template <typename Real>
void add_loss_inputs(NamedTensors<Real>& inputs, const Tensor2<Real>& target) {
  inputs.emplace("in.target", target);
  inputs.emplace("in.ones_row",
                 Tensor2<Real>::full(1, target.rows(), Real(1)));
  inputs.emplace("in.ones_col",
                 Tensor2<Real>::full(target.cols(), 1, Real(1)));
}

namespace {

template <typename Real>
NamedTensors<Real> sample_inputs(const TrainSample& sample,
                                 const ModelConfig& config,
                                 Component component) {
  NamedTensors<Real> inputs =
      make_forward_inputs<Real>(sample.block, component, config);
  add_loss_inputs(inputs, sample.target.template cast<Real>());
  return inputs;
}

}  // namespace

template <typename Real>
std::vector<double> train(const std::vector<TrainSample>& dataset,
                          ModelParams<Real>& model,
                          const ModelConfig& model_config,
                          const TrainConfig& train_config) {
  train_config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  ForwardTape<Real> fwd = build_forward_tape(model, model_config);
  append_loss(fwd.tape, fwd.restored);

  NamedTensors<Real> values = collect_params(model);
  AdamState<Real> state;
  state.lr = static_cast<Real>(train_config.lr);
  state.beta1 = static_cast<Real>(train_config.beta1);
  state.beta2 = static_cast<Real>(train_config.beta2);

  Rng shuffle_rng(train_config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(train_config.epochs));
  for (Index epoch = 0; epoch < train_config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(),
                   pos + static_cast<std::size_t>(train_config.batch_size));
      const Real batch_n = static_cast<Real>(batch_end - pos);

      NamedTensors<Real> grad_sum;
      for (; pos < batch_end; ++pos) {
        const TrainSample& sample = dataset[order[pos]];
        const auto inputs =
            sample_inputs<Real>(sample, model_config, train_config.component);
        LossAndGradients<Real> lg =
            loss_and_gradients(fwd.tape, "loss", inputs, values);
        epoch_loss += static_cast<double>(lg.loss);
        if (grad_sum.empty()) {
          grad_sum = std::move(lg.grads);
        } else {
          for (auto& [name, g] : lg.grads)
            accumulate(grad_sum.at(name), g);
        }
      }
      for (auto& [name, g] : grad_sum) g = scale(g, Real(1) / batch_n);
      adam_step(values, grad_sum, state);
    }
    history.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }

  assign_params(model, values);
  return history;
}

template std::vector<double> train(const std::vector<TrainSample>&,
                                   ModelParams<float>&, const ModelConfig&,
                                   const TrainConfig&);
template std::vector<double> train(const std::vector<TrainSample>&,
                                   ModelParams<double>&, const ModelConfig&,
                                   const TrainConfig&);
template NodeId append_loss(Tape<float>&, NodeId);
template NodeId append_loss(Tape<double>&, NodeId);
template void add_loss_inputs(NamedTensors<float>&, const Tensor2<float>&);
template void add_loss_inputs(NamedTensors<double>&, const Tensor2<double>&);

double gradient_check(const ModelParams<double>& model,
                      const TrainSample& sample, const ModelConfig& config,
                      double step, Index per_kind, std::uint64_t seed) {
  ForwardTape<double> fwd = build_forward_tape(model, config);
  append_loss(fwd.tape, fwd.restored);
  const auto inputs = sample_inputs<double>(sample, config, Component::Y);

  NamedTensors<double> values = collect_params(model);
  // A zero final head layer would zero all upstream gradients; give it
  // deterministic nonzero values so the check exercises the whole network.
  Rng fill_rng(seed ^ 0x5bd1e995u);
  const std::string last_head =
      "head.l" + std::to_string(model.head.size() - 1) + ".";
  for (auto& [name, t] : values) {
    if (name.rfind(last_head, 0) != 0) continue;
    bool all_zero = true;
    for (Index i = 0; i < t.size() && all_zero; ++i)
      all_zero = t.data()[i] == 0.0;
    if (all_zero)
      for (Index i = 0; i < t.size(); ++i)
        t.data()[i] = fill_rng.uniform(-0.2, 0.2);
  }

  const LossAndGradients<double> analytic =
      loss_and_gradients(fwd.tape, "loss", inputs, values);

  // Bucket parameter names by layer kind.
  std::vector<std::string> cheb_names, attention_names, mlp_names;
  for (const auto& [name, t] : values) {
    if (name.find(".delta.") != std::string::npos ||
        name.find(".gamma.") != std::string::npos ||
        name.find(".phi.") != std::string::npos) {
      attention_names.push_back(name);
    } else if (name.find(".bottleneck.") != std::string::npos) {
      mlp_names.push_back(name);
    } else {
      cheb_names.push_back(name);
    }
  }

  Rng pick_rng(seed);
  auto eval_loss = [&](const NamedTensors<double>& params) {
    return evaluate(fwd.tape, inputs, params).at("loss")(0, 0);
  };

  double max_rel = 0.0;
  NamedTensors<double> perturbed = values;
  for (const auto* bucket : {&cheb_names, &attention_names, &mlp_names}) {
    if (bucket->empty()) continue;
    for (Index pick = 0; pick < per_kind; ++pick) {
      const std::string& name = (*bucket)[static_cast<std::size_t>(
          pick_rng.uniform_int(static_cast<std::int64_t>(bucket->size())))];
      Tensor2<double>& t = perturbed.at(name);
      const Index flat = pick_rng.uniform_int(t.size());
      const double saved = t.data()[flat];

      t.data()[flat] = saved + step;
      const double plus = eval_loss(perturbed);
      t.data()[flat] = saved - step;
      const double minus = eval_loss(perturbed);
      t.data()[flat] = saved;

      const double fd = (plus - minus) / (2.0 * step);
      const double an = analytic.grads.at(name).data()[flat];
      const double denom = std::max(std::abs(fd), std::abs(an));
      if (denom < 1e-8) continue;  // both effectively zero
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  return max_rel;
}

}  // namespace pcar
