#include "pcar/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace pcar {

template <typename Real>
void adam_step(NamedTensors<Real>& params, const NamedTensors<Real>& grads,
               AdamState<Real>& state) {
  ++state.step;
  const Real bc1 = Real(1) - std::pow(state.beta1, Real(state.step));
  const Real bc2 = Real(1) - std::pow(state.beta2, Real(state.step));
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end())
      throw std::invalid_argument("adam_step: gradient for unknown param '" +
                                  name + "'");
    Tensor2<Real>& p = pit->second;
    if (!p.same_shape(g))
      throw std::invalid_argument(
          "adam_step: param '" + name + "' has shape " +
          shape_str(p.rows(), p.cols()) + " but gradient is " +
          shape_str(g.rows(), g.cols()));
    auto& m = state.m.try_emplace(name, p.rows(), p.cols()).first->second;
    auto& v = state.v.try_emplace(name, p.rows(), p.cols()).first->second;
    for (Index i = 0; i < p.size(); ++i) {
      const Real gi = g.data()[i];
      Real& mi = m.data()[i];
      Real& vi = v.data()[i];
      mi = state.beta1 * mi + (Real(1) - state.beta1) * gi;
      vi = state.beta2 * vi + (Real(1) - state.beta2) * gi * gi;
      const Real mhat = mi / bc1;
      const Real vhat = vi / bc2;
      p.data()[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

template void adam_step(NamedTensors<float>&, const NamedTensors<float>&,
                        AdamState<float>&);
template void adam_step(NamedTensors<double>&, const NamedTensors<double>&,
                        AdamState<double>&);

}  // namespace pcar
