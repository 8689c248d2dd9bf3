#pragma once

#include "pcar/tape.hpp"

namespace pcar {

// Adam optimizer state. First/second moment tensors are keyed by param name
// and created lazily on the first step that sees the param.
template <typename Real>
struct AdamState {
  Real lr = Real(1e-5);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
  std::int64_t step = 0;
  NamedTensors<Real> m;
  NamedTensors<Real> v;
};

// One Adam update with bias correction:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Every entry in `grads` must have a matching same-shaped entry in `params`.
template <typename Real>
void adam_step(NamedTensors<Real>& params, const NamedTensors<Real>& grads,
               AdamState<Real>& state);

}  // namespace pcar
