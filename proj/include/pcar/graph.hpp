#pragma once

#include <optional>
#include <span>

#include "pcar/tape.hpp"
#include "pcar/tensor.hpp"

namespace pcar {

// Complete graph over a block's points with Gaussian edge weights, plus its
// symmetric normalized Laplacian. lambda_max is filled only when the
// conventional rescaled Chebyshev operator is requested.
template <typename Real>
struct GraphOperator {
  Index n = 0;
  Tensor2<Real> adjacency;  // n x n, symmetric, zero diagonal
  Tensor2<Real> degrees;    // n x 1 row sums of adjacency
  Tensor2<Real> laplacian;  // n x n, I - D^{-1/2} A D^{-1/2}
  std::optional<Real> lambda_max;
};

// a_ij = exp(-||x_i - x_j||^2) for i != j, zero diagonal; coords should be
// block-normalized so the distances are O(1). Fills n, adjacency, degrees.
// n = 1 yields the degenerate operator (single zero entry everywhere).
template <typename Real>
GraphOperator<Real> build_adjacency(const Tensor2<Real>& coords);

// L = I - D^{-1/2} A D^{-1/2}. Throws when any degree is zero.
template <typename Real>
Tensor2<Real> normalized_laplacian(const Tensor2<Real>& adjacency,
                                   const Tensor2<Real>& degrees);

// Full construction: adjacency, degrees, Laplacian, and (when rescale is
// set) lambda_max by power iteration.
template <typename Real>
GraphOperator<Real> build_graph(const Tensor2<Real>& coords,
                                bool rescale = false);

// Largest eigenvalue of a symmetric PSD matrix by Rayleigh-quotient power
// iteration (deterministic start vector, at most `iters` rounds, early stop
// once the residual certifies `tol` relative accuracy). The certified
// residual is added to the estimate, so the result errs slightly high — the
// safe direction when it rescales a spectrum into [-1, 1].
template <typename Real>
Real power_iteration_lambda_max(const Tensor2<Real>& sym, int iters = 2000,
                                double tol = 1e-9);

// The matrix the Chebyshev recurrence runs on: the Laplacian itself by
// default, or 2 L / lambda_max - I when lambda_max is present.
template <typename Real>
Tensor2<Real> cheb_operator(const GraphOperator<Real>& graph);

// H' = sum_{k=0}^{K-1} Z_k(L) H Theta_k with Z_0 = I, Z_1 = L and
// Z_k = 2 L Z_{k-1} - Z_{k-2}, evaluated by recurring on Z_k H directly so
// no Z_k matrix is ever materialized.
template <typename Real>
Tensor2<Real> cheb_apply(const Tensor2<Real>& laplacian, const Tensor2<Real>& h,
                         std::span<const Tensor2<Real>> theta);

// The same computation recorded on a tape, differentiable w.r.t. H and every
// Theta_k. `laplacian` must be a node holding the (constant) operator.
template <typename Real>
NodeId cheb_apply_node(Tape<Real>& tape, NodeId laplacian, NodeId h,
                       std::span<const NodeId> theta);

// Reference implementation of the filter through an explicit symmetric
// eigendecomposition: sum_k U T_k(Lambda) U^T H Theta_k. Dense and O(n^3);
// restricted to n <= 64 and used to certify cheb_apply in tests. Throws on
// non-symmetric input.
template <typename Real>
Tensor2<Real> spectral_filter_oracle(const Tensor2<Real>& laplacian,
                                     const Tensor2<Real>& h,
                                     std::span<const Tensor2<Real>> theta);

}  // namespace pcar
