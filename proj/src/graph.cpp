#include "pcar/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "pcar/rng.hpp"

namespace pcar {

template <typename Real>
GraphOperator<Real> build_adjacency(const Tensor2<Real>& coords) {
  const Index n = coords.rows();
  if (n < 1) throw std::invalid_argument("build_adjacency: empty input");
  GraphOperator<Real> g;
  g.n = n;
  g.adjacency = Tensor2<Real>(n, n);
  g.degrees = Tensor2<Real>(n, 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (Index c = 0; c < coords.cols(); ++c) {
        const double d = static_cast<double>(coords(i, c)) -
                         static_cast<double>(coords(j, c));
        sq += d * d;
      }
      const Real a = static_cast<Real>(std::exp(-sq));
      g.adjacency(i, j) = a;
      g.adjacency(j, i) = a;
    }
  }
  for (Index i = 0; i < n; ++i) {
    Real d = Real(0);
    for (Index j = 0; j < n; ++j) d += g.adjacency(i, j);
    g.degrees(i, 0) = d;
  }
  return g;
}

template <typename Real>
Tensor2<Real> normalized_laplacian(const Tensor2<Real>& adjacency,
                                   const Tensor2<Real>& degrees) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n || degrees.rows() != n || degrees.cols() != 1)
    throw std::invalid_argument("normalized_laplacian: bad shapes");
  std::vector<Real> inv_sqrt(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Real d = degrees(i, 0);
    if (!(d > Real(0)))
      throw std::invalid_argument("normalized_laplacian: zero degree at row " +
                                  std::to_string(i));
    inv_sqrt[static_cast<std::size_t>(i)] = Real(1) / std::sqrt(d);
  }
  Tensor2<Real> lap(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Real norm = inv_sqrt[static_cast<std::size_t>(i)] *
                        adjacency(i, j) *
                        inv_sqrt[static_cast<std::size_t>(j)];
      lap(i, j) = (i == j ? Real(1) : Real(0)) - norm;
    }
  return lap;
}

template <typename Real>
GraphOperator<Real> build_graph(const Tensor2<Real>& coords, bool rescale) {
  GraphOperator<Real> g = build_adjacency(coords);
  if (g.n == 1) {
    g.laplacian = Tensor2<Real>(1, 1);  // degenerate: single zero
    return g;
  }
  g.laplacian = normalized_laplacian(g.adjacency, g.degrees);
  if (rescale) g.lambda_max = power_iteration_lambda_max(g.laplacian);
  return g;
}

template <typename Real>
Real power_iteration_lambda_max(const Tensor2<Real>& sym, int iters,
                                double tol) {
  const Index n = sym.rows();
  if (sym.cols() != n || n < 1)
    throw std::invalid_argument("power_iteration_lambda_max: not square");
  // Deterministic pseudo-random start breaks unlucky orthogonal alignments.
  Rng rng(0x9e3779b97f4a7c15ULL);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(0.5, 1.5);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;

  // Rayleigh-quotient power iteration with a residual stop. For a symmetric
  // matrix the residual ||S v - lambda v|| bounds the distance from lambda
  // to the nearest eigenvalue, so iterating until it clears tol certifies
  // the estimate; the residual is then added so the result errs high, the
  // safe direction when the value rescales a spectrum into [-1, 1].
  std::vector<double> w(static_cast<std::size_t>(n));
  double lambda = 0.0, residual = 0.0;
  for (int it = 0; it < iters; ++it) {
    for (Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Index j = 0; j < n; ++j)
        s += static_cast<double>(sym(i, j)) * v[static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i)] = s;
    }
    double rayleigh = 0.0, wn2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      rayleigh += v[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
      wn2 += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    }
    lambda = rayleigh;
    // ||w - lambda v||^2 = ||w||^2 - lambda^2 when v is a unit vector
    residual = std::sqrt(std::max(0.0, wn2 - rayleigh * rayleigh));
    if (residual <= tol * std::max(std::abs(rayleigh), 1e-300)) break;
    const double wn = std::sqrt(wn2);
    if (wn == 0.0) return Real(0);  // operator annihilates the start vector
    for (auto& x : w) x /= wn;
    v.swap(w);
  }
  return static_cast<Real>(lambda + residual);
}

template <typename Real>
Tensor2<Real> cheb_operator(const GraphOperator<Real>& graph) {
  if (!graph.lambda_max) return graph.laplacian;
  const Real lam = *graph.lambda_max;
  if (!(lam > Real(0)))
    throw std::invalid_argument("cheb_operator: lambda_max must be positive");
  Tensor2<Real> t = graph.laplacian;
  const Real s = Real(2) / lam;
  for (Index i = 0; i < t.rows(); ++i) {
    for (Index j = 0; j < t.cols(); ++j) t(i, j) *= s;
    t(i, i) -= Real(1);
  }
  return t;
}

namespace {

template <typename Real>
void check_cheb_shapes(Index n, const Tensor2<Real>& h,
                       std::size_t num_theta) {
  if (num_theta == 0) throw std::invalid_argument("cheb_apply: K must be >= 1");
  if (h.rows() != n)
    throw std::invalid_argument("cheb_apply: H has " +
                                std::to_string(h.rows()) +
                                " rows, Laplacian is " + shape_str(n, n));
}

}  // namespace

template <typename Real>
Tensor2<Real> cheb_apply(const Tensor2<Real>& laplacian, const Tensor2<Real>& h,
                         std::span<const Tensor2<Real>> theta) {
  check_cheb_shapes(laplacian.rows(), h, theta.size());
  // z holds Z_k H for the current k; only n x C_in panels are ever formed.
  Tensor2<Real> out = matmul(h, theta[0]);
  if (theta.size() == 1) return out;
  Tensor2<Real> z_prev = h;
  Tensor2<Real> z = matmul(laplacian, h);
  accumulate(out, matmul(z, theta[1]));
  for (std::size_t k = 2; k < theta.size(); ++k) {
    Tensor2<Real> z_next = matmul(laplacian, z);
    for (Index i = 0; i < z_next.size(); ++i)
      z_next.data()[i] = Real(2) * z_next.data()[i] - z_prev.data()[i];
    z_prev = std::move(z);
    z = std::move(z_next);
    accumulate(out, matmul(z, theta[k]));
  }
  return out;
}

template <typename Real>
NodeId cheb_apply_node(Tape<Real>& tape, NodeId laplacian, NodeId h,
                       std::span<const NodeId> theta) {
  if (theta.empty())
    throw std::invalid_argument("cheb_apply_node: K must be >= 1");
  NodeId out = tape.matmul(h, theta[0]);
  if (theta.size() == 1) return out;
  NodeId z_prev = h;
  NodeId z = tape.matmul(laplacian, h);
  out = tape.add(out, tape.matmul(z, theta[1]));
  for (std::size_t k = 2; k < theta.size(); ++k) {
    NodeId z_next = tape.add(tape.scale(tape.matmul(laplacian, z), Real(2)),
                             tape.scale(z_prev, Real(-1)));
    z_prev = z;
    z = z_next;
    out = tape.add(out, tape.matmul(z, theta[k]));
  }
  return out;
}

template <typename Real>
Tensor2<Real> spectral_filter_oracle(const Tensor2<Real>& laplacian,
                                     const Tensor2<Real>& h,
                                     std::span<const Tensor2<Real>> theta) {
  const Index n = laplacian.rows();
  if (laplacian.cols() != n)
    throw std::invalid_argument("spectral_filter_oracle: not square");
  if (n > 64)
    throw std::invalid_argument(
        "spectral_filter_oracle: n > 64 (reference path is dense)");
  check_cheb_shapes(n, h, theta.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j)
      if (std::abs(static_cast<double>(laplacian(i, j)) -
                   static_cast<double>(laplacian(j, i))) > 1e-12)
        throw std::invalid_argument("spectral_filter_oracle: not symmetric");

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  Mat lap(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      lap(i, j) = static_cast<double>(laplacian(i, j));
  Eigen::SelfAdjointEigenSolver<Mat> eig(lap);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("spectral_filter_oracle: eigensolver failed");
  const Mat& u = eig.eigenvectors();
  const Eigen::VectorXd& lam = eig.eigenvalues();

  Mat hm(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j)
      hm(i, j) = static_cast<double>(h(i, j));
  const Mat uth = u.transpose() * hm;

  const Index c_out = theta[0].cols();
  Mat acc = Mat::Zero(n, c_out);
  // Chebyshev polynomial values on the spectrum, advanced per k.
  Eigen::VectorXd t_prev = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd t_cur = lam;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const Eigen::VectorXd& tk = (k == 0) ? t_prev : t_cur;
    Mat thm(theta[k].rows(), theta[k].cols());
    for (Index i = 0; i < theta[k].rows(); ++i)
      for (Index j = 0; j < theta[k].cols(); ++j)
        thm(i, j) = static_cast<double>(theta[k](i, j));
    acc += u * (tk.asDiagonal() * uth) * thm;
    if (k >= 1) {
      const Eigen::VectorXd t_next =
          2.0 * lam.cwiseProduct(t_cur) - t_prev;
      t_prev = t_cur;
      t_cur = t_next;
    }
  }

  Tensor2<Real> out(n, c_out);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < c_out; ++j)
      out(i, j) = static_cast<Real>(acc(i, j));
  return out;
}

#define PCAR_INSTANTIATE(Real)                                               \
  template struct GraphOperator<Real>;                                       \
  template GraphOperator<Real> build_adjacency(const Tensor2<Real>&);        \
  template Tensor2<Real> normalized_laplacian(const Tensor2<Real>&,          \
                                              const Tensor2<Real>&);         \
  template GraphOperator<Real> build_graph(const Tensor2<Real>&, bool);      \
  template Real power_iteration_lambda_max(const Tensor2<Real>&, int,        \
                                           double);                          \
  template Tensor2<Real> cheb_operator(const GraphOperator<Real>&);          \
  template Tensor2<Real> cheb_apply(const Tensor2<Real>&,                    \
                                    const Tensor2<Real>&,                    \
                                    std::span<const Tensor2<Real>>);         \
  template NodeId cheb_apply_node(Tape<Real>&, NodeId, NodeId,               \
                                  std::span<const NodeId>);                  \
  template Tensor2<Real> spectral_filter_oracle(                             \
      const Tensor2<Real>&, const Tensor2<Real>&,                            \
      std::span<const Tensor2<Real>>);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
