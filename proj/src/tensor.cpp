#include "pcar/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pcar {

namespace {

template <typename Real>
using EigenRowMajor =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
Eigen::Map<const EigenRowMajor<Real>> as_eigen(const Tensor2<Real>& t) {
  return {t.data(), t.rows(), t.cols()};
}

template <typename Real>
Eigen::Map<EigenRowMajor<Real>> as_eigen(Tensor2<Real>& t) {
  return {t.data(), t.rows(), t.cols()};
}

[[noreturn]] void shape_error(const std::string& op, Index ar, Index ac,
                              Index br, Index bc) {
  throw std::invalid_argument(op + ": incompatible shapes " +
                              shape_str(ar, ac) + " and " + shape_str(br, bc));
}

}  // namespace

std::string shape_str(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Real>
Tensor2<Real> Tensor2<Real>::from_rows(
    std::initializer_list<std::initializer_list<Real>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
  Tensor2 t(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c)
      throw std::invalid_argument("from_rows: ragged rows");
    Index j = 0;
    for (Real v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

template <typename Real>
bool Tensor2<Real>::all_finite() const {
  for (Real v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename Real>
Tensor2<Real> Tensor2<Real>::gather_rows(std::span<const Index> indices) const {
  Tensor2 out(static_cast<Index>(indices.size()), cols_);
  for (Index i = 0; i < out.rows(); ++i) {
    const Index src = indices[static_cast<std::size_t>(i)];
    if (src < 0 || src >= rows_)
      throw std::invalid_argument("gather_rows: index " + std::to_string(src) +
                                  " out of range for " + shape_str(rows_, cols_));
    for (Index j = 0; j < cols_; ++j) out(i, j) = (*this)(src, j);
  }
  return out;
}

template <typename Real>
Tensor2<Real> matmul(const Tensor2<Real>& a, const Tensor2<Real>& b) {
  if (a.cols() != b.rows())
    shape_error("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2<Real> out(a.rows(), b.cols());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
  return out;
}

template <typename Real>
Tensor2<Real> matmul_nt(const Tensor2<Real>& a, const Tensor2<Real>& b) {
  if (a.cols() != b.cols())
    shape_error("matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2<Real> out(a.rows(), b.rows());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b).transpose();
  return out;
}

template <typename Real>
Tensor2<Real> matmul_tn(const Tensor2<Real>& a, const Tensor2<Real>& b) {
  if (a.rows() != b.rows())
    shape_error("matmul_tn", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2<Real> out(a.cols(), b.cols());
  as_eigen(out).noalias() = as_eigen(a).transpose() * as_eigen(b);
  return out;
}

template <typename Real>
Tensor2<Real> add(const Tensor2<Real>& a, const Tensor2<Real>& b) {
  if (a.same_shape(b)) {
    Tensor2<Real> out = a;
    as_eigen(out) += as_eigen(b);
    return out;
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Tensor2<Real> out = a;
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) out(i, j) += b(0, j);
    return out;
  }
  shape_error("add", a.rows(), a.cols(), b.rows(), b.cols());
}

template <typename Real>
Tensor2<Real> hadamard(const Tensor2<Real>& a, const Tensor2<Real>& b) {
  if (!a.same_shape(b))
    shape_error("hadamard", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2<Real> out = a;
  for (Index i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

template <typename Real>
Tensor2<Real> relu(const Tensor2<Real>& a) {
  Tensor2<Real> out = a;
  for (Index i = 0; i < out.size(); ++i)
    if (out.data()[i] < Real(0)) out.data()[i] = Real(0);
  return out;
}

template <typename Real>
Tensor2<Real> row_softmax(const Tensor2<Real>& a) {
  Tensor2<Real> out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    Real mx = a(i, 0);
    for (Index j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
    Real sum = Real(0);
    for (Index j = 0; j < a.cols(); ++j) {
      const Real e = std::exp(a(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (Index j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

template <typename Real>
Tensor2<Real> concat_cols(std::span<const Tensor2<Real>* const> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index rows = parts[0]->rows();
  Index cols = 0;
  for (const auto* p : parts) {
    if (p->rows() != rows)
      shape_error("concat_cols", rows, parts[0]->cols(), p->rows(), p->cols());
    cols += p->cols();
  }
  Tensor2<Real> out(rows, cols);
  Index offset = 0;
  for (const auto* p : parts) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < p->cols(); ++j) out(i, offset + j) = (*p)(i, j);
    offset += p->cols();
  }
  return out;
}

template <typename Real>
Tensor2<Real> scale(const Tensor2<Real>& a, Real s) {
  Tensor2<Real> out = a;
  for (Index i = 0; i < out.size(); ++i) out.data()[i] *= s;
  return out;
}

template <typename Real>
Tensor2<Real> column_sums(const Tensor2<Real>& a) {
  Tensor2<Real> out(1, a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

template <typename Real>
void accumulate(Tensor2<Real>& into, const Tensor2<Real>& t) {
  if (!into.same_shape(t))
    shape_error("accumulate", into.rows(), into.cols(), t.rows(), t.cols());
  for (Index i = 0; i < into.size(); ++i) into.data()[i] += t.data()[i];
}

#define PCAR_INSTANTIATE(Real)                                                \
  template class Tensor2<Real>;                                               \
  template Tensor2<Real> matmul(const Tensor2<Real>&, const Tensor2<Real>&); \
  template Tensor2<Real> matmul_nt(const Tensor2<Real>&,                     \
                                   const Tensor2<Real>&);                     \
  template Tensor2<Real> matmul_tn(const Tensor2<Real>&,                     \
                                   const Tensor2<Real>&);                     \
  template Tensor2<Real> add(const Tensor2<Real>&, const Tensor2<Real>&);    \
  template Tensor2<Real> hadamard(const Tensor2<Real>&,                      \
                                  const Tensor2<Real>&);                      \
  template Tensor2<Real> relu(const Tensor2<Real>&);                         \
  template Tensor2<Real> row_softmax(const Tensor2<Real>&);                  \
  template Tensor2<Real> concat_cols(                                        \
      std::span<const Tensor2<Real>* const>);                                \
  template Tensor2<Real> scale(const Tensor2<Real>&, Real);                  \
  template Tensor2<Real> column_sums(const Tensor2<Real>&);                  \
  template void accumulate(Tensor2<Real>&, const Tensor2<Real>&);

PCAR_INSTANTIATE(float)
PCAR_INSTANTIATE(double)
#undef PCAR_INSTANTIATE

}  // namespace pcar
