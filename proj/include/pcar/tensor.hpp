#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pcar {

using Index = std::int64_t;

// Dense 2-D tensor, row-major. The value type is float on the training and
// inference path and double on oracle/check paths.
template <typename Real>
class Tensor2 {
public:
  Tensor2() = default;
  Tensor2(Index rows, Index cols)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows * cols), Real(0)) {}

  static Tensor2 full(Index rows, Index cols, Real value) {
    Tensor2 t(rows, cols);
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor2 identity(Index n) {
    Tensor2 t(n, n);
    for (Index i = 0; i < n; ++i) t(i, i) = Real(1);
    return t;
  }

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<Real>> rows);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  Real& operator()(Index r, Index c) {
    return data_[static_cast<std::size_t>(r * cols_ + c)];
  }
  Real operator()(Index r, Index c) const {
    return data_[static_cast<std::size_t>(r * cols_ + c)];
  }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  bool same_shape(const Tensor2& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const;

  template <typename Other>
  Tensor2<Other> cast() const {
    Tensor2<Other> out(rows_, cols_);
    for (Index i = 0; i < size(); ++i)
      out.data()[i] = static_cast<Other>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  // Row-gather: out.row(i) = this->row(indices[i]).
  Tensor2 gather_rows(std::span<const Index> indices) const;

  bool operator==(const Tensor2& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Real> data_;
};

std::string shape_str(Index rows, Index cols);

// Dense kernels shared by the tape and by eager callers. Shape violations
// throw std::invalid_argument.
template <typename Real>
Tensor2<Real> matmul(const Tensor2<Real>& a, const Tensor2<Real>& b);
// a * b^T and a^T * b, used by reverse-mode accumulation.
template <typename Real>
Tensor2<Real> matmul_nt(const Tensor2<Real>& a, const Tensor2<Real>& b);
template <typename Real>
Tensor2<Real> matmul_tn(const Tensor2<Real>& a, const Tensor2<Real>& b);

// Equal shapes, or b a 1 x C row broadcast down the rows of a. No other
// shape coercion is accepted.
template <typename Real>
Tensor2<Real> add(const Tensor2<Real>& a, const Tensor2<Real>& b);
template <typename Real>
Tensor2<Real> hadamard(const Tensor2<Real>& a, const Tensor2<Real>& b);
template <typename Real>
Tensor2<Real> relu(const Tensor2<Real>& a);
// Numerically stable softmax over each row (max subtraction before exp).
template <typename Real>
Tensor2<Real> row_softmax(const Tensor2<Real>& a);
template <typename Real>
Tensor2<Real> concat_cols(std::span<const Tensor2<Real>* const> parts);
template <typename Real>
Tensor2<Real> scale(const Tensor2<Real>& a, Real s);
template <typename Real>
Tensor2<Real> column_sums(const Tensor2<Real>& a);  // 1 x C
template <typename Real>
void accumulate(Tensor2<Real>& into, const Tensor2<Real>& t);  // into += t

}  // namespace pcar
