// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense linear-algebra substrate. Matrices are row-major; vectors
// are plain std::vector. All products route through the runtime-selected
// kernel table.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "rhnlm/errors.hpp"

namespace rhnlm {

template <typename Real>
using Vector = std::vector<Real>;

template <typename Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = Real(1);
    return m;
  }

  // Rows must all have the same length.
  static Matrix from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    Matrix m;
    m.rows_ = rows.size();
    m.cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
    m.data_.reserve(m.rows_ * m.cols_);
    for (const auto& r : rows) {
      require(r.size() == m.cols_, "tensor_core: ragged rows in Matrix::from_rows");
      m.data_.insert(m.data_.end(), r.begin(), r.end());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }
  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

template <typename Real>
Vector<Real> matvec(const Matrix<Real>& m, std::span<const Real> v);

// out = m v (accumulate=false) or out += m v.
template <typename Real>
void matvec_into(const Matrix<Real>& m, std::span<const Real> v, std::span<Real> out,
                 bool accumulate);

// out += m^T v
template <typename Real>
void matvec_transposed_acc(const Matrix<Real>& m, std::span<const Real> v, std::span<Real> out);

// m += x y^T
template <typename Real>
void outer_acc(Matrix<Real>& m, std::span<const Real> x, std::span<const Real> y);

// y += alpha x
template <typename Real>
void axpy(Real alpha, std::span<const Real> x, std::span<Real> y);

template <typename Real>
Real dot(std::span<const Real> a, std::span<const Real> b);

template <typename Real>
Real sum_squares(std::span<const Real> a);

template <typename Real>
inline Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real>
Vector<Real> sigmoid(std::span<const Real> v);

template <typename Real>
Vector<Real> tanh(std::span<const Real> v);

// Derivatives expressed through the activation outputs.
template <typename Real>
inline Real sigmoid_grad_from_output(Real y) {
  return y * (Real(1) - y);
}

template <typename Real>
inline Real tanh_grad_from_output(Real y) {
  return Real(1) - y * y;
}

template <typename Real>
struct XentResult {
  Real loss = 0;
  Vector<Real> grad;  // softmax(logits) - onehot(target)
};

template <typename Real>
XentResult<Real> softmax_xent(std::span<const Real> logits, std::size_t target);

// Deduction-friendly overloads for owning vectors.
template <typename Real>
Vector<Real> matvec(const Matrix<Real>& m, const Vector<Real>& v) {
  return matvec(m, std::span<const Real>(v));
}

template <typename Real>
Vector<Real> sigmoid(const Vector<Real>& v) {
  return sigmoid(std::span<const Real>(v));
}

template <typename Real>
Vector<Real> tanh(const Vector<Real>& v) {
  return tanh(std::span<const Real>(v));
}

template <typename Real>
XentResult<Real> softmax_xent(const Vector<Real>& logits, std::size_t target) {
  return softmax_xent(std::span<const Real>(logits), target);
}

// Throws NumericalError naming `what` if any entry is NaN or infinite.
template <typename Real>
void check_finite(std::span<const Real> values, const std::string& what);

}  // namespace rhnlm
