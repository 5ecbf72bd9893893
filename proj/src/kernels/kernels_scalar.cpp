// SPDX-License-Identifier: Apache-2.0
#include "kernels_impl.hpp"

namespace rhnlm::kernels::detail {
namespace {

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
Real sum_squares(const Real* a, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

template <typename Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename Real>
void gemv(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y,
          bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real v = dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + v : v;
  }
}

template <typename Real>
void gemv_t(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != Real(0)) axpy(x[r], a + r * cols, y, cols);
  }
}

template <typename Real>
void ger(Real* a, std::size_t rows, std::size_t cols, const Real* x, const Real* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != Real(0)) axpy(x[r], y, a + r * cols, cols);
  }
}

template <typename Real>
constexpr KernelTable<Real> kTable{&dot<Real>,  &sum_squares<Real>, &axpy<Real>,
                                   &gemv<Real>, &gemv_t<Real>,      &ger<Real>};

}  // namespace

template <typename Real>
const KernelTable<Real>& scalar_table() {
  return kTable<Real>;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace rhnlm::kernels::detail
