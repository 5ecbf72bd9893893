// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/tensor.hpp"

#include <algorithm>

#include "rhnlm/kernels.hpp"

namespace rhnlm {

template <typename Real>
Vector<Real> matvec(const Matrix<Real>& m, std::span<const Real> v) {
  Vector<Real> out(m.rows());
  matvec_into<Real>(m, v, out, false);
  return out;
}

template <typename Real>
void matvec_into(const Matrix<Real>& m, std::span<const Real> v, std::span<Real> out,
                 bool accumulate) {
  if (m.cols() != v.size() || m.rows() != out.size()) {
    throw ContractError("tensor_core: matvec dimension mismatch (" + std::to_string(m.rows()) +
                        "x" + std::to_string(m.cols()) + " times " + std::to_string(v.size()) +
                        " into " + std::to_string(out.size()) + ")");
  }
  kernels::active<Real>().gemv(m.data(), m.rows(), m.cols(), v.data(), out.data(), accumulate);
}

template <typename Real>
void matvec_transposed_acc(const Matrix<Real>& m, std::span<const Real> v, std::span<Real> out) {
  if (m.rows() != v.size() || m.cols() != out.size()) {
    throw ContractError("tensor_core: transposed matvec dimension mismatch");
  }
  kernels::active<Real>().gemv_t(m.data(), m.rows(), m.cols(), v.data(), out.data());
}

template <typename Real>
void outer_acc(Matrix<Real>& m, std::span<const Real> x, std::span<const Real> y) {
  if (m.rows() != x.size() || m.cols() != y.size()) {
    throw ContractError("tensor_core: outer product dimension mismatch");
  }
  kernels::active<Real>().ger(m.data(), m.rows(), m.cols(), x.data(), y.data());
}

template <typename Real>
void axpy(Real alpha, std::span<const Real> x, std::span<Real> y) {
  require(x.size() == y.size(), "tensor_core: axpy length mismatch");
  kernels::active<Real>().axpy(alpha, x.data(), y.data(), x.size());
}

template <typename Real>
Real dot(std::span<const Real> a, std::span<const Real> b) {
  require(a.size() == b.size(), "tensor_core: dot length mismatch");
  return kernels::active<Real>().dot(a.data(), b.data(), a.size());
}

template <typename Real>
Real sum_squares(std::span<const Real> a) {
  return kernels::active<Real>().sum_squares(a.data(), a.size());
}

template <typename Real>
Vector<Real> sigmoid(std::span<const Real> v) {
  Vector<Real> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](Real x) { return sigmoid(x); });
  return out;
}

template <typename Real>
Vector<Real> tanh(std::span<const Real> v) {
  Vector<Real> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](Real x) { return std::tanh(x); });
  return out;
}

template <typename Real>
XentResult<Real> softmax_xent(std::span<const Real> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw ContractError("tensor_core: softmax_xent target " + std::to_string(target) +
                        " out of range for " + std::to_string(logits.size()) + " logits");
  }
  const Real max_logit = *std::max_element(logits.begin(), logits.end());
  XentResult<Real> r;
  r.grad.resize(logits.size());
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - max_logit);
    total += r.grad[i];
  }
  r.loss = std::log(total) - (logits[target] - max_logit);
  const Real inv = Real(1) / total;
  for (auto& g : r.grad) g *= inv;
  r.grad[target] -= Real(1);
  return r;
}

template <typename Real>
void check_finite(std::span<const Real> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

#define RHNLM_INSTANTIATE_TENSOR(Real)                                                         \
  template Vector<Real> matvec(const Matrix<Real>&, std::span<const Real>);                    \
  template void matvec_into(const Matrix<Real>&, std::span<const Real>, std::span<Real>, bool); \
  template void matvec_transposed_acc(const Matrix<Real>&, std::span<const Real>,              \
                                      std::span<Real>);                                         \
  template void outer_acc(Matrix<Real>&, std::span<const Real>, std::span<const Real>);        \
  template void axpy(Real, std::span<const Real>, std::span<Real>);                             \
  template Real dot(std::span<const Real>, std::span<const Real>);                              \
  template Real sum_squares(std::span<const Real>);                                             \
  template Vector<Real> sigmoid(std::span<const Real>);                                         \
  template Vector<Real> tanh(std::span<const Real>);                                            \
  template XentResult<Real> softmax_xent(std::span<const Real>, std::size_t);                   \
  template void check_finite(std::span<const Real>, const std::string&);

RHNLM_INSTANTIATE_TENSOR(float)
RHNLM_INSTANTIATE_TENSOR(double)

#undef RHNLM_INSTANTIATE_TENSOR

}  // namespace rhnlm
