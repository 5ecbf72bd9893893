// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/hsg.hpp"

#include <string>

namespace rhnlm {

template <typename Real>
HsgParams<Real> make_hsg_params(std::size_t hidden) {
  require(hidden >= 1, "hsg: hidden size must be positive");
  HsgParams<Real> p;
  p.w_r = Matrix<Real>(hidden, hidden);
  p.w_f = Matrix<Real>(hidden, hidden);
  p.b_g.assign(hidden, Real(0));
  return p;
}

template <typename Real>
void validate(const HsgParams<Real>& p) {
  const std::size_t n = p.hidden();
  require(n >= 1, "hsg: empty gate bias");
  require(p.w_r.rows() == n && p.w_r.cols() == n, "hsg: W_R must be " + std::to_string(n) +
                                                      "x" + std::to_string(n));
  require(p.w_f.rows() == n && p.w_f.cols() == n, "hsg: W_F must be " + std::to_string(n) +
                                                      "x" + std::to_string(n));
}

template <typename Real>
HsgStepCache<Real> hsg_forward(std::span<const Real> s_hat_prev, std::span<const Real> s_l,
                               const HsgParams<Real>& params) {
  const std::size_t n = params.hidden();
  require(s_hat_prev.size() == n && s_l.size() == n, "hsg: state size does not match gate size");
  HsgStepCache<Real> cache;
  cache.s_hat_prev.assign(s_hat_prev.begin(), s_hat_prev.end());
  cache.s_l.assign(s_l.begin(), s_l.end());
  cache.g = params.b_g;
  matvec_into<Real>(params.w_r, s_hat_prev, cache.g, true);
  matvec_into<Real>(params.w_f, s_l, cache.g, true);
  cache.s_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real g = sigmoid(cache.g[i]);
    cache.g[i] = g;
    cache.s_hat[i] = g * s_hat_prev[i] + (Real(1) - g) * s_l[i];
  }
  return cache;
}

template <typename Real>
HsgBackward<Real> hsg_backward(std::span<const Real> grad_s_hat, const HsgStepCache<Real>& cache,
                               const HsgParams<Real>& params, HsgParams<Real>& grads) {
  const std::size_t n = params.hidden();
  require(grad_s_hat.size() == n && cache.g.size() == n, "hsg: cache does not match parameters");
  require(grads.hidden() == n, "hsg: gradient buffer shape mismatch");

  HsgBackward<Real> out;
  out.grad_s_hat_prev.resize(n);
  out.grad_s_l.resize(n);
  Vector<Real> da(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real g = cache.g[i];
    out.grad_s_hat_prev[i] = grad_s_hat[i] * g;
    out.grad_s_l[i] = grad_s_hat[i] * (Real(1) - g);
    const Real dg = grad_s_hat[i] * (cache.s_hat_prev[i] - cache.s_l[i]);
    da[i] = dg * sigmoid_grad_from_output(g);
  }
  matvec_transposed_acc<Real>(params.w_r, da, out.grad_s_hat_prev);
  matvec_transposed_acc<Real>(params.w_f, da, out.grad_s_l);
  outer_acc<Real>(grads.w_r, da, cache.s_hat_prev);
  outer_acc<Real>(grads.w_f, da, cache.s_l);
  axpy<Real>(Real(1), da, grads.b_g);
  return out;
}

template <typename Real>
Vector<Real> collect_gate_values(std::span<const HsgStepCache<Real>> caches) {
  Vector<Real> out;
  if (!caches.empty()) out.reserve(caches.size() * caches.front().g.size());
  for (const auto& c : caches) out.insert(out.end(), c.g.begin(), c.g.end());
  return out;
}

#define RHNLM_INSTANTIATE_HSG(Real)                                                           \
  template HsgParams<Real> make_hsg_params<Real>(std::size_t);                                \
  template void validate(const HsgParams<Real>&);                                             \
  template HsgStepCache<Real> hsg_forward(std::span<const Real>, std::span<const Real>,       \
                                          const HsgParams<Real>&);                            \
  template HsgBackward<Real> hsg_backward(std::span<const Real>, const HsgStepCache<Real>&,   \
                                          const HsgParams<Real>&, HsgParams<Real>&);          \
  template Vector<Real> collect_gate_values(std::span<const HsgStepCache<Real>>);

RHNLM_INSTANTIATE_HSG(float)
RHNLM_INSTANTIATE_HSG(double)

#undef RHNLM_INSTANTIATE_HSG

}  // namespace rhnlm
