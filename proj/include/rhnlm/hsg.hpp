// SPDX-License-Identifier: Apache-2.0
//
// Highway state gate: a per-neuron convex mix of the previous gated state and
// the current highway-cell output.
//
//   g      = sigm(W_R s_hat_prev + W_F s_L + b_G)
//   s_hat  = g * s_hat_prev + (1 - g) * s_L
//
// g = 0 reduces to the plain highway cell; g = 1 copies the previous state.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rhnlm/tensor.hpp"

namespace rhnlm {

template <typename Real>
struct HsgParams {
  Matrix<Real> w_r;  // applied to the previous gated state
  Matrix<Real> w_f;  // applied to the highway-cell output
  Vector<Real> b_g;

  std::size_t hidden() const { return b_g.size(); }
};

template <typename Real>
HsgParams<Real> make_hsg_params(std::size_t hidden);

template <typename Real>
void validate(const HsgParams<Real>& p);

template <typename Real>
struct HsgStepCache {
  Vector<Real> s_hat_prev;
  Vector<Real> s_l;
  Vector<Real> g;
  Vector<Real> s_hat;
};

template <typename Real>
HsgStepCache<Real> hsg_forward(std::span<const Real> s_hat_prev, std::span<const Real> s_l,
                               const HsgParams<Real>& params);

template <typename Real>
struct HsgBackward {
  Vector<Real> grad_s_hat_prev;
  Vector<Real> grad_s_l;
};

// Parameter gradients are added into `grads`.
template <typename Real>
HsgBackward<Real> hsg_backward(std::span<const Real> grad_s_hat, const HsgStepCache<Real>& cache,
                               const HsgParams<Real>& params, HsgParams<Real>& grads);

// Concatenates the gate vectors of every cache, in order.
template <typename Real>
Vector<Real> collect_gate_values(std::span<const HsgStepCache<Real>> caches);

}  // namespace rhnlm
