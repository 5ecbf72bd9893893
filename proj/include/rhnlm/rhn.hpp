// SPDX-License-Identifier: Apache-2.0
//
// Recurrent highway transition: L stacked highway layers per time step.
//
//   h_l = tanh(W_H x [l=1] + R_Hl s_{l-1} + b_Hl)
//   t_l = sigm(W_T x [l=1] + R_Tl s_{l-1} + b_Tl)
//   c_l = sigm(W_C x [l=1] + R_Cl s_{l-1} + b_Cl)     or 1 - t_l when coupled
//   s_l = h_l * t_l + s_{l-1} * c_l
//
// The input x enters only the first layer. Coupled cells carry no C weights.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rhnlm/tensor.hpp"

namespace rhnlm {

template <typename Real>
struct RhnLayerParams {
  std::size_t index = 1;  // 1-based position in the stack
  Matrix<Real> r_h, r_t, r_c;
  Vector<Real> b_h, b_t, b_c;

  std::size_t hidden() const { return b_h.size(); }
  bool has_carry_gate() const { return !b_c.empty(); }
};

template <typename Real>
struct RhnInputParams {
  Matrix<Real> w_h, w_t, w_c;

  std::size_t input_size() const { return w_h.cols(); }
};

template <typename Real>
struct RhnParams {
  RhnInputParams<Real> input;
  std::vector<RhnLayerParams<Real>> layers;

  std::size_t depth() const { return layers.size(); }
  std::size_t hidden() const { return layers.empty() ? 0 : layers.front().hidden(); }
  std::size_t input_size() const { return input.input_size(); }
};

// Zero-filled parameters of the given shape.
template <typename Real>
RhnParams<Real> make_rhn_params(std::size_t depth, std::size_t hidden, std::size_t input,
                                bool coupled);

template <typename Real>
RhnParams<Real> zeros_like(const RhnParams<Real>& p);

// Throws ContractError if shapes are inconsistent with the coupling flag.
template <typename Real>
void validate(const RhnParams<Real>& p, bool coupled);

template <typename Real>
struct RhnLayerCache {
  Vector<Real> h, t, c;
};

template <typename Real>
struct RhnStepCache {
  Vector<Real> x;
  std::vector<Vector<Real>> s;  // s[0] is the incoming state, s[L] the cell output
  std::vector<RhnLayerCache<Real>> layers;  // layers[l-1] holds layer l
};

template <typename Real>
struct RhnLayerForward {
  Vector<Real> s_out;
  RhnLayerCache<Real> cache;
};

// `x` must be non-empty exactly when layer.index == 1, and `input` must then
// be non-null.
template <typename Real>
RhnLayerForward<Real> rhn_layer_forward(std::span<const Real> x, std::span<const Real> s_prev,
                                        const RhnLayerParams<Real>& layer,
                                        const RhnInputParams<Real>* input, bool coupled);

template <typename Real>
struct RhnCellForward {
  Vector<Real> s_out;
  RhnStepCache<Real> cache;
};

template <typename Real>
RhnCellForward<Real> rhn_cell_forward(std::span<const Real> x, std::span<const Real> s_in,
                                      const RhnParams<Real>& params, bool coupled);

template <typename Real>
struct RhnCellBackward {
  Vector<Real> grad_x;
  Vector<Real> grad_s_in;
};

// Parameter gradients are added into `grads`, which must be shaped like
// `params`.
template <typename Real>
RhnCellBackward<Real> rhn_cell_backward(std::span<const Real> grad_s_out,
                                        const RhnStepCache<Real>& cache,
                                        const RhnParams<Real>& params, bool coupled,
                                        RhnParams<Real>& grads);

}  // namespace rhnlm
