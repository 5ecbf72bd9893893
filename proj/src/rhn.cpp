// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/rhn.hpp"

#include <cmath>
#include <string>

namespace rhnlm {

template <typename Real>
RhnParams<Real> make_rhn_params(std::size_t depth, std::size_t hidden, std::size_t input,
                                bool coupled) {
  require(depth >= 1, "rhn: depth must be at least 1");
  require(hidden >= 1 && input >= 1, "rhn: hidden and input sizes must be positive");
  RhnParams<Real> p;
  p.input.w_h = Matrix<Real>(hidden, input);
  p.input.w_t = Matrix<Real>(hidden, input);
  if (!coupled) p.input.w_c = Matrix<Real>(hidden, input);
  p.layers.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    auto& layer = p.layers[l];
    layer.index = l + 1;
    layer.r_h = Matrix<Real>(hidden, hidden);
    layer.r_t = Matrix<Real>(hidden, hidden);
    layer.b_h.assign(hidden, Real(0));
    layer.b_t.assign(hidden, Real(0));
    if (!coupled) {
      layer.r_c = Matrix<Real>(hidden, hidden);
      layer.b_c.assign(hidden, Real(0));
    }
  }
  return p;
}

template <typename Real>
RhnParams<Real> zeros_like(const RhnParams<Real>& p) {
  RhnParams<Real> z = make_rhn_params<Real>(p.depth(), p.hidden(), p.input_size(),
                                            p.input.w_c.empty());
  return z;
}

template <typename Real>
void validate(const RhnParams<Real>& p, bool coupled) {
  const std::size_t n = p.hidden();
  const std::size_t m = p.input_size();
  require(p.depth() >= 1, "rhn: no layers");
  auto check_matrix = [](const Matrix<Real>& mat, std::size_t r, std::size_t c,
                         const std::string& name) {
    require(mat.rows() == r && mat.cols() == c,
            "rhn: " + name + " has shape " + std::to_string(mat.rows()) + "x" +
                std::to_string(mat.cols()) + ", expected " + std::to_string(r) + "x" +
                std::to_string(c));
  };
  check_matrix(p.input.w_h, n, m, "W_H");
  check_matrix(p.input.w_t, n, m, "W_T");
  if (coupled) {
    require(p.input.w_c.empty(), "rhn: W_C present in a coupled cell");
  } else {
    check_matrix(p.input.w_c, n, m, "W_C");
  }
  for (std::size_t l = 0; l < p.depth(); ++l) {
    const auto& layer = p.layers[l];
    const std::string tag = "layer " + std::to_string(l + 1) + " ";
    require(layer.index == l + 1, "rhn: " + tag + "has index " + std::to_string(layer.index));
    check_matrix(layer.r_h, n, n, tag + "R_H");
    check_matrix(layer.r_t, n, n, tag + "R_T");
    require(layer.b_h.size() == n && layer.b_t.size() == n, "rhn: " + tag + "bias size mismatch");
    if (coupled) {
      require(!layer.has_carry_gate() && layer.r_c.empty(),
              "rhn: " + tag + "carries C parameters in a coupled cell");
    } else {
      check_matrix(layer.r_c, n, n, tag + "R_C");
      require(layer.b_c.size() == n, "rhn: " + tag + "b_C size mismatch");
    }
  }
}

template <typename Real>
RhnLayerForward<Real> rhn_layer_forward(std::span<const Real> x, std::span<const Real> s_prev,
                                        const RhnLayerParams<Real>& layer,
                                        const RhnInputParams<Real>* input, bool coupled) {
  const std::size_t n = layer.hidden();
  const bool first = layer.index == 1;
  require(s_prev.size() == n, "rhn: incoming state size does not match hidden size");
  if (first) {
    require(!x.empty() && input != nullptr, "rhn: layer 1 requires an input and input weights");
    require(x.size() == input->input_size(), "rhn: input size does not match W_H columns");
  } else {
    require(x.empty(), "rhn: input supplied to layer " + std::to_string(layer.index));
  }
  require(coupled != layer.has_carry_gate(), "rhn: coupling flag disagrees with layer parameters");

  RhnLayerForward<Real> out;
  auto& cache = out.cache;
  cache.h = layer.b_h;
  cache.t = layer.b_t;
  matvec_into<Real>(layer.r_h, s_prev, cache.h, true);
  matvec_into<Real>(layer.r_t, s_prev, cache.t, true);
  if (first) {
    matvec_into<Real>(input->w_h, x, cache.h, true);
    matvec_into<Real>(input->w_t, x, cache.t, true);
  }
  if (!coupled) {
    cache.c = layer.b_c;
    matvec_into<Real>(layer.r_c, s_prev, cache.c, true);
    if (first) matvec_into<Real>(input->w_c, x, cache.c, true);
  } else {
    cache.c.resize(n);
  }

  out.s_out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real h = std::tanh(cache.h[i]);
    const Real t = sigmoid(cache.t[i]);
    const Real c = coupled ? Real(1) - t : sigmoid(cache.c[i]);
    cache.h[i] = h;
    cache.t[i] = t;
    cache.c[i] = c;
    out.s_out[i] = h * t + s_prev[i] * c;
  }
  return out;
}

template <typename Real>
RhnCellForward<Real> rhn_cell_forward(std::span<const Real> x, std::span<const Real> s_in,
                                      const RhnParams<Real>& params, bool coupled) {
  require(params.depth() >= 1, "rhn: cell has no layers");
  RhnCellForward<Real> out;
  auto& cache = out.cache;
  cache.x.assign(x.begin(), x.end());
  cache.s.reserve(params.depth() + 1);
  cache.s.emplace_back(s_in.begin(), s_in.end());
  cache.layers.reserve(params.depth());
  for (std::size_t l = 0; l < params.depth(); ++l) {
    const auto& layer = params.layers[l];
    require(layer.index == l + 1, "rhn: layers must be in ascending index order");
    auto step = rhn_layer_forward<Real>(l == 0 ? x : std::span<const Real>{}, cache.s.back(),
                                        layer, l == 0 ? &params.input : nullptr, coupled);
    cache.layers.push_back(std::move(step.cache));
    cache.s.push_back(std::move(step.s_out));
  }
  out.s_out = cache.s.back();
  return out;
}

template <typename Real>
RhnCellBackward<Real> rhn_cell_backward(std::span<const Real> grad_s_out,
                                        const RhnStepCache<Real>& cache,
                                        const RhnParams<Real>& params, bool coupled,
                                        RhnParams<Real>& grads) {
  const std::size_t depth = params.depth();
  const std::size_t n = params.hidden();
  require(cache.layers.size() == depth && cache.s.size() == depth + 1,
          "rhn: step cache depth does not match parameters");
  require(grads.depth() == depth && grads.hidden() == n, "rhn: gradient buffer shape mismatch");
  require(grad_s_out.size() == n, "rhn: upstream gradient size mismatch");

  RhnCellBackward<Real> out;
  Vector<Real> ds(grad_s_out.begin(), grad_s_out.end());
  Vector<Real> da_h(n), da_t(n), da_c(coupled ? 0 : n);

  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& lc = cache.layers[l];
    const auto& s_prev = cache.s[l];
    auto& g = grads.layers[l];

    Vector<Real> ds_prev(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Real h = lc.h[i], t = lc.t[i], c = lc.c[i];
      const Real dh = ds[i] * t;
      Real dt = ds[i] * h;
      const Real dc = ds[i] * s_prev[i];
      ds_prev[i] = ds[i] * c;
      da_h[i] = dh * tanh_grad_from_output(h);
      if (coupled) {
        dt -= dc;  // c = 1 - t
      } else {
        da_c[i] = dc * sigmoid_grad_from_output(c);
      }
      da_t[i] = dt * sigmoid_grad_from_output(t);
    }

    matvec_transposed_acc<Real>(layer.r_h, da_h, ds_prev);
    matvec_transposed_acc<Real>(layer.r_t, da_t, ds_prev);
    outer_acc<Real>(g.r_h, da_h, s_prev);
    outer_acc<Real>(g.r_t, da_t, s_prev);
    axpy<Real>(Real(1), da_h, g.b_h);
    axpy<Real>(Real(1), da_t, g.b_t);
    if (!coupled) {
      matvec_transposed_acc<Real>(layer.r_c, da_c, ds_prev);
      outer_acc<Real>(g.r_c, da_c, s_prev);
      axpy<Real>(Real(1), da_c, g.b_c);
    }

    if (l == 0) {
      const std::size_t m = params.input_size();
      require(cache.x.size() == m, "rhn: cached input size mismatch");
      out.grad_x.assign(m, Real(0));
      matvec_transposed_acc<Real>(params.input.w_h, da_h, out.grad_x);
      matvec_transposed_acc<Real>(params.input.w_t, da_t, out.grad_x);
      outer_acc<Real>(grads.input.w_h, da_h, cache.x);
      outer_acc<Real>(grads.input.w_t, da_t, cache.x);
      if (!coupled) {
        matvec_transposed_acc<Real>(params.input.w_c, da_c, out.grad_x);
        outer_acc<Real>(grads.input.w_c, da_c, cache.x);
      }
    }
    ds = std::move(ds_prev);
  }
  out.grad_s_in = std::move(ds);
  return out;
}

#define RHNLM_INSTANTIATE_RHN(Real)                                                              \
  template RhnParams<Real> make_rhn_params<Real>(std::size_t, std::size_t, std::size_t, bool);   \
  template RhnParams<Real> zeros_like(const RhnParams<Real>&);                                   \
  template void validate(const RhnParams<Real>&, bool);                                          \
  template RhnLayerForward<Real> rhn_layer_forward(std::span<const Real>, std::span<const Real>, \
                                                   const RhnLayerParams<Real>&,                  \
                                                   const RhnInputParams<Real>*, bool);           \
  template RhnCellForward<Real> rhn_cell_forward(std::span<const Real>, std::span<const Real>,   \
                                                 const RhnParams<Real>&, bool);                  \
  template RhnCellBackward<Real> rhn_cell_backward(std::span<const Real>,                        \
                                                   const RhnStepCache<Real>&,                    \
                                                   const RhnParams<Real>&, bool, RhnParams<Real>&);

RHNLM_INSTANTIATE_RHN(float)
RHNLM_INSTANTIATE_RHN(double)

#undef RHNLM_INSTANTIATE_RHN

}  // namespace rhnlm
