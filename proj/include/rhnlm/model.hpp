// SPDX-License-Identifier: Apache-2.0
//
// Word-level language model: embedding lookup, one recurrent highway cell per
// time step (optionally followed by the highway state gate), an output
// projection and softmax cross-entropy. Forward and backward run over a
// truncated window; state values carry across windows, gradients do not.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rhnlm/hsg.hpp"
#include "rhnlm/rhn.hpp"
#include "rhnlm/rng.hpp"
#include "rhnlm/tensor.hpp"

namespace rhnlm {

struct ModelConfig {
  std::size_t depth = 10;
  std::size_t hidden = 128;
  std::size_t embed = 0;  // 0 means "same as hidden"
  std::size_t vocab = 0;
  bool coupled = true;
  bool use_hsg = true;
  double dropout_embed = 0.0;
  double dropout_state = 0.0;   // recurrent state entering layer 1
  double dropout_output = 0.0;  // state read by the output projection
  bool dropout_in_hsg = false;  // gate reads the dropped-out state as well
  double gate_bias_init = -2.5;
  std::optional<double> hsg_bias_init;  // unset: same as gate_bias_init
  int precision = 64;

  std::size_t embed_size() const { return embed == 0 ? hidden : embed; }
  double hsg_bias() const { return hsg_bias_init.value_or(gate_bias_init); }
  bool any_dropout() const {
    return dropout_embed > 0.0 || dropout_state > 0.0 || dropout_output > 0.0;
  }
  void validate() const;
};

// Closed-form trainable parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& config);

template <typename Real>
struct ModelParams {
  Matrix<Real> embedding;  // vocab x embed
  RhnParams<Real> rhn;
  std::optional<HsgParams<Real>> hsg;
  Matrix<Real> proj_w;  // vocab x hidden
  Vector<Real> proj_b;  // vocab

  bool operator==(const ModelParams&) const;
};

// Named view of one parameter tensor. Biases are 1 x size rows.
template <typename Real>
struct TensorRef {
  std::string name;
  std::span<Real> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_bias = false;

  operator TensorRef<const Real>() const
    requires(!std::is_const_v<Real>)
  {
    return {name, values, rows, cols, is_bias};
  }
};

// Visits every tensor in a fixed canonical order. `Params` may be const.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  using Real = std::remove_cv_t<typename std::remove_reference_t<decltype(p.proj_b)>::value_type>;
  using Elem = std::conditional_t<std::is_const_v<Params>, const Real, Real>;
  auto mat = [&](const std::string& name, auto& m) {
    if (m.empty()) return;
    fn(TensorRef<Elem>{name, m.values(), m.rows(), m.cols(), false});
  };
  auto vec = [&](const std::string& name, auto& v) {
    if (v.empty()) return;
    fn(TensorRef<Elem>{name, std::span<Elem>(v), 1, v.size(), true});
  };
  mat("embedding", p.embedding);
  mat("rhn.input.w_h", p.rhn.input.w_h);
  mat("rhn.input.w_t", p.rhn.input.w_t);
  mat("rhn.input.w_c", p.rhn.input.w_c);
  for (auto& layer : p.rhn.layers) {
    const std::string prefix = "rhn.layer" + std::to_string(layer.index) + ".";
    mat(prefix + "r_h", layer.r_h);
    mat(prefix + "r_t", layer.r_t);
    mat(prefix + "r_c", layer.r_c);
    vec(prefix + "b_h", layer.b_h);
    vec(prefix + "b_t", layer.b_t);
    vec(prefix + "b_c", layer.b_c);
  }
  if (p.hsg) {
    mat("hsg.w_r", p.hsg->w_r);
    mat("hsg.w_f", p.hsg->w_f);
    vec("hsg.b_g", p.hsg->b_g);
  }
  mat("proj.w", p.proj_w);
  vec("proj.b", p.proj_b);
}

template <typename Real>
std::size_t count_parameters(const ModelParams<Real>& p);

// Zero-filled parameters shaped for `config`.
template <typename Real>
ModelParams<Real> make_model_params(const ModelConfig& config);

template <typename Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& p);

// Matrices uniform in [-1/sqrt(n), 1/sqrt(n)]; transform-gate and state-gate
// biases set from the config; other biases zero. Each tensor draws from its
// own RNG stream keyed by name, so adding or removing the state gate leaves
// every other tensor unchanged.
template <typename Real>
ModelParams<Real> init_model(const ModelConfig& config, std::uint64_t seed);

// Throws ContractError if `p` is not shaped for `config`.
template <typename Real>
void validate(const ModelParams<Real>& p, const ModelConfig& config);

template <typename Real>
struct CarryState {
  Vector<Real> s;      // last highway-cell output
  Vector<Real> s_hat;  // last gated state; empty without the state gate

  const Vector<Real>& recurrent(bool use_hsg) const { return use_hsg ? s_hat : s; }
};

template <typename Real>
CarryState<Real> zero_carry(const ModelConfig& config);

// Variational masks: sampled once per window and reused at every step.
// Empty vectors mean "no dropout at this site". Non-empty entries are 0 or
// 1/(1-rate).
template <typename Real>
struct DropoutMasks {
  Vector<Real> embed;
  Vector<Real> state;
  Vector<Real> output;

  bool empty() const { return embed.empty() && state.empty() && output.empty(); }
  bool operator==(const DropoutMasks&) const = default;
};

template <typename Real>
DropoutMasks<Real> sample_masks(const ModelConfig& config, Rng& rng);

template <typename Real>
struct StepRecord {
  std::size_t input_token = 0;
  std::size_t target_token = 0;
  Vector<Real> state_in;  // recurrent state before this step, undropped
  RhnStepCache<Real> rhn;
  std::optional<HsgStepCache<Real>> hsg;
  Vector<Real> output;  // what the projection read, after dropout
  Vector<Real> logits;
  Real loss = 0;
};

template <typename Real>
struct UnrolledCache {
  std::vector<StepRecord<Real>> steps;
  CarryState<Real> carry_in;
  DropoutMasks<Real> masks;
};

template <typename Real>
struct WindowForward {
  Real mean_loss = 0;
  UnrolledCache<Real> cache;
  CarryState<Real> carry_out;
};

template <typename Real>
WindowForward<Real> forward_window(const ModelParams<Real>& params, const ModelConfig& config,
                                   std::span<const std::uint32_t> inputs,
                                   std::span<const std::uint32_t> targets,
                                   const CarryState<Real>& carry,
                                   const DropoutMasks<Real>* masks = nullptr);

struct BackwardOptions {
  // Per-step weights on the token losses. Empty means 1/T each, i.e. the
  // gradient of the window's mean loss.
  std::vector<double> loss_weights;
  // Keep dLoss/d(state after step t) for every t.
  bool record_state_grads = false;
};

template <typename Real>
struct WindowBackward {
  Vector<Real> grad_carry_in;  // discarded by training (truncation)
  std::vector<Vector<Real>> state_grads;
};

// Adds the gradient into `grads`, which must be shaped like `params`.
template <typename Real>
WindowBackward<Real> backward_window(const ModelParams<Real>& params, const ModelConfig& config,
                                     const UnrolledCache<Real>& cache,
                                     const DropoutMasks<Real>* masks, ModelParams<Real>& grads,
                                     const BackwardOptions& options = {});

// Per-target-token cross-entropy (natural log) over a whole corpus, with the
// state carried across consecutive windows and no dropout. Entry i is the
// loss of predicting tokens[i + 1].
template <typename Real>
std::vector<double> evaluate_token_losses(const ModelParams<Real>& params,
                                          const ModelConfig& config,
                                          std::span<const std::uint32_t> tokens,
                                          std::size_t window);

template <typename Real>
double evaluate_perplexity(const ModelParams<Real>& params, const ModelConfig& config,
                           std::span<const std::uint32_t> tokens, std::size_t window);

}  // namespace rhnlm
