// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/model.hpp"

#include <cmath>

namespace rhnlm {

void ModelConfig::validate() const {
  require(depth >= 1, "lm_network: depth must be at least 1");
  require(hidden >= 1, "lm_network: hidden size must be positive");
  require(vocab >= 1, "lm_network: vocabulary size must be positive");
  auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  require(rate_ok(dropout_embed) && rate_ok(dropout_state) && rate_ok(dropout_output),
          "lm_network: dropout rates must lie in [0, 1)");
  require(precision == 32 || precision == 64, "lm_network: precision must be 32 or 64");
  require(std::isfinite(gate_bias_init) && std::isfinite(hsg_bias()),
          "lm_network: gate bias initializers must be finite");
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t n = c.hidden, m = c.embed_size(), v = c.vocab;
  const std::size_t gates = c.coupled ? 2 : 3;
  std::size_t total = v * m;
  total += gates * n * m;
  total += c.depth * gates * (n * n + n);
  if (c.use_hsg) total += 2 * n * n + n;
  total += v * n + v;
  return total;
}

template <typename Real>
bool ModelParams<Real>::operator==(const ModelParams& other) const {
  bool equal = true;
  std::vector<std::span<const Real>> mine;
  for_each_tensor(*this, [&](const TensorRef<const Real>& t) { mine.push_back(t.values); });
  std::size_t i = 0;
  for_each_tensor(other, [&](const TensorRef<const Real>& t) {
    if (i >= mine.size() || mine[i].size() != t.values.size() ||
        !std::equal(t.values.begin(), t.values.end(), mine[i].begin())) {
      equal = false;
    }
    ++i;
  });
  return equal && i == mine.size();
}

template <typename Real>
std::size_t count_parameters(const ModelParams<Real>& p) {
  std::size_t total = 0;
  for_each_tensor(p, [&](const TensorRef<const Real>& t) { total += t.values.size(); });
  return total;
}

template <typename Real>
ModelParams<Real> make_model_params(const ModelConfig& config) {
  config.validate();
  ModelParams<Real> p;
  const std::size_t n = config.hidden, m = config.embed_size(), v = config.vocab;
  p.embedding = Matrix<Real>(v, m);
  p.rhn = make_rhn_params<Real>(config.depth, n, m, config.coupled);
  if (config.use_hsg) p.hsg = make_hsg_params<Real>(n);
  p.proj_w = Matrix<Real>(v, n);
  p.proj_b.assign(v, Real(0));
  return p;
}

template <typename Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& p) {
  ModelParams<Real> z = p;
  for_each_tensor(z, [](const TensorRef<Real>& t) { std::fill(t.values.begin(), t.values.end(), Real(0)); });
  return z;
}

template <typename Real>
ModelParams<Real> init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<Real> p = make_model_params<Real>(config);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  const Real gate_bias = static_cast<Real>(config.gate_bias_init);
  const Real hsg_bias = static_cast<Real>(config.hsg_bias());
  for_each_tensor(p, [&](const TensorRef<Real>& t) {
    if (t.is_bias) {
      const bool transform_gate = t.name.ends_with(".b_t");
      const bool state_gate = t.name == "hsg.b_g";
      const Real fill = transform_gate ? gate_bias : state_gate ? hsg_bias : Real(0);
      std::fill(t.values.begin(), t.values.end(), fill);
      return;
    }
    Rng rng(seed, stable_hash(t.name.c_str()));
    for (auto& w : t.values) w = static_cast<Real>(rng.uniform(-scale, scale));
  });
  return p;
}

template <typename Real>
void validate(const ModelParams<Real>& p, const ModelConfig& config) {
  config.validate();
  const std::size_t n = config.hidden, m = config.embed_size(), v = config.vocab;
  require(p.embedding.rows() == v && p.embedding.cols() == m,
          "lm_network: embedding table does not match vocab x embed");
  validate(p.rhn, config.coupled);
  require(p.rhn.depth() == config.depth && p.rhn.hidden() == n && p.rhn.input_size() == m,
          "lm_network: highway cell does not match the configuration");
  require(p.hsg.has_value() == config.use_hsg,
          config.use_hsg ? "lm_network: state gate parameters missing"
                         : "lm_network: state gate parameters present but use_hsg is off");
  if (p.hsg) {
    validate(*p.hsg);
    require(p.hsg->hidden() == n, "lm_network: state gate size mismatch");
  }
  require(p.proj_w.rows() == v && p.proj_w.cols() == n && p.proj_b.size() == v,
          "lm_network: output projection does not match vocab x hidden");
}

template <typename Real>
CarryState<Real> zero_carry(const ModelConfig& config) {
  CarryState<Real> c;
  c.s.assign(config.hidden, Real(0));
  if (config.use_hsg) c.s_hat.assign(config.hidden, Real(0));
  return c;
}

namespace {

template <typename Real>
Vector<Real> bernoulli_mask(std::size_t size, double rate, Rng& rng) {
  if (rate <= 0.0) return {};
  const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
  Vector<Real> mask(size);
  for (auto& m : mask) m = rng.uniform() < rate ? Real(0) : keep;
  return mask;
}

template <typename Real>
void apply_mask(std::span<Real> v, const Vector<Real>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
}

template <typename Real>
void check_masks(const DropoutMasks<Real>& masks, const ModelConfig& config) {
  require(masks.embed.empty() || masks.embed.size() == config.embed_size(),
          "lm_network: embedding mask size mismatch");
  require(masks.state.empty() || masks.state.size() == config.hidden,
          "lm_network: state mask size mismatch");
  require(masks.output.empty() || masks.output.size() == config.hidden,
          "lm_network: output mask size mismatch");
}

}  // namespace

template <typename Real>
DropoutMasks<Real> sample_masks(const ModelConfig& config, Rng& rng) {
  DropoutMasks<Real> masks;
  masks.embed = bernoulli_mask<Real>(config.embed_size(), config.dropout_embed, rng);
  masks.state = bernoulli_mask<Real>(config.hidden, config.dropout_state, rng);
  masks.output = bernoulli_mask<Real>(config.hidden, config.dropout_output, rng);
  return masks;
}

template <typename Real>
WindowForward<Real> forward_window(const ModelParams<Real>& params, const ModelConfig& config,
                                   std::span<const std::uint32_t> inputs,
                                   std::span<const std::uint32_t> targets,
                                   const CarryState<Real>& carry,
                                   const DropoutMasks<Real>* masks) {
  require(inputs.size() == targets.size(), "lm_network: input and target windows differ in length");
  require(!inputs.empty(), "lm_network: empty window");
  const std::size_t n = config.hidden;
  require(carry.s.size() == n && carry.recurrent(config.use_hsg).size() == n,
          "lm_network: carry state size does not match hidden size");
  require(params.hsg.has_value() == config.use_hsg,
          "lm_network: state gate parameters disagree with use_hsg");
  const DropoutMasks<Real> no_masks;
  const DropoutMasks<Real>& mk = masks ? *masks : no_masks;
  check_masks(mk, config);

  WindowForward<Real> out;
  auto& cache = out.cache;
  cache.carry_in = carry;
  cache.masks = mk;
  cache.steps.resize(inputs.size());
  CarryState<Real> state = carry;
  Real total = 0;

  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const std::size_t tok = inputs[t], target = targets[t];
    if (tok >= config.vocab || target >= config.vocab) {
      throw ContractError("lm_network: token id " + std::to_string(std::max(tok, target)) +
                          " out of range for vocabulary of " + std::to_string(config.vocab));
    }
    auto& step = cache.steps[t];
    step.input_token = tok;
    step.target_token = target;
    step.state_in = state.recurrent(config.use_hsg);

    Vector<Real> x(params.embedding.row(tok).begin(), params.embedding.row(tok).end());
    apply_mask<Real>(x, mk.embed);
    Vector<Real> r = step.state_in;
    apply_mask<Real>(r, mk.state);

    auto cell = rhn_cell_forward<Real>(x, r, params.rhn, config.coupled);
    step.rhn = std::move(cell.cache);
    state.s = std::move(cell.s_out);

    const Vector<Real>* read = &state.s;
    if (config.use_hsg) {
      const Vector<Real>& gate_prev = config.dropout_in_hsg ? r : step.state_in;
      step.hsg = hsg_forward<Real>(gate_prev, state.s, *params.hsg);
      state.s_hat = step.hsg->s_hat;
      read = &state.s_hat;
    }
    step.output = *read;
    apply_mask<Real>(step.output, mk.output);

    step.logits = params.proj_b;
    matvec_into<Real>(params.proj_w, step.output, step.logits, true);
    step.loss = softmax_xent<Real>(step.logits, target).loss;
    total += step.loss;
  }
  out.mean_loss = total / static_cast<Real>(inputs.size());
  out.carry_out = std::move(state);
  return out;
}

template <typename Real>
WindowBackward<Real> backward_window(const ModelParams<Real>& params, const ModelConfig& config,
                                     const UnrolledCache<Real>& cache,
                                     const DropoutMasks<Real>* masks, ModelParams<Real>& grads,
                                     const BackwardOptions& options) {
  const std::size_t steps = cache.steps.size();
  const std::size_t n = config.hidden;
  require(steps > 0, "lm_network: empty cache");
  const DropoutMasks<Real> no_masks;
  const DropoutMasks<Real>& mk = masks ? *masks : no_masks;
  require(mk == cache.masks, "lm_network: dropout masks differ from the forward pass");
  require(options.loss_weights.empty() || options.loss_weights.size() == steps,
          "lm_network: loss weight count does not match window length");
  require(grads.hsg.has_value() == config.use_hsg && grads.proj_b.size() == config.vocab &&
              grads.rhn.depth() == config.depth,
          "lm_network: gradient buffer does not match the configuration");

  WindowBackward<Real> out;
  if (options.record_state_grads) out.state_grads.resize(steps);
  Vector<Real> d_next(n, Real(0));
  const Real uniform_weight = Real(1) / static_cast<Real>(steps);

  for (std::size_t t = steps; t-- > 0;) {
    const auto& step = cache.steps[t];
    require(step.rhn.s.size() == config.depth + 1 && step.hsg.has_value() == config.use_hsg,
            "lm_network: cache does not match the configuration");
    const Real weight = options.loss_weights.empty()
                            ? uniform_weight
                            : static_cast<Real>(options.loss_weights[t]);

    Vector<Real> dstate = d_next;
    if (weight != Real(0)) {
      auto xent = softmax_xent<Real>(step.logits, step.target_token);
      for (auto& g : xent.grad) g *= weight;
      axpy<Real>(Real(1), xent.grad, grads.proj_b);
      outer_acc<Real>(grads.proj_w, xent.grad, step.output);
      Vector<Real> d_out(n, Real(0));
      matvec_transposed_acc<Real>(params.proj_w, xent.grad, d_out);
      apply_mask<Real>(d_out, mk.output);
      for (std::size_t i = 0; i < n; ++i) dstate[i] += d_out[i];
    }
    if (options.record_state_grads) out.state_grads[t] = dstate;

    Vector<Real> d_prev(n, Real(0));
    const Vector<Real>* ds_l = &dstate;
    std::optional<HsgBackward<Real>> gate;
    if (config.use_hsg) {
      gate = hsg_backward<Real>(dstate, *step.hsg, *params.hsg, *grads.hsg);
      ds_l = &gate->grad_s_l;
    }
    auto cell = rhn_cell_backward<Real>(*ds_l, step.rhn, params.rhn, config.coupled, grads.rhn);

    apply_mask<Real>(cell.grad_s_in, mk.state);
    if (gate) {
      if (config.dropout_in_hsg) apply_mask<Real>(gate->grad_s_hat_prev, mk.state);
      for (std::size_t i = 0; i < n; ++i) d_prev[i] = cell.grad_s_in[i] + gate->grad_s_hat_prev[i];
    } else {
      d_prev = std::move(cell.grad_s_in);
    }

    apply_mask<Real>(cell.grad_x, mk.embed);
    axpy<Real>(Real(1), cell.grad_x, grads.embedding.row(step.input_token));
    d_next = std::move(d_prev);
  }
  out.grad_carry_in = std::move(d_next);
  return out;
}

template <typename Real>
std::vector<double> evaluate_token_losses(const ModelParams<Real>& params,
                                          const ModelConfig& config,
                                          std::span<const std::uint32_t> tokens,
                                          std::size_t window) {
  require(tokens.size() >= 2, "lm_network: corpus needs at least two tokens to evaluate");
  require(window >= 1, "lm_network: evaluation window must be positive");
  std::vector<double> losses;
  losses.reserve(tokens.size() - 1);
  CarryState<Real> carry = zero_carry<Real>(config);
  const std::size_t targets = tokens.size() - 1;
  for (std::size_t start = 0; start < targets; start += window) {
    const std::size_t len = std::min(window, targets - start);
    auto fwd = forward_window<Real>(params, config, tokens.subspan(start, len),
                                    tokens.subspan(start + 1, len), carry);
    for (const auto& step : fwd.cache.steps) losses.push_back(static_cast<double>(step.loss));
    carry = std::move(fwd.carry_out);
  }
  return losses;
}

template <typename Real>
double evaluate_perplexity(const ModelParams<Real>& params, const ModelConfig& config,
                           std::span<const std::uint32_t> tokens, std::size_t window) {
  const auto losses = evaluate_token_losses(params, config, tokens, window);
  double total = 0.0;
  for (double l : losses) total += l;
  return std::exp(total / static_cast<double>(losses.size()));
}

#define RHNLM_INSTANTIATE_MODEL(Real)                                                           \
  template struct ModelParams<Real>;                                                            \
  template std::size_t count_parameters(const ModelParams<Real>&);                              \
  template ModelParams<Real> make_model_params<Real>(const ModelConfig&);                       \
  template ModelParams<Real> zeros_like(const ModelParams<Real>&);                              \
  template ModelParams<Real> init_model<Real>(const ModelConfig&, std::uint64_t);               \
  template void validate(const ModelParams<Real>&, const ModelConfig&);                         \
  template CarryState<Real> zero_carry<Real>(const ModelConfig&);                               \
  template DropoutMasks<Real> sample_masks<Real>(const ModelConfig&, Rng&);                     \
  template WindowForward<Real> forward_window(const ModelParams<Real>&, const ModelConfig&,     \
                                              std::span<const std::uint32_t>,                   \
                                              std::span<const std::uint32_t>,                   \
                                              const CarryState<Real>&,                          \
                                              const DropoutMasks<Real>*);                       \
  template WindowBackward<Real> backward_window(const ModelParams<Real>&, const ModelConfig&,   \
                                                const UnrolledCache<Real>&,                     \
                                                const DropoutMasks<Real>*, ModelParams<Real>&,  \
                                                const BackwardOptions&);                        \
  template std::vector<double> evaluate_token_losses(const ModelParams<Real>&,                  \
                                                     const ModelConfig&,                        \
                                                     std::span<const std::uint32_t>,            \
                                                     std::size_t);                              \
  template double evaluate_perplexity(const ModelParams<Real>&, const ModelConfig&,             \
                                      std::span<const std::uint32_t>, std::size_t);

RHNLM_INSTANTIATE_MODEL(float)
RHNLM_INSTANTIATE_MODEL(double)

#undef RHNLM_INSTANTIATE_MODEL

}  // namespace rhnlm
