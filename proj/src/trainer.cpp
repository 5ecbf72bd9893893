// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/trainer.hpp"

#include <cmath>
#include <fstream>

#include "rhnlm/data.hpp"

namespace rhnlm {

void TrainConfig::validate() const {
  require(initial_lr >= 0.0 && std::isfinite(initial_lr), "trainer: learning rate must be >= 0");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "trainer: lr_decay must lie in (0, 1]");
  require(epochs >= 1 && window >= 1 && batch_size >= 1 && eval_every >= 1,
          "trainer: epochs, window, batch_size and eval_every must be positive");
  require(l2_lambda >= 0.0, "trainer: l2_lambda must be >= 0");
  require(!clip_norm || *clip_norm > 0.0, "trainer: clip_norm must be positive when set");
}

template <typename Real>
SgdStats sgd_step(ModelParams<Real>& params, const ModelParams<Real>& grads, double lr,
                  double l2_lambda, std::optional<double> clip_norm) {
  std::vector<TensorRef<const Real>> g;
  for_each_tensor(grads, [&](const TensorRef<const Real>& t) { g.push_back(t); });
  double sq = 0.0;
  for (const auto& t : g) {
    check_finite(t.values, "trainer: gradient of " + t.name);
    sq += static_cast<double>(sum_squares(t.values));
  }
  SgdStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (clip_norm && stats.grad_norm > *clip_norm) stats.scale = *clip_norm / stats.grad_norm;

  std::size_t i = 0;
  for_each_tensor(params, [&](const TensorRef<Real>& p) {
    require(i < g.size() && g[i].name == p.name && g[i].values.size() == p.values.size(),
            "trainer: gradient layout does not match parameters at " + p.name);
    const auto& gv = g[i++].values;
    const Real step = static_cast<Real>(lr * stats.scale);
    if (!p.is_bias && l2_lambda != 0.0) {
      const Real shrink = static_cast<Real>(1.0 - lr * l2_lambda);
      for (auto& w : p.values) w *= shrink;
    }
    axpy<Real>(-step, gv, p.values);
  });
  require(i == g.size(), "trainer: gradient has extra tensors");
  return stats;
}

std::string curve_csv_header() { return "epoch,step,train_loss,valid_ppl,test_ppl,lr"; }

std::string curve_csv_row(const CurveRow& r) {
  std::string s = std::to_string(r.epoch) + "," + std::to_string(r.step) + "," +
                  format_real(r.train_loss) + ",";
  if (r.valid_ppl) s += format_real(*r.valid_ppl);
  s += ",";
  if (r.test_ppl) s += format_real(*r.test_ppl);
  s += "," + format_real(r.lr);
  return s;
}

std::string curve_csv(std::span<const CurveRow> rows) {
  std::string s = curve_csv_header() + "\n";
  for (const auto& r : rows) s += curve_csv_row(r) + "\n";
  return s;
}

template <typename Real>
TensorContainer make_resume_container(const ModelConfig& model, const ModelParams<Real>& params,
                                      const TrainState<Real>& state) {
  TensorContainer c = make_checkpoint(model, params);
  c.meta.emplace_back("state.epoch", std::to_string(state.epoch));
  c.meta.emplace_back("state.step", std::to_string(state.step));
  c.meta.emplace_back("state.lr", format_real(state.lr));
  c.meta.emplace_back("state.best_valid", format_real(state.best_valid));
  c.meta.emplace_back("state.seed", std::to_string(state.seed));
  c.meta.emplace_back("state.streams", std::to_string(state.carries.size()));
  const int precision = sizeof(Real) == 4 ? 32 : 64;
  for (std::size_t b = 0; b < state.carries.size(); ++b) {
    const auto& carry = state.carries[b];
    auto put = [&](const std::string& name, const Vector<Real>& v) {
      if (v.empty()) return;
      c.tensors.push_back(TensorRecord{name, 1, v.size(), precision, {v.begin(), v.end()}});
    };
    put("state.carry" + std::to_string(b) + ".s", carry.s);
    put("state.carry" + std::to_string(b) + ".s_hat", carry.s_hat);
  }
  return c;
}

template <typename Real>
TrainState<Real> train_state_from_container(const TensorContainer& c, const ModelConfig& model) {
  auto get = [&](const std::string& key) -> const std::string& {
    const std::string* v = c.find_meta(key);
    require(v != nullptr, "trainer: resume file lacks " + key);
    return *v;
  };
  TrainState<Real> s;
  s.epoch = std::stoull(get("state.epoch"));
  s.step = std::stoull(get("state.step"));
  s.lr = std::stod(get("state.lr"));
  s.best_valid = std::stod(get("state.best_valid"));
  s.seed = std::stoull(get("state.seed"));
  const std::size_t streams = std::stoull(get("state.streams"));
  for (std::size_t b = 0; b < streams; ++b) {
    CarryState<Real> carry = zero_carry<Real>(model);
    auto fetch = [&](const std::string& name, Vector<Real>& dst) {
      const TensorRecord* t = c.find_tensor(name);
      if (t == nullptr) return;
      require(t->values.size() == model.hidden, "trainer: carry " + name + " has wrong size");
      dst.assign(t->values.begin(), t->values.end());
    };
    fetch("state.carry" + std::to_string(b) + ".s", carry.s);
    fetch("state.carry" + std::to_string(b) + ".s_hat", carry.s_hat);
    s.carries.push_back(std::move(carry));
  }
  return s;
}

namespace {

std::uint64_t mask_stream(std::size_t epoch, std::size_t window, std::size_t stream) {
  return mix64(mix64(mix64(epoch) ^ window) ^ stream);
}

template <typename Real>
void write_outputs(const std::filesystem::path& dir, const std::vector<CurveRow>& curve) {
  write_text_file(dir / "learning_curve.csv", curve_csv(curve));
}

}  // namespace

template <typename Real>
TrainResult<Real> train(const ModelConfig& model, const TrainConfig& config,
                        const CorpusSplits& splits, const TrainOptions<Real>& options) {
  model.validate();
  config.validate();
  require(!splits.train.empty() && splits.valid.size() >= 2 && splits.test.size() >= 2,
          "trainer: train, valid and test splits are all required");

  const auto batches = batchify(splits.train, config.batch_size, config.window);
  const std::size_t eval_window = config.eval_window == 0 ? config.window : config.eval_window;

  ModelParams<Real> params =
      options.initial_params ? *options.initial_params : init_model<Real>(model, config.seed);
  validate(params, model);

  TrainResult<Real> result;
  TrainState<Real>& state = result.state;
  if (options.resume) {
    state = *options.resume;
  } else {
    state.lr = config.initial_lr;
    state.seed = config.seed;
  }
  result.best_params = params;
  result.final_params = params;

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  auto emit = [&](const CurveRow& row) {
    result.curve.push_back(row);
    if (options.on_row) options.on_row(row);
  };

  ModelParams<Real> grads = zeros_like(params);
  const Real stream_weight = Real(1) / static_cast<Real>(config.batch_size);
  BackwardOptions bopts;
  bopts.loss_weights.assign(config.window, 1.0 / static_cast<double>(config.batch_size));

  for (; state.epoch < config.epochs; ++state.epoch) {
    const std::size_t epoch = state.epoch;
    // Every epoch sweeps the corpus from the start, so carried state restarts too.
    state.carries.assign(config.batch_size, zero_carry<Real>(model));
    double epoch_loss = 0.0;
    double since_log = 0.0;
    std::size_t since_log_count = 0;
    for (std::size_t w = 0; w < batches.size(); ++w) {
      const auto& batch = batches[w];
      for_each_tensor(grads, [](const TensorRef<Real>& t) {
        std::fill(t.values.begin(), t.values.end(), Real(0));
      });
      Real batch_loss = 0;
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        DropoutMasks<Real> masks;
        if (model.any_dropout()) {
          Rng rng(config.seed, mask_stream(epoch, w, b));
          masks = sample_masks<Real>(model, rng);
        }
        auto fwd = forward_window<Real>(params, model, batch.inputs[b], batch.targets[b],
                                        state.carries[b], masks.empty() ? nullptr : &masks);
        backward_window<Real>(params, model, fwd.cache, masks.empty() ? nullptr : &masks, grads,
                              bopts);
        batch_loss += fwd.mean_loss * stream_weight;
        state.carries[b] = std::move(fwd.carry_out);
      }
      const double loss = static_cast<double>(batch_loss);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        result.error = "trainer: training loss became non-finite at epoch " +
                       std::to_string(epoch) + ", step " + std::to_string(state.step);
        break;
      }
      try {
        sgd_step(params, grads, state.lr, config.l2_lambda, config.clip_norm);
        for_each_tensor(params, [](const TensorRef<const Real>& t) {
          check_finite(t.values, "trainer: parameter " + t.name);
        });
      } catch (const NumericalError& e) {
        result.diverged = true;
        result.error = e.what();
        break;
      }
      ++state.step;
      result.final_params = params;
      result.window_losses.push_back(loss);
      epoch_loss += loss;
      since_log += loss;
      ++since_log_count;
      if (config.log_every != 0 && state.step % config.log_every == 0 && w + 1 < batches.size()) {
        emit(CurveRow{epoch, state.step, since_log / static_cast<double>(since_log_count),
                      std::nullopt, std::nullopt, state.lr});
        since_log = 0.0;
        since_log_count = 0;
      }
    }
    if (result.diverged) break;

    CurveRow row{epoch, state.step, epoch_loss / static_cast<double>(batches.size()),
                 std::nullopt, std::nullopt, state.lr};
    if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) {
      row.valid_ppl = evaluate_perplexity(params, model, splits.valid, eval_window);
      row.test_ppl = evaluate_perplexity(params, model, splits.test, eval_window);
      if (!std::isfinite(*row.valid_ppl)) {
        result.diverged = true;
        result.error = "trainer: validation perplexity became non-finite at epoch " +
                       std::to_string(epoch);
        emit(row);
        break;
      }
      if (*row.valid_ppl < state.best_valid) {
        state.best_valid = *row.valid_ppl;
        result.best_params = params;
        if (options.out_dir) save_checkpoint(*options.out_dir / "best.ckpt", model, params);
      }
    }
    emit(row);
    state.lr *= config.lr_decay;
    if (options.out_dir) {
      TrainState<Real> snapshot = state;
      ++snapshot.epoch;
      save_container(*options.out_dir / "resume.ckpt",
                     make_resume_container(model, params, snapshot));
      write_outputs<Real>(*options.out_dir, result.curve);
    }
  }

  if (options.out_dir) {
    save_checkpoint(*options.out_dir / "final.ckpt", model, result.final_params);
    write_outputs<Real>(*options.out_dir, result.curve);
  }
  return result;
}

#define RHNLM_INSTANTIATE_TRAINER(Real)                                                         \
  template SgdStats sgd_step(ModelParams<Real>&, const ModelParams<Real>&, double, double,     \
                             std::optional<double>);                                           \
  template TensorContainer make_resume_container(const ModelConfig&, const ModelParams<Real>&, \
                                                 const TrainState<Real>&);                     \
  template TrainState<Real> train_state_from_container<Real>(const TensorContainer&,           \
                                                             const ModelConfig&);              \
  template TrainResult<Real> train(const ModelConfig&, const TrainConfig&, const CorpusSplits&, \
                                   const TrainOptions<Real>&);

RHNLM_INSTANTIATE_TRAINER(float)
RHNLM_INSTANTIATE_TRAINER(double)

#undef RHNLM_INSTANTIATE_TRAINER

}  // namespace rhnlm
