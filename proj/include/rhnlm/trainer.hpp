// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhnlm/model.hpp"
#include "rhnlm/serialize.hpp"

namespace rhnlm {

struct TrainConfig {
  double initial_lr = 1.0;
  double lr_decay = 1.0;  // multiplied into the rate after every epoch
  std::size_t epochs = 1;
  std::size_t window = 35;
  std::size_t batch_size = 1;
  double l2_lambda = 0.0;
  std::optional<double> clip_norm = 10.0;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;   // epochs between validation passes
  std::size_t log_every = 0;    // extra in-epoch log rows every N steps; 0 disables
  std::size_t eval_window = 0;  // 0 means same as window

  void validate() const;
};

struct SgdStats {
  double grad_norm = 0.0;  // global L2 norm before clipping
  double scale = 1.0;      // factor applied by clipping
};

// Global-norm clipping, then p -= lr * (g + l2 * p) for matrices and
// p -= lr * g for biases. Throws NumericalError naming the first non-finite
// gradient tensor; params are untouched in that case.
template <typename Real>
SgdStats sgd_step(ModelParams<Real>& params, const ModelParams<Real>& grads, double lr,
                  double l2_lambda, std::optional<double> clip_norm);

struct CurveRow {
  std::size_t epoch = 0;  // 0-based
  std::size_t step = 0;   // optimizer steps taken so far
  double train_loss = 0.0;
  std::optional<double> valid_ppl;
  std::optional<double> test_ppl;
  double lr = 0.0;
};

std::string curve_csv_header();
std::string curve_csv_row(const CurveRow& row);
std::string curve_csv(std::span<const CurveRow> rows);

template <typename Real>
struct TrainState {
  std::size_t epoch = 0;  // next epoch to run
  std::size_t step = 0;
  double lr = 0.0;
  double best_valid = std::numeric_limits<double>::infinity();
  std::vector<CarryState<Real>> carries;  // per stream; empty means zero state
  std::uint64_t seed = 0;
};

template <typename Real>
TensorContainer make_resume_container(const ModelConfig& model, const ModelParams<Real>& params,
                                      const TrainState<Real>& state);

template <typename Real>
TrainState<Real> train_state_from_container(const TensorContainer& c, const ModelConfig& model);

struct CorpusSplits {
  std::span<const std::uint32_t> train;
  std::span<const std::uint32_t> valid;
  std::span<const std::uint32_t> test;
};

template <typename Real>
struct TrainOptions {
  // When set, best.ckpt, final.ckpt, resume.ckpt and learning_curve.csv are
  // written here.
  std::optional<std::filesystem::path> out_dir;
  const ModelParams<Real>* initial_params = nullptr;
  const TrainState<Real>* resume = nullptr;
  std::function<void(const CurveRow&)> on_row;
};

template <typename Real>
struct TrainResult {
  ModelParams<Real> best_params;   // lowest validation perplexity seen
  ModelParams<Real> final_params;  // last good parameters
  std::vector<CurveRow> curve;
  std::vector<double> window_losses;  // batch-mean training loss per step
  TrainState<Real> state;
  bool diverged = false;
  std::string error;
};

// Each optimizer step descends the token loss summed over the window and
// averaged over the parallel streams. Logged losses are per-token means.
template <typename Real>
TrainResult<Real> train(const ModelConfig& model, const TrainConfig& config,
                        const CorpusSplits& splits, const TrainOptions<Real>& options = {});

}  // namespace rhnlm
