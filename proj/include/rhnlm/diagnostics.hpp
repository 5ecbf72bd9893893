// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rhnlm/model.hpp"

namespace rhnlm {

enum class Architecture { stacked, rhn, rhn_hsg };

// Accepts "stacked", "rhn", "rhn+hsg".
Architecture parse_architecture(std::string_view tag);
std::string_view architecture_name(Architecture a);

struct PathLengthReport {
  Architecture arch = Architecture::rhn;
  std::size_t depth = 1;
  std::size_t horizon = 1;
  std::vector<std::size_t> lengths;  // distinct, ascending
};

// Closed forms: stacked {L+T-1}; rhn {L*T}; rhn+hsg {T + L*j : j = 0..T}.
PathLengthReport path_lengths(Architecture arch, std::size_t depth, std::size_t horizon);

// Brute-force route enumeration over the explicit unrolled graph: one node
// per highway layer per time step (or per stacked layer per time step) plus
// one node per gate cell. A route's length is the number of nodes it enters
// after leaving the source. Sources and sinks:
//   stacked: layer 1 at t        -> layer L at t+T
//   rhn:     layer L at t        -> layer L at t+T
//   rhn+hsg: gate cell at t      -> gate cell at t+T
// Throws ContractError if the route count would exceed `max_routes`.
PathLengthReport enumerate_path_lengths(Architecture arch, std::size_t depth, std::size_t horizon,
                                        std::size_t max_routes = 1'000'000);

std::string path_report_csv(const PathLengthReport& formula, const PathLengthReport* enumerated);

struct GradientProbeRow {
  std::size_t lag = 0;
  double seed_norm = 0.0;  // ||dLoss_{t+k} / dstate_{t+k}||
  double grad_norm = 0.0;  // ||dLoss_{t+k} / dstate_t||
  double ratio() const { return seed_norm > 0.0 ? grad_norm / seed_norm : 0.0; }
};

struct GradientProbeReport {
  ModelConfig config;
  std::size_t origin = 0;
  std::vector<GradientProbeRow> rows;  // lags 1..T
};

// State means the gated state when the model has the state gate and the
// highway-cell output otherwise. The state at `origin` is the state after
// consuming tokens[0..origin]; the loss at lag k predicts
// tokens[origin + k + 1]. Needs tokens.size() >= origin + max_lag + 2.
template <typename Real>
GradientProbeReport gradient_probe(const ModelParams<Real>& params, const ModelConfig& config,
                                   std::span<const std::uint32_t> tokens, std::size_t origin,
                                   std::size_t max_lag);

// Loss at lag k as a function of the state at `origin`; used by tests to
// check the probe with finite differences.
template <typename Real>
double probe_loss_at(const ModelParams<Real>& params, const ModelConfig& config,
                     std::span<const std::uint32_t> tokens, std::size_t origin, std::size_t lag,
                     const CarryState<Real>& state_at_origin);

template <typename Real>
CarryState<Real> state_after(const ModelParams<Real>& params, const ModelConfig& config,
                             std::span<const std::uint32_t> tokens, std::size_t origin);

std::string probe_report_csv(const GradientProbeReport& report);

struct GateHistogram {
  std::size_t bins = 0;
  std::vector<std::size_t> counts;  // bin i covers [i/bins, (i+1)/bins); 1.0 lands in the last bin
  std::size_t total = 0;
  std::vector<double> values;       // raw gate values behind the counts
  std::vector<std::size_t> positions;  // sampled time steps, ascending

  double bin_left(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(bins); }
  // Fraction of values in [lo, hi] computed from the raw values.
  double mass_between(double lo, double hi) const;
};

GateHistogram histogram_of(std::span<const double> values, std::size_t bins);

// Runs the model over the corpus (carried state, no dropout) and gathers the
// state-gate vectors at `steps` distinct, uniformly chosen time steps.
template <typename Real>
GateHistogram gate_histogram(const ModelParams<Real>& params, const ModelConfig& config,
                             std::span<const std::uint32_t> tokens, std::size_t steps,
                             std::size_t bins, std::uint64_t seed);

std::string histogram_csv(const GateHistogram& h);
std::string gate_values_csv(const GateHistogram& h);

}  // namespace rhnlm

namespace rhnlm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// |a - b| / max(|a|, |b|, floor). The default floor sits well above the ~1e-12 rounding
// noise of a 64-bit finite-difference estimate.
double relative_error(double a, double b, double floor = 1e-6);

// Compares backward_window against five-point central differences of the
// window's mean loss for every parameter coordinate (no dropout).
GradCheckResult gradient_check(const ModelParams<double>& params, const ModelConfig& config,
                               std::span<const std::uint32_t> inputs,
                               std::span<const std::uint32_t> targets,
                               const CarryState<double>& carry, double step = 1e-3);

}  // namespace rhnlm
