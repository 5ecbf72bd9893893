// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rhnlm/rng.hpp"
#include "rhnlm/serialize.hpp"

namespace rhnlm {

Architecture parse_architecture(std::string_view tag) {
  if (tag == "stacked") return Architecture::stacked;
  if (tag == "rhn") return Architecture::rhn;
  if (tag == "rhn+hsg") return Architecture::rhn_hsg;
  throw ContractError("diagnostics: unknown architecture '" + std::string(tag) +
                      "' (expected stacked, rhn or rhn+hsg)");
}

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::stacked:
      return "stacked";
    case Architecture::rhn:
      return "rhn";
    case Architecture::rhn_hsg:
      return "rhn+hsg";
  }
  return "unknown";
}

PathLengthReport path_lengths(Architecture arch, std::size_t depth, std::size_t horizon) {
  require(depth >= 1 && horizon >= 1, "diagnostics: depth and horizon must be at least 1");
  PathLengthReport r{arch, depth, horizon, {}};
  switch (arch) {
    case Architecture::stacked:
      r.lengths = {depth + horizon - 1};
      break;
    case Architecture::rhn:
      r.lengths = {depth * horizon};
      break;
    case Architecture::rhn_hsg:
      for (std::size_t j = 0; j <= horizon; ++j) r.lengths.push_back(horizon + depth * j);
      break;
  }
  return r;
}

namespace {

// Explicit DAG with unit node weights.
struct UnrolledGraph {
  std::vector<std::vector<std::size_t>> next;
  std::size_t source = 0;
  std::size_t sink = 0;
};

UnrolledGraph build_graph(Architecture arch, std::size_t depth, std::size_t horizon) {
  UnrolledGraph g;
  const std::size_t steps = horizon + 1;  // times t .. t+T
  switch (arch) {
    case Architecture::stacked: {
      // node (l, tau) = tau * L + l, l in [0, L)
      auto id = [&](std::size_t l, std::size_t tau) { return tau * depth + l; };
      g.next.resize(steps * depth);
      for (std::size_t tau = 0; tau < steps; ++tau) {
        for (std::size_t l = 0; l < depth; ++l) {
          if (l + 1 < depth) g.next[id(l, tau)].push_back(id(l + 1, tau));
          if (tau + 1 < steps) g.next[id(l, tau)].push_back(id(l, tau + 1));
        }
      }
      g.source = id(0, 0);
      g.sink = id(depth - 1, horizon);
      break;
    }
    case Architecture::rhn: {
      auto id = [&](std::size_t l, std::size_t tau) { return tau * depth + l; };
      g.next.resize(steps * depth);
      for (std::size_t tau = 0; tau < steps; ++tau) {
        for (std::size_t l = 0; l < depth; ++l) {
          if (l + 1 < depth) {
            g.next[id(l, tau)].push_back(id(l + 1, tau));
          } else if (tau + 1 < steps) {
            g.next[id(l, tau)].push_back(id(0, tau + 1));
          }
        }
      }
      g.source = id(depth - 1, 0);
      g.sink = id(depth - 1, horizon);
      break;
    }
    case Architecture::rhn_hsg: {
      // per step: L highway nodes then one gate node
      const std::size_t per = depth + 1;
      auto layer = [&](std::size_t l, std::size_t tau) { return tau * per + l; };
      auto gate = [&](std::size_t tau) { return tau * per + depth; };
      g.next.resize(steps * per);
      for (std::size_t tau = 0; tau < steps; ++tau) {
        for (std::size_t l = 0; l + 1 < depth; ++l) g.next[layer(l, tau)].push_back(layer(l + 1, tau));
        g.next[layer(depth - 1, tau)].push_back(gate(tau));
        if (tau + 1 < steps) {
          g.next[gate(tau)].push_back(layer(0, tau + 1));
          g.next[gate(tau)].push_back(gate(tau + 1));
        }
      }
      g.source = gate(0);
      g.sink = gate(horizon);
      break;
    }
  }
  return g;
}

}  // namespace

PathLengthReport enumerate_path_lengths(Architecture arch, std::size_t depth, std::size_t horizon,
                                        std::size_t max_routes) {
  require(depth >= 1 && horizon >= 1, "diagnostics: depth and horizon must be at least 1");
  const UnrolledGraph g = build_graph(arch, depth, horizon);
  std::set<std::size_t> lengths;
  std::size_t routes = 0;
  // Iterative DFS over (node, length) so deep graphs do not overflow the stack.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{g.source, 0}};
  while (!stack.empty()) {
    const auto [node, len] = stack.back();
    stack.pop_back();
    if (node == g.sink) {
      lengths.insert(len);
      require(++routes <= max_routes, "diagnostics: route enumeration exceeds limit");
      continue;
    }
    for (std::size_t nxt : g.next[node]) stack.emplace_back(nxt, len + 1);
  }
  PathLengthReport r{arch, depth, horizon, {lengths.begin(), lengths.end()}};
  return r;
}

std::string path_report_csv(const PathLengthReport& formula, const PathLengthReport* enumerated) {
  std::string s = "arch,depth,horizon,length,source\n";
  auto emit = [&](const PathLengthReport& r, const char* source) {
    for (auto len : r.lengths) {
      s += std::string(architecture_name(r.arch)) + "," + std::to_string(r.depth) + "," +
           std::to_string(r.horizon) + "," + std::to_string(len) + "," + source + "\n";
    }
  };
  emit(formula, "formula");
  if (enumerated) emit(*enumerated, "enumerated");
  return s;
}

template <typename Real>
CarryState<Real> state_after(const ModelParams<Real>& params, const ModelConfig& config,
                             std::span<const std::uint32_t> tokens, std::size_t origin) {
  require(origin + 1 < tokens.size(), "diagnostics: origin beyond the sequence");
  auto fwd = forward_window<Real>(params, config, tokens.subspan(0, origin + 1),
                                  tokens.subspan(1, origin + 1), zero_carry<Real>(config));
  return fwd.carry_out;
}

template <typename Real>
double probe_loss_at(const ModelParams<Real>& params, const ModelConfig& config,
                     std::span<const std::uint32_t> tokens, std::size_t origin, std::size_t lag,
                     const CarryState<Real>& state_at_origin) {
  require(lag >= 1 && origin + lag + 1 < tokens.size(), "diagnostics: lag beyond the sequence");
  auto fwd = forward_window<Real>(params, config, tokens.subspan(origin + 1, lag),
                                  tokens.subspan(origin + 2, lag), state_at_origin);
  return static_cast<double>(fwd.cache.steps.back().loss);
}

template <typename Real>
GradientProbeReport gradient_probe(const ModelParams<Real>& params, const ModelConfig& config,
                                   std::span<const std::uint32_t> tokens, std::size_t origin,
                                   std::size_t max_lag) {
  require(max_lag >= 1, "diagnostics: max_lag must be at least 1");
  require(tokens.size() >= origin + max_lag + 2,
          "diagnostics: sequence too short for origin " + std::to_string(origin) + " and lag " +
              std::to_string(max_lag));
  GradientProbeReport report;
  report.config = config;
  report.origin = origin;
  const CarryState<Real> start = state_after(params, config, tokens, origin);
  auto fwd = forward_window<Real>(params, config, tokens.subspan(origin + 1, max_lag),
                                  tokens.subspan(origin + 2, max_lag), start);
  ModelParams<Real> scratch = zeros_like(params);
  for (std::size_t k = 1; k <= max_lag; ++k) {
    BackwardOptions opts;
    opts.loss_weights.assign(max_lag, 0.0);
    opts.loss_weights[k - 1] = 1.0;
    opts.record_state_grads = true;
    auto back = backward_window<Real>(params, config, fwd.cache, nullptr, scratch, opts);
    GradientProbeRow row;
    row.lag = k;
    row.seed_norm = std::sqrt(static_cast<double>(sum_squares<Real>(back.state_grads[k - 1])));
    row.grad_norm = std::sqrt(static_cast<double>(sum_squares<Real>(back.grad_carry_in)));
    if (!std::isfinite(row.seed_norm) || !std::isfinite(row.grad_norm)) {
      throw NumericalError("diagnostics: non-finite gradient norm at lag " + std::to_string(k));
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string probe_report_csv(const GradientProbeReport& report) {
  std::string s = "lag,seed_norm,grad_norm,ratio\n";
  for (const auto& r : report.rows) {
    s += std::to_string(r.lag) + "," + format_real(r.seed_norm) + "," + format_real(r.grad_norm) +
         "," + format_real(r.ratio()) + "\n";
  }
  return s;
}

double GateHistogram::mass_between(double lo, double hi) const {
  if (values.empty()) return 0.0;
  const auto n = std::count_if(values.begin(), values.end(),
                               [&](double v) { return v >= lo && v <= hi; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

GateHistogram histogram_of(std::span<const double> values, std::size_t bins) {
  require(bins >= 1, "diagnostics: histogram needs at least one bin");
  GateHistogram h;
  h.bins = bins;
  h.counts.assign(bins, 0);
  for (double v : values) {
    require(v >= 0.0 && v <= 1.0, "diagnostics: gate value outside [0, 1]");
    const auto idx = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    ++h.counts[idx];
  }
  h.total = values.size();
  h.values.assign(values.begin(), values.end());
  return h;
}

template <typename Real>
GateHistogram gate_histogram(const ModelParams<Real>& params, const ModelConfig& config,
                             std::span<const std::uint32_t> tokens, std::size_t steps,
                             std::size_t bins, std::uint64_t seed) {
  require(config.use_hsg && params.hsg.has_value(),
          "diagnostics: gate histogram needs a model with the state gate");
  require(tokens.size() >= 2, "diagnostics: corpus needs at least two tokens");
  const std::size_t available = tokens.size() - 1;
  require(steps >= 1 && steps <= available,
          "diagnostics: cannot sample " + std::to_string(steps) + " steps from " +
              std::to_string(available));

  // Partial Fisher-Yates over step indices.
  std::vector<std::size_t> order(available);
  for (std::size_t i = 0; i < available; ++i) order[i] = i;
  Rng rng(seed, stable_hash("gate_histogram"));
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(available - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(steps));
  std::sort(chosen.begin(), chosen.end());

  std::vector<HsgStepCache<Real>> caches;
  caches.reserve(steps);
  CarryState<Real> carry = zero_carry<Real>(config);
  constexpr std::size_t kWindow = 64;
  std::size_t next = 0;
  const std::size_t last = chosen.back();
  for (std::size_t start = 0; start <= last; start += kWindow) {
    const std::size_t len = std::min(kWindow, available - start);
    auto fwd = forward_window<Real>(params, config, tokens.subspan(start, len),
                                    tokens.subspan(start + 1, len), carry);
    while (next < chosen.size() && chosen[next] < start + len) {
      caches.push_back(std::move(*fwd.cache.steps[chosen[next] - start].hsg));
      ++next;
    }
    carry = std::move(fwd.carry_out);
  }
  const Vector<Real> gates = collect_gate_values<Real>(caches);
  std::vector<double> values(gates.begin(), gates.end());
  GateHistogram h = histogram_of(values, bins);
  h.positions = std::move(chosen);
  return h;
}

std::string histogram_csv(const GateHistogram& h) {
  std::string s = "bin_left,count\n";
  for (std::size_t i = 0; i < h.bins; ++i) {
    s += format_real(h.bin_left(i)) + "," + std::to_string(h.counts[i]) + "\n";
  }
  return s;
}

std::string gate_values_csv(const GateHistogram& h) {
  std::string s = "gate\n";
  for (double v : h.values) s += format_real(v) + "\n";
  return s;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheckResult gradient_check(const ModelParams<double>& params, const ModelConfig& config,
                               std::span<const std::uint32_t> inputs,
                               std::span<const std::uint32_t> targets,
                               const CarryState<double>& carry, double step) {
  require(step > 0.0, "diagnostics: finite-difference step must be positive");
  auto fwd = forward_window<double>(params, config, inputs, targets, carry);
  ModelParams<double> grads = zeros_like(params);
  backward_window<double>(params, config, fwd.cache, nullptr, grads);

  ModelParams<double> probe = params;
  auto loss_at = [&]() { return forward_window<double>(probe, config, inputs, targets, carry).mean_loss; };

  std::vector<TensorRef<const double>> analytic;
  for_each_tensor(grads, [&](const TensorRef<const double>& t) { analytic.push_back(t); });

  GradCheckResult result;
  std::size_t k = 0;
  for_each_tensor(probe, [&](const TensorRef<double>& t) {
    const auto& a = analytic[k++];
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double saved = t.values[i];
      auto eval = [&](double delta) {
        t.values[i] = saved + delta;
        return loss_at();
      };
      const double numeric = (-eval(2 * step) + 8 * eval(step) - 8 * eval(-step) + eval(-2 * step)) /
                             (12 * step);
      t.values[i] = saved;
      const double err = relative_error(a.values[i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_tensor.empty()) {
        result.max_rel_error = err;
        result.worst_tensor = t.name;
        result.worst_index = i;
        result.worst_analytic = a.values[i];
        result.worst_numeric = numeric;
      }
    }
  });
  return result;
}

#define RHNLM_INSTANTIATE_DIAG(Real)                                                          \
  template CarryState<Real> state_after(const ModelParams<Real>&, const ModelConfig&,         \
                                        std::span<const std::uint32_t>, std::size_t);         \
  template double probe_loss_at(const ModelParams<Real>&, const ModelConfig&,                 \
                                std::span<const std::uint32_t>, std::size_t, std::size_t,     \
                                const CarryState<Real>&);                                     \
  template GradientProbeReport gradient_probe(const ModelParams<Real>&, const ModelConfig&,   \
                                              std::span<const std::uint32_t>, std::size_t,    \
                                              std::size_t);                                   \
  template GateHistogram gate_histogram(const ModelParams<Real>&, const ModelConfig&,         \
                                        std::span<const std::uint32_t>, std::size_t,          \
                                        std::size_t, std::uint64_t);

RHNLM_INSTANTIATE_DIAG(float)
RHNLM_INSTANTIATE_DIAG(double)

#undef RHNLM_INSTANTIATE_DIAG

}  // namespace rhnlm
