// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rhnlm/diagnostics.hpp"
#include "support.hpp"

namespace rhnlm {
namespace {

using testing::random_tokens;

std::vector<std::size_t> hsg_lengths(std::size_t depth, std::size_t horizon) {
  std::vector<std::size_t> v;
  for (std::size_t j = 0; j <= horizon; ++j) v.push_back(horizon + depth * j);
  return v;
}

TEST(Paths, ClosedFormsForReferenceShapes) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{3, 5}, {10, 4}, {30, 10}};
  for (auto [depth, horizon] : shapes) {
    EXPECT_EQ(path_lengths(Architecture::stacked, depth, horizon).lengths,
              std::vector<std::size_t>{depth + horizon - 1});
    EXPECT_EQ(path_lengths(Architecture::rhn, depth, horizon).lengths,
              std::vector<std::size_t>{depth * horizon});
    EXPECT_EQ(path_lengths(Architecture::rhn_hsg, depth, horizon).lengths, hsg_lengths(depth, horizon));
  }
  const std::vector<std::size_t> deep{10, 40, 70, 100, 130, 160, 190, 220, 250, 280, 310};
  EXPECT_EQ(path_lengths(Architecture::rhn_hsg, 30, 10).lengths, deep);
}

TEST(Paths, EnumeratorAgreesWithClosedFormOnSmallGraphs) {
  for (auto arch : {Architecture::stacked, Architecture::rhn, Architecture::rhn_hsg}) {
    for (std::size_t depth = 1; depth <= 4; ++depth) {
      for (std::size_t horizon = 1; horizon <= 4; ++horizon) {
        EXPECT_EQ(enumerate_path_lengths(arch, depth, horizon).lengths,
                  path_lengths(arch, depth, horizon).lengths)
            << architecture_name(arch) << " L=" << depth << " T=" << horizon;
      }
    }
  }
}

TEST(Paths, StateGateShortestRouteIsHorizonAndLongestIsPlainNetwork) {
  for (std::size_t depth = 1; depth <= 6; ++depth) {
    for (std::size_t horizon = 1; horizon <= 6; ++horizon) {
      const auto r = path_lengths(Architecture::rhn_hsg, depth, horizon).lengths;
      EXPECT_EQ(r.front(), horizon);
      EXPECT_EQ(r.back(), horizon + depth * horizon);
      EXPECT_TRUE(std::is_sorted(r.begin(), r.end()));
    }
  }
}

TEST(Paths, ArchitectureNamesRoundTripAndBadInputsFail) {
  for (auto a : {Architecture::stacked, Architecture::rhn, Architecture::rhn_hsg}) {
    EXPECT_EQ(parse_architecture(architecture_name(a)), a);
  }
  EXPECT_THROW(parse_architecture("lstm"), ContractError);
  EXPECT_THROW(path_lengths(Architecture::rhn, 0, 3), ContractError);
  EXPECT_THROW(enumerate_path_lengths(Architecture::stacked, 6, 6, 10), ContractError);
}

TEST(Paths, CsvListsBothSources) {
  const auto f = path_lengths(Architecture::rhn, 2, 2);
  const auto e = enumerate_path_lengths(Architecture::rhn, 2, 2);
  EXPECT_EQ(path_report_csv(f, &e),
            "arch,depth,horizon,length,source\nrhn,2,2,4,formula\nrhn,2,2,4,enumerated\n");
}

ModelConfig probe_config(std::size_t depth, bool hsg) {
  ModelConfig c;
  c.depth = depth;
  c.hidden = 8;
  c.vocab = 6;
  c.use_hsg = hsg;
  return c;
}

TEST(Probe, OpenStateGateFreezesGradientNorm) {
  const ModelConfig c = probe_config(3, true);
  auto p = init_model<double>(c, 2);
  std::fill(p.hsg->b_g.begin(), p.hsg->b_g.end(), 1e9);
  Rng rng(4);
  const auto tokens = random_tokens(rng, 40, c.vocab);
  const auto report = gradient_probe(p, c, tokens, 5, 30);
  for (const auto& row : report.rows) EXPECT_NEAR(row.ratio(), 1.0, 1e-12) << "lag " << row.lag;
}

TEST(Probe, GradientNormMatchesDirectionalFiniteDifference) {
  for (bool hsg : {false, true}) {
    const ModelConfig c = probe_config(2, hsg);
    auto p = init_model<double>(c, 6);
    Rng rng(7);
    testing::jitter(p, rng, 0.5);
    const auto tokens = random_tokens(rng, 20, c.vocab);
    const std::size_t origin = 3;
    const auto report = gradient_probe(p, c, tokens, origin, 8);
    const auto start = state_after(p, c, tokens, origin);
    for (std::size_t lag : {1u, 4u, 8u}) {
      // Recover the gradient direction by central differences coordinate-wise,
      // then compare its norm with the probe.
      const double eps = 1e-5;
      double sq = 0.0;
      for (std::size_t i = 0; i < c.hidden; ++i) {
        auto up = start, down = start;
        auto& u = hsg ? up.s_hat : up.s;
        auto& d = hsg ? down.s_hat : down.s;
        u[i] += eps;
        d[i] -= eps;
        const double g = (probe_loss_at(p, c, tokens, origin, lag, up) -
                          probe_loss_at(p, c, tokens, origin, lag, down)) /
                         (2 * eps);
        sq += g * g;
      }
      const double numeric = std::sqrt(sq);
      const double analytic = report.rows[lag - 1].grad_norm;
      EXPECT_LT(std::abs(numeric - analytic) / analytic, 1e-4) << "hsg " << hsg << " lag " << lag;
    }
  }
}

TEST(Probe, PlainDeepNetworkGradientsDecayWithLag) {
  const ModelConfig c = probe_config(16, false);
  const std::size_t lags = 12;
  std::vector<std::vector<double>> per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = init_model<double>(c, seed);
    Rng rng(seed, 99);
    const auto tokens = random_tokens(rng, 30, c.vocab);
    const auto report = gradient_probe(p, c, tokens, 4, lags);
    std::vector<double> ratios;
    for (const auto& r : report.rows) ratios.push_back(r.ratio());
    per_seed.push_back(ratios);
  }
  double previous = INFINITY;
  for (std::size_t k = 0; k < lags; ++k) {
    std::vector<double> at;
    for (const auto& s : per_seed) at.push_back(s[k]);
    std::sort(at.begin(), at.end());
    EXPECT_LT(at[2], previous) << "lag " << k + 1;
    previous = at[2];
  }
}

TEST(Probe, RejectsShortSequences) {
  const ModelConfig c = probe_config(2, true);
  const auto p = init_model<double>(c, 1);
  const std::vector<std::uint32_t> tokens(10, 1);
  EXPECT_THROW(gradient_probe(p, c, tokens, 5, 10), ContractError);
}

TEST(Histogram, BinsAndMass) {
  const std::vector<double> v{0.0, 0.05, 0.1, 0.35, 0.99, 1.0};
  const auto h = histogram_of(v, 10);
  EXPECT_EQ(h.total, 6u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[3], 1u);
  EXPECT_EQ(h.counts[9], 2u);
  EXPECT_DOUBLE_EQ(h.mass_between(0.0, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(h.mass_between(0.7, 1.0), 2.0 / 6.0);
  EXPECT_EQ(histogram_csv(histogram_of(std::vector<double>{0.2, 0.7}, 2)), "bin_left,count\n0,1\n0.5,1\n");
  EXPECT_THROW(histogram_of(std::vector<double>{1.5}, 4), ContractError);
}

TEST(Histogram, CountsEveryUnitAtEverySampledStep) {
  ModelConfig c;
  c.depth = 1;
  c.hidden = 830;
  c.vocab = 10;
  const auto p = init_model<float>(c, 1);
  Rng rng(2);
  const auto tokens = random_tokens(rng, 120, c.vocab);
  const auto h = gate_histogram(p, c, tokens, 80, 20, 3);
  EXPECT_EQ(h.total, 66400u);
  EXPECT_EQ(h.positions.size(), 80u);
  EXPECT_TRUE(std::is_sorted(h.positions.begin(), h.positions.end()));
  EXPECT_EQ(std::adjacent_find(h.positions.begin(), h.positions.end()), h.positions.end());
}

TEST(Histogram, InitialGatesClusterNearBiasSigmoid) {
  ModelConfig c;
  c.depth = 2;
  c.hidden = 32;
  c.vocab = 10;
  const auto p = init_model<double>(c, 4);
  Rng rng(5);
  const auto tokens = random_tokens(rng, 200, c.vocab);
  const auto h = gate_histogram(p, c, tokens, 100, 20, 1);
  double mean = 0.0;
  for (double v : h.values) mean += v;
  mean /= static_cast<double>(h.values.size());
  EXPECT_NEAR(mean, 1.0 / (1.0 + std::exp(2.5)), 0.02);
  EXPECT_GT(h.mass_between(0.0, 0.3), 0.95);
}

TEST(Histogram, SamplingIsDeterministicInSeed) {
  ModelConfig c = probe_config(2, true);
  const auto p = init_model<double>(c, 1);
  Rng rng(6);
  const auto tokens = random_tokens(rng, 300, c.vocab);
  const auto a = gate_histogram(p, c, tokens, 50, 10, 7);
  const auto b = gate_histogram(p, c, tokens, 50, 10, 7);
  const auto d = gate_histogram(p, c, tokens, 50, 10, 8);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.positions, d.positions);
  ModelConfig plain = c;
  plain.use_hsg = false;
  EXPECT_THROW(gate_histogram(init_model<double>(plain, 1), plain, tokens, 10, 10, 1), ContractError);
}

TEST(GradCheck, SmallModelPassesInAllConfigurations) {
  for (bool coupled : {true, false}) {
    for (bool hsg : {true, false}) {
      ModelConfig c;
      c.depth = 2;
      c.hidden = 4;
      c.embed = 3;
      c.vocab = 5;
      c.coupled = coupled;
      c.use_hsg = hsg;
      const auto p = init_model<double>(c, 1);
      const std::vector<std::uint32_t> tok{0, 3, 1, 4};
      const std::span<const std::uint32_t> all(tok);
      const auto r = gradient_check(p, c, all.subspan(0, 3), all.subspan(1, 3), zero_carry<double>(c));
      EXPECT_LT(r.max_rel_error, 1e-5);
      EXPECT_EQ(r.coordinates, parameter_count(c));
    }
  }
}

TEST(GradCheck, RelativeErrorUsesLargerMagnitudeWithFloor) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-3, 1e-15);
}

}  // namespace
}  // namespace rhnlm
