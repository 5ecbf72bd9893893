// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "rhnlm/hsg.hpp"
#include "support.hpp"

namespace rhnlm {
namespace {

using testing::for_cases;
using testing::pick;
using testing::random_vector;

HsgParams<double> random_hsg(Rng& rng, std::size_t n, double scale) {
  auto p = make_hsg_params<double>(n);
  for (auto& v : p.w_r.values()) v = rng.uniform(-scale, scale);
  for (auto& v : p.w_f.values()) v = rng.uniform(-scale, scale);
  for (auto& v : p.b_g) v = rng.uniform(-scale, scale);
  return p;
}

TEST(Hsg, OutputIsConvexMix) {
  for_cases(50, 41, [](Rng& rng, std::size_t) {
    const std::size_t n = pick(rng, 1, 10);
    const auto p = random_hsg(rng, n, 2.0);
    const auto prev = random_vector<double>(rng, n);
    const auto sl = random_vector<double>(rng, n);
    const auto c = hsg_forward<double>(prev, sl, p);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GT(c.g[i], 0.0);
      ASSERT_LT(c.g[i], 1.0);
      EXPECT_NEAR(c.s_hat[i], c.g[i] * prev[i] + (1 - c.g[i]) * sl[i], 1e-15);
      EXPECT_GE(c.s_hat[i], std::min(prev[i], sl[i]) - 1e-15);
      EXPECT_LE(c.s_hat[i], std::max(prev[i], sl[i]) + 1e-15);
    }
  });
}

TEST(Hsg, GateMatchesHandComputation) {
  auto p = make_hsg_params<double>(2);
  p.w_r = Matrix<double>::from_rows({{1, 0}, {0, 2}});
  p.w_f = Matrix<double>::from_rows({{0, 1}, {1, 0}});
  p.b_g = {0.5, -1};
  const std::vector<double> prev{0.2, -0.3}, sl{0.4, 0.1};
  const auto c = hsg_forward<double>(prev, sl, p);
  const double g0 = 1 / (1 + std::exp(-(0.2 + 0.1 + 0.5)));
  const double g1 = 1 / (1 + std::exp(-(-0.6 + 0.4 - 1)));
  EXPECT_DOUBLE_EQ(c.g[0], g0);
  EXPECT_DOUBLE_EQ(c.g[1], g1);
}

TEST(Hsg, SaturatedGatesSelectOneSideExactly) {
  Rng rng(5);
  auto p = random_hsg(rng, 4, 1.0);
  const auto prev = random_vector<double>(rng, 4);
  const auto sl = random_vector<double>(rng, 4);
  std::fill(p.b_g.begin(), p.b_g.end(), -1e9);
  EXPECT_EQ(hsg_forward<double>(prev, sl, p).s_hat, sl);
  std::fill(p.b_g.begin(), p.b_g.end(), 1e9);
  EXPECT_EQ(hsg_forward<double>(prev, sl, p).s_hat, prev);
}

double weighted_sum(const std::vector<double>& prev, const std::vector<double>& sl,
                    const HsgParams<double>& p, const std::vector<double>& w) {
  const auto c = hsg_forward<double>(prev, sl, p);
  double t = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) t += w[i] * c.s_hat[i];
  return t;
}

TEST(Hsg, BackwardMatchesFiniteDifferences) {
  for_cases(10, 43, [](Rng& rng, std::size_t) {
    const std::size_t n = pick(rng, 1, 6);
    auto p = random_hsg(rng, n, 1.5);
    auto prev = random_vector<double>(rng, n);
    auto sl = random_vector<double>(rng, n);
    const auto w = random_vector<double>(rng, n);
    const auto c = hsg_forward<double>(prev, sl, p);
    auto grads = make_hsg_params<double>(n);
    const auto back = hsg_backward<double>(w, c, p, grads);
    const double eps = 1e-5;
    auto check = [&](double& slot, double analytic) {
      const double saved = slot;
      slot = saved + eps;
      const double up = weighted_sum(prev, sl, p, w);
      slot = saved - eps;
      const double down = weighted_sum(prev, sl, p, w);
      slot = saved;
      const double num = (up - down) / (2 * eps);
      EXPECT_LE(std::abs(num - analytic) / std::max({std::abs(num), std::abs(analytic), 1e-6}), 1e-6);
    };
    for (std::size_t i = 0; i < n * n; ++i) {
      check(p.w_r.values()[i], grads.w_r.values()[i]);
      check(p.w_f.values()[i], grads.w_f.values()[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      check(p.b_g[i], grads.b_g[i]);
      check(prev[i], back.grad_s_hat_prev[i]);
      check(sl[i], back.grad_s_l[i]);
    }
  });
}

TEST(Hsg, CollectsGateValuesInStepOrder) {
  Rng rng(8);
  const auto p = random_hsg(rng, 3, 1.0);
  std::vector<HsgStepCache<double>> caches;
  for (int t = 0; t < 4; ++t) {
    caches.push_back(hsg_forward<double>(random_vector<double>(rng, 3), random_vector<double>(rng, 3), p));
  }
  const auto values = collect_gate_values<double>(caches);
  ASSERT_EQ(values.size(), 12u);
  EXPECT_EQ(values[4], caches[1].g[1]);
}

TEST(Hsg, ShapeErrors) {
  const auto p = make_hsg_params<double>(3);
  const std::vector<double> a{1, 2}, b{1, 2, 3};
  EXPECT_THROW(hsg_forward<double>(a, b, p), ContractError);
  EXPECT_THROW(make_hsg_params<double>(0), ContractError);
}

}  // namespace
}  // namespace rhnlm
