// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rhnlm/tensor.hpp"
#include "support.hpp"

namespace rhnlm {
namespace {

using testing::for_cases;
using testing::pick;
using testing::random_vector;

TEST(Tensor, MatvecHandExample) {
  const auto m = Matrix<double>::from_rows({{1, 2}, {3, 4}});
  const auto y = matvec(m, std::vector<double>{1, 1});
  EXPECT_EQ(y, (std::vector<double>{3, 7}));
}

TEST(Tensor, IdentityMatvecReturnsInput) {
  for_cases(20, 3, [](Rng& rng, std::size_t) {
    const std::size_t n = pick(rng, 1, 40);
    const auto v = random_vector<double>(rng, n);
    EXPECT_EQ(matvec(Matrix<double>::identity(n), v), v);
  });
}

TEST(Tensor, ShapeMismatchIsContractError) {
  const Matrix<double> m(2, 3);
  EXPECT_THROW(matvec(m, std::vector<double>{1, 2}), ContractError);
  EXPECT_THROW((Matrix<double>::from_rows({{1, 2}, {3}})), ContractError);
}

TEST(Tensor, TransposedProductAgreesWithExplicitLoop) {
  for_cases(30, 5, [](Rng& rng, std::size_t) {
    const std::size_t r = pick(rng, 1, 9), c = pick(rng, 1, 9);
    Matrix<double> m(r, c);
    for (auto& v : m.values()) v = rng.uniform(-1, 1);
    const auto x = random_vector<double>(rng, r);
    std::vector<double> out(c, 0.0);
    matvec_transposed_acc(m, std::span<const double>(x), std::span<double>(out));
    for (std::size_t j = 0; j < c; ++j) {
      double expect = 0.0;
      for (std::size_t i = 0; i < r; ++i) expect += m(i, j) * x[i];
      EXPECT_NEAR(out[j], expect, 1e-14);
    }
  });
}

TEST(Tensor, OuterProductAccumulates) {
  Matrix<double> m(2, 2, 1.0);
  const std::vector<double> x{1, 2}, y{3, 4};
  outer_acc(m, std::span<const double>(x), std::span<const double>(y));
  EXPECT_EQ(m, (Matrix<double>::from_rows({{4, 5}, {7, 9}})));
}

TEST(Tensor, SigmoidSaturatesExactly) {
  EXPECT_EQ(sigmoid(1e9), 1.0);
  EXPECT_EQ(sigmoid(-1e9), 0.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(1e9f), 1.0f);
  EXPECT_EQ(sigmoid(-1e9f), 0.0f);
}

TEST(Tensor, SigmoidIsSymmetric) {
  for_cases(50, 7, [](Rng& rng, std::size_t) {
    const double x = rng.uniform(-20, 20);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
  });
}

TEST(Tensor, UniformLogitsGiveLogVocab) {
  for (std::size_t v : {2u, 7u, 1000u}) {
    const std::vector<double> logits(v, 0.25);
    const auto r = softmax_xent(logits, v - 1);
    EXPECT_NEAR(r.loss, std::log(static_cast<double>(v)), 1e-12);
  }
}

TEST(Tensor, SoftmaxXentGradientSumsToZero) {
  for_cases(30, 9, [](Rng& rng, std::size_t) {
    const std::size_t v = pick(rng, 2, 30);
    const auto logits = random_vector<double>(rng, v, 5.0);
    const auto r = softmax_xent(logits, rng.below(v));
    double s = 0.0;
    for (double g : r.grad) s += g;
    EXPECT_NEAR(s, 0.0, 1e-14);
  });
}

TEST(Tensor, SoftmaxXentGradientMatchesFiniteDifferences) {
  for_cases(20, 13, [](Rng& rng, std::size_t) {
    const std::size_t v = pick(rng, 2, 12);
    auto logits = random_vector<double>(rng, v, 3.0);
    const std::size_t target = rng.below(v);
    const auto r = softmax_xent(logits, target);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < v; ++i) {
      const double saved = logits[i];
      logits[i] = saved + eps;
      const double up = softmax_xent(logits, target).loss;
      logits[i] = saved - eps;
      const double down = softmax_xent(logits, target).loss;
      logits[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      // Entries below 1e-2 are compared absolutely: rounding in the
      // difference quotient is about 1e-10 at this step size.
      EXPECT_LE(std::abs(numeric - r.grad[i]) / std::max({std::abs(numeric), std::abs(r.grad[i]), 1e-2}),
                1e-7);
    }
  });
}

TEST(Tensor, SoftmaxXentIsStableForHugeLogits) {
  const std::vector<double> logits{1e4, 0.0, -1e4};
  const auto r = softmax_xent(logits, 0);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(softmax_xent(logits, 2).loss));
}

TEST(Tensor, SoftmaxXentRejectsBadTarget) {
  const std::vector<double> logits{0.0, 1.0};
  EXPECT_THROW(softmax_xent(logits, 2), ContractError);
}

TEST(Tensor, CheckFiniteFlagsNanAndInf) {
  const std::vector<double> ok{1.0, 2.0};
  EXPECT_NO_THROW(check_finite(std::span<const double>(ok), "ok"));
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(check_finite(std::span<const double>(bad), "bad"), NumericalError);
  const std::vector<float> inf{std::numeric_limits<float>::infinity()};
  EXPECT_THROW(check_finite(std::span<const float>(inf), "inf"), NumericalError);
}

}  // namespace
}  // namespace rhnlm
