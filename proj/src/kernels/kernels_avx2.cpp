// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and must only
// be entered after dispatch has confirmed CPU support.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace rhnlm::kernels::detail {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

// Lane traits so each kernel is written once for both precisions.
template <typename Real>
struct Lanes;

template <>
struct Lanes<float> {
  using Reg = __m256;
  static constexpr std::size_t width = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
  static Reg broadcast(float v) { return _mm256_set1_ps(v); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static float sum(Reg v) { return hsum(v); }
};

template <>
struct Lanes<double> {
  using Reg = __m256d;
  static constexpr std::size_t width = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
  static Reg broadcast(double v) { return _mm256_set1_pd(v); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static double sum(Reg v) { return hsum(v); }
};

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  using L = Lanes<Real>;
  constexpr std::size_t w = L::width;
  auto acc0 = L::zero();
  auto acc1 = L::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
    acc1 = L::fmadd(L::load(a + i + w), L::load(b + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
  Real acc = L::sum(L::add(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
Real sum_squares(const Real* a, std::size_t n) {
  return dot(a, a, n);
}

template <typename Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  using L = Lanes<Real>;
  constexpr std::size_t w = L::width;
  const auto va = L::broadcast(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) L::store(y + i, L::fmadd(va, L::load(x + i), L::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four rows per pass so each load of x feeds four FMAs.
template <typename Real>
void gemv(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y,
          bool accumulate) {
  using L = Lanes<Real>;
  constexpr std::size_t w = L::width;
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const Real* a0 = a + (r + 0) * cols;
    const Real* a1 = a + (r + 1) * cols;
    const Real* a2 = a + (r + 2) * cols;
    const Real* a3 = a + (r + 3) * cols;
    auto s0 = L::zero(), s1 = L::zero(), s2 = L::zero(), s3 = L::zero();
    std::size_t c = 0;
    for (; c + w <= cols; c += w) {
      const auto xv = L::load(x + c);
      s0 = L::fmadd(L::load(a0 + c), xv, s0);
      s1 = L::fmadd(L::load(a1 + c), xv, s1);
      s2 = L::fmadd(L::load(a2 + c), xv, s2);
      s3 = L::fmadd(L::load(a3 + c), xv, s3);
    }
    Real v0 = L::sum(s0), v1 = L::sum(s1), v2 = L::sum(s2), v3 = L::sum(s3);
    for (; c < cols; ++c) {
      v0 += a0[c] * x[c];
      v1 += a1[c] * x[c];
      v2 += a2[c] * x[c];
      v3 += a3[c] * x[c];
    }
    if (accumulate) {
      y[r] += v0;
      y[r + 1] += v1;
      y[r + 2] += v2;
      y[r + 3] += v3;
    } else {
      y[r] = v0;
      y[r + 1] = v1;
      y[r + 2] = v2;
      y[r + 3] = v3;
    }
  }
  for (; r < rows; ++r) {
    const Real v = dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + v : v;
  }
}

template <typename Real>
void gemv_t(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != Real(0)) axpy(x[r], a + r * cols, y, cols);
  }
}

template <typename Real>
void ger(Real* a, std::size_t rows, std::size_t cols, const Real* x, const Real* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != Real(0)) axpy(x[r], y, a + r * cols, cols);
  }
}

template <typename Real>
constexpr KernelTable<Real> kTable{&dot<Real>,  &sum_squares<Real>, &axpy<Real>,
                                   &gemv<Real>, &gemv_t<Real>,      &ger<Real>};

}  // namespace

template <typename Real>
const KernelTable<Real>& avx2_table() {
  return kTable<Real>;
}

template const KernelTable<float>& avx2_table<float>();
template const KernelTable<double>& avx2_table<double>();

}  // namespace rhnlm::kernels::detail
