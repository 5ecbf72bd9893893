// SPDX-License-Identifier: Apache-2.0
//
// Dense inner-loop kernels. Every kernel has a portable scalar reference
// implementation; SIMD variants are compiled into separate translation units
// with their own target flags and picked at runtime from CPU feature bits.
// Setting RHNLM_ISA=scalar in the environment forces the reference path.
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace rhnlm::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Matrices are row-major with a row stride equal to `cols`.
template <typename Real>
struct KernelTable {
  Real (*dot)(const Real* a, const Real* b, std::size_t n);
  Real (*sum_squares)(const Real* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(Real alpha, const Real* x, Real* y, std::size_t n);
  // y = A x, or y += A x when accumulate is set
  void (*gemv)(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y,
               bool accumulate);
  // y += A^T x
  void (*gemv_t)(const Real* a, std::size_t rows, std::size_t cols, const Real* x, Real* y);
  // A += x y^T
  void (*ger)(Real* a, std::size_t rows, std::size_t cols, const Real* x, const Real* y);
};

// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa);

// ISAs usable on this machine, scalar first.
std::vector<Isa> available_isas();

// Best available ISA, unless overridden by RHNLM_ISA.
Isa active_isa();

template <typename Real>
const KernelTable<Real>& table(Isa isa);

template <typename Real>
const KernelTable<Real>& active() {
  static const KernelTable<Real>& t = table<Real>(active_isa());
  return t;
}

}  // namespace rhnlm::kernels
