// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "rhnlm/errors.hpp"

namespace rhnlm::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(RHNLM_HAS_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::scalar};
  if (isa_available(Isa::avx2)) out.push_back(Isa::avx2);
  return out;
}

Isa active_isa() {
  static const Isa chosen = [] {
    if (const char* forced = std::getenv("RHNLM_ISA")) {
      const std::string name(forced);
      if (name == "scalar") return Isa::scalar;
      if (name == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
    }
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  }();
  return chosen;
}

template <typename Real>
const KernelTable<Real>& table(Isa isa) {
  if (!isa_available(isa)) {
    throw ContractError("kernels: ISA '" + std::string(isa_name(isa)) + "' not available");
  }
#ifdef RHNLM_HAS_AVX2
  if (isa == Isa::avx2) return detail::avx2_table<Real>();
#endif
  return detail::scalar_table<Real>();
}

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);

}  // namespace rhnlm::kernels
