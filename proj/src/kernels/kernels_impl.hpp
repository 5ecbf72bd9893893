// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rhnlm/kernels.hpp"

namespace rhnlm::kernels::detail {

template <typename Real>
const KernelTable<Real>& scalar_table();

#ifdef RHNLM_HAS_AVX2
template <typename Real>
const KernelTable<Real>& avx2_table();
#endif

}  // namespace rhnlm::kernels::detail
