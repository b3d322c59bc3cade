#pragma once

#include "hyperme/kernels.hpp"

namespace hyperme::kernels::detail {

const KernelTable& scalar_table() noexcept;

#if defined(HYPERME_HAVE_AVX2_TU)
const KernelTable& avx2_table() noexcept;
#endif

}  // namespace hyperme::kernels::detail
