#pragma once

#include "ctcv/kernels/kernels.hpp"

namespace ctcv::kernels::detail {

template <typename T>
const KernelSet<T>& scalar_set();

#ifdef CTCV_HAVE_AVX2
template <typename T>
const KernelSet<T>& avx2_set();
#endif

}  // namespace ctcv::kernels::detail
