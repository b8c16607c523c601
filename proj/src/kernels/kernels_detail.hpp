#pragma once

#include "omnigaze/kernels.hpp"

namespace omnigaze::kernels {

// Defined in the per-ISA translation units; return nullptr when the build or
// the running CPU cannot use that lane.
const KernelTable* detail_avx2_table();
const KernelTable* detail_neon_table();

}  // namespace omnigaze::kernels
