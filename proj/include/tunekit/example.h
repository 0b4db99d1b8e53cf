#pragma once

#include <string>

#include "tunekit/kerneldef.h"

namespace tunekit {

// Restriction bounding the threads per block of the example stencil.
inline constexpr const char* max_threads_restriction = "block_x * block_y * block_z <= 1024";

/**
 * Parameter space of a tunable 3-D stencil kernel: block size, tiling
 * factor, loop unrolling and tiling stride per axis, the block unravel
 * permutation, and the minimum number of resident blocks per SM. 7,776,000
 * points without restrictions.
 */
ConfigSpace example_stencil_space(bool limit_threads = false);

// Full definition of the stencil kernel `name` over problem (arg0, arg1, arg2),
// with `precision` ("float" or "double") passed as template argument.
KernelDefinition example_stencil_definition(
    const std::string& name = "advec_u",
    const std::string& precision = "float",
    bool limit_threads = false);

}  // namespace tunekit
