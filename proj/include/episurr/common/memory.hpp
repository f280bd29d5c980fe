#pragma once

#include <cstddef>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace episurr {

/// Keeps large freed blocks in the heap instead of returning them to the kernel,
/// so repeated predictions do not pay for fresh page faults. No-op off glibc.
inline void retain_freed_memory()
{
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

} // namespace episurr
