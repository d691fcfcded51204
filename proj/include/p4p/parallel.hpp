#pragma once

// OpenMP loop helpers.  Kernels parallelize over an index range and write
// only to per-index slots; any floating-point reduction happens serially
// over the stored slots afterwards, so results do not depend on the thread
// count.

#include <cstdint>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace p4p::par {

inline int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#if defined(_OPENMP)
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

template <class F>
void for_index(std::int64_t n, F&& body) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

// Serial twin of for_index; reference implementations run through this so
// tests can compare the two paths directly.
template <class F>
void for_index_serial(std::int64_t n, F&& body) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

} // namespace p4p::par
