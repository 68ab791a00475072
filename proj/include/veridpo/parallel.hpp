#pragma once

// OpenMP-parallel loop over independent work items, with a serial mode kept
// as the reference implementation for equivalence tests and benchmarks.
// Callers write results into per-index slots; no reduction happens here, so
// output is identical regardless of scheduling.

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace veridpo {

enum class ExecMode { Serial, Parallel };

template <typename Fn>
void parallel_for(std::size_t n, ExecMode mode, Fn&& fn) {
#if defined(_OPENMP)
    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            fn(static_cast<std::size_t>(i));
        }
        return;
    }
#else
    (void)mode;
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

inline int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace veridpo
