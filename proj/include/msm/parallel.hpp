#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace msm {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Static-schedule parallel loop. Bodies must write only to their own slot;
// under that contract results are identical for any thread count.
template <class F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    body(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) {
    body(i);
  }
#endif
}

}  // namespace msm
