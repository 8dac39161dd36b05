#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace atomscope {

// Number of OpenMP threads a kernel should use; workers <= 0 means the
// runtime default. Kernels are written so the result is identical for any
// worker count.
inline int resolve_workers(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

}  // namespace atomscope
