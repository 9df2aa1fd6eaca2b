#pragma once

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tailattrib {

// Worker cap: TAILATTRIB_THREADS if set, else the OpenMP default.
inline int worker_count() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("TAILATTRIB_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0 && cap < n) n = cap;
  }
  return n;
#else
  return 1;
#endif
}

// Parallel loop over [0, n). Work items must be independent; callers that
// need reproducible output key their RNG off the index, so scheduling order
// never affects results and the serial path is bit-identical.
template <class F>
void parallel_for(long n, F&& f, bool serial = false) {
  if (serial || worker_count() == 1) {
    for (long i = 0; i < n; ++i) f(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (long i = 0; i < n; ++i) f(i);
#else
  for (long i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace tailattrib
