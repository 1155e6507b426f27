#include "rbn/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif
#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace rbn {

namespace {
int g_threads = 0;  // 0 = pick hardware concurrency on first use

#ifdef __GLIBC__
// The training step churns multi-megabyte Eigen temporaries every epoch;
// without this glibc mmaps and unmaps each one, and the page-fault storm
// costs more than the math (measured ~2.5x on the training loop).
const bool g_malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif
}

int thread_count() {
  if (g_threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    g_threads = hw ? static_cast<int>(hw) : 1;
  }
  return g_threads;
}

void set_thread_count(int n) {
  g_threads = n > 0 ? n : 1;
#ifdef _OPENMP
  omp_set_num_threads(g_threads);
#endif
}

}  // namespace rbn
