#include "mvfmm/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace mvfmm {

namespace {
std::atomic<int> default_threads{0};
}

void set_default_threads(int threads) { default_threads = threads > 0 ? threads : 0; }

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const int t = default_threads.load(); t > 0) return t;
  if (const char* env = std::getenv("MVFMM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return omp_get_max_threads();
}

}  // namespace mvfmm
