#pragma once

namespace mvfmm {

/// Worker count for a parallel region. `requested` > 0 wins; otherwise the
/// process default set by `set_default_threads`, then the MVFMM_THREADS
/// environment variable, then the OpenMP runtime's maximum.
int resolve_threads(int requested = 0);

void set_default_threads(int threads);

}  // namespace mvfmm
