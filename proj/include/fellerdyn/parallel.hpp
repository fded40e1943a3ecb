#pragma once

#include <functional>

namespace fellerdyn {

/// Runs fn(k) for k in [0, count) on up to `threads` workers using contiguous
/// static chunks. fn must be safe to call concurrently for distinct k; results
/// should be written to preallocated per-index slots so that reductions can be
/// performed afterwards in index order (keeps outputs independent of the
/// thread count).
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

/// Thread count resolution: explicit value if > 0, else FELLERDYN_THREADS,
/// else hardware concurrency.
int resolve_threads(int requested);

}  // namespace fellerdyn
