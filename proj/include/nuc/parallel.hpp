#pragma once

#include <cstddef>
#include <functional>

namespace nuc {

/// Worker count: NUC_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(begin, end) over contiguous shards of [0, n). Each index is
/// visited exactly once; callers write results by index so output order never
/// depends on the worker count.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace nuc
