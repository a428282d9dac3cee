#pragma once

#include <functional>

namespace hptune {

/// Runs fn(0..n-1) on the OpenMP pool (dynamic schedule). If any call throws, the exception of
/// the lowest failing index is rethrown after all iterations finish.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Number of threads OpenMP will use for the next parallel region.
int max_threads();

}  // namespace hptune
