#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace nullfold {

// Worker count used by grid evaluations. 0 selects NULLFOLD_THREADS or, when
// that is unset, the hardware concurrency.
void set_thread_count(int threads);
int thread_count();

// Calls body(i) for i in [0, n). Each index runs exactly once; results must be
// written to per-index slots so reductions stay in a fixed order. The
// exception thrown at the lowest index, if any, is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nullfold
