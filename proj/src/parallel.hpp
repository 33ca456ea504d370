#pragma once

#include "hfdr/core.hpp"

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hfdr::detail {

inline int resolve_workers(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

// Runs f(i) for i in [0, count). Each index writes only its own outputs, so
// results do not depend on the schedule. The exception of the lowest failing
// index is rethrown.
template <typename F>
void parallel_for(Index count, int workers, F&& f) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const int threads = resolve_workers(workers);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (Index i = 0; i < count; ++i) {
    try {
      f(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace hfdr::detail
