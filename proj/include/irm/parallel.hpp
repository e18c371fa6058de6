#pragma once

#include <cstddef>

namespace irm {

// Execution policy for the data-parallel kernels (partition scans,
// multi-start solves, family sweeps). The serial path is the reference
// implementation; the parallel path must produce identical results, so
// kernels only ever write to per-index slots and merge in index order.
enum class Exec { serial, parallel };

template <typename Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t i = 0; i < n; ++i) {
    fn(i);
  }
}

}  // namespace irm
