#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace posecal {

// Degree of parallelism for the batch kernels. threads == 1 selects the
// serial reference loop; 0 means the OpenMP default. Results never depend
// on this value.
struct Execution {
  int threads = 0;

  static Execution serial() { return Execution{1}; }
  bool is_serial() const;
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed of task `index` under `master`: output `index` of a splitmix64 stream
// seeded with mix64(master), i.e. mix64(mix64(master) + index * 0x9e3779b97f4a7c15).
// Fixed algorithm; parallel tasks derive their random state from it so the
// outcome is independent of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Runs body(i) for i in [0, count). Each index must write only its own
// output slot. If any body throws, the exception of the lowest failing index
// is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t count, const Execution& exec, Body&& body) {
  if (exec.is_serial() || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#ifdef _OPENMP
  const int threads = exec.threads > 0 ? exec.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace posecal
