#include "posecal/parallel.hpp"

namespace posecal {

bool Execution::is_serial() const {
#ifdef _OPENMP
  // Nested regions run serially; so does an explicit single thread.
  return threads == 1 || omp_in_parallel();
#else
  return true;
#endif
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) + index * 0x9e3779b97f4a7c15ULL);
}

}  // namespace posecal
