#include "posecal/parallel.hpp"

#include <doctest.h>

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

using namespace posecal;

TEST_SUITE("parallel") {

TEST_CASE("derived seeds are fixed and distinct") {
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(derive_seed(7, 3) == mix64(mix64(7) + 3 * 0x9e3779b97f4a7c15ULL));
  CHECK(derive_seed(2, 4) != derive_seed(5, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t master = 0; master < 10; ++master) {
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(master, i));
  }
  CHECK(seen.size() == 10000);
}

TEST_CASE("parallel_for visits each index once") {
  for (int threads : {0, 1, 3}) {
    std::vector<int> hits(257, 0);
    parallel_for(hits.size(), Execution{threads}, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
  int calls = 0;
  parallel_for(0, Execution{}, [&](std::size_t) { ++calls; });
  CHECK(calls == 0);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (int threads : {1, 4}) {
    std::string what;
    try {
      parallel_for(100, Execution{threads}, [](std::size_t i) {
        if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
      });
    } catch (const std::runtime_error& e) {
      what = e.what();
    }
    CHECK(what == "17");
  }
}

TEST_CASE("serial execution flag") {
  CHECK(Execution::serial().is_serial());
  CHECK_FALSE(Execution{4}.is_serial());
}

}
