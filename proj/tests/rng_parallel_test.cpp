#include "qfl/parallel.hpp"
#include "qfl/rng.hpp"

#include <doctest.h>

#include <cstdlib>
#include <stdexcept>
#include <vector>

using namespace qfl;

TEST_CASE("derived seeds separate labels and indices") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  static_assert(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("counter rng replays and stays in range") {
  CounterRng a(9);
  CounterRng b(9);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    CHECK(a() == b());
    const double u = a.uniform();
    b.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(a.counter() == 20000);
  CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += static_cast<int>(i); });
  for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  parallel_for(0, [](std::size_t) { FAIL("called on empty range"); });
  CHECK(worker_count() >= 1);
}
