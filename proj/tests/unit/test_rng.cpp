#include "cuspflow/parallel.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using cuspflow::CounterRng;

// Published Philox4x32-10 known-answer vectors.
TEST_CASE("philox known answers") {
  using A4 = std::array<uint32_t, 4>;
  CHECK(cuspflow::philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(cuspflow::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(cuspflow::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of seed, stream and index") {
  CounterRng a(7, 3, 11), b(7, 3, 11);
  for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());
  std::set<uint64_t> firsts;
  for (uint32_t stream = 0; stream < 4; ++stream)
    for (uint64_t idx = 0; idx < 4; ++idx) firsts.insert(CounterRng(7, stream, idx).next_u64());
  firsts.insert(CounterRng(8, 0, 0).next_u64());
  CHECK(firsts.size() == 17);
}

TEST_CASE("uniform draws: range and moments") {
  CounterRng r(1, 0, 0);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  // Mean 1/2 with sd sqrt(1/12 n); 5 sigma band.
  CHECK(std::fabs(s / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::fabs(s2 / n - 1.0 / 3.0) < 5e-3);
}

TEST_CASE("uniform_int is unbiased over a small range") {
  CounterRng r(2, 0, 0);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) {
    const auto v = r.uniform_int(-3, 3);
    REQUIRE(v >= -3);
    REQUIRE(v <= 3);
    ++counts[static_cast<size_t>(v + 3)];
  }
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.46);
}

TEST_CASE("normal draws have unit variance") {
  CounterRng r(3, 0, 0);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::fabs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("parallel_map does not depend on the worker count") {
  auto work = [](std::size_t i) {
    CounterRng r(5, 1, i);
    double acc = 0;
    for (int k = 0; k < 50; ++k) acc += r.normal();
    return acc;
  };
  const auto one = cuspflow::parallel_map<double>(257, 1, work);
  for (int threads : {2, 3, 8}) CHECK(cuspflow::parallel_map<double>(257, threads, work) == one);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  std::string what;
  try {
    cuspflow::parallel_for(100, 4, [](std::size_t i) {
      if (i % 10 == 7) throw std::runtime_error("index " + std::to_string(i));
    });
  } catch (const std::runtime_error& e) {
    what = e.what();
  }
  CHECK(what == "index 7");
}
