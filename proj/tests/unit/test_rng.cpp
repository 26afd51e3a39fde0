#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "treat/rng.hpp"

using namespace treat;

TEST_SUITE("rng") {
  TEST_CASE("philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) ==
          C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                            K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                            K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("streams are reproducible and distinct") {
    Rng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      CHECK(x != c.next_u64());
      CHECK(x != d.next_u64());
    }
  }

  TEST_CASE("uniform and normal moments") {
    Rng rng(7);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    double lo = 1, hi = 0;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      su += u;
      lo = std::min(lo, u);
      hi = std::max(hi, u);
      const double z = rng.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("uniform_int covers the inclusive range evenly") {
    Rng rng(1);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
      const auto v = rng.uniform_int(-2, 2);
      REQUIRE(v >= -2);
      REQUIRE(v <= 2);
      ++counts[static_cast<std::size_t>(v + 2)];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("sample_without_replacement is sorted and distinct") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const auto s = rng.sample_without_replacement(30, 12);
      REQUIRE(s.size() == 12);
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 12);
      CHECK(s.back() < 30);
    }
    CHECK(rng.sample_without_replacement(5, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
}
