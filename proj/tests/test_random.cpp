// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>
#include <vector>

#include "cltlab/numerics.hpp"
#include "cltlab/random.hpp"
#include "doctest.h"

using namespace cltlab;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                      {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                      {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Stream word layout follows the documented counter and key") {
  const SeedLineage lineage{0x0123456789abcdefULL, 0x0000000500000007ULL};
  Stream s(lineage);
  for (std::uint64_t block = 0; block < 3; ++block) {
    const PhiloxCounter out = philox4x32_10(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 7u, 5u},
        {0x89abcdefu, 0x01234567u});
    const std::uint64_t w0 = out[0] | static_cast<std::uint64_t>(out[1]) << 32;
    const std::uint64_t w1 = out[2] | static_cast<std::uint64_t>(out[3]) << 32;
    CHECK(s() == w0);
    CHECK(s() == w1);
  }
  CHECK(s.blocks_consumed() == 3);
}

TEST_CASE("Streams are reproducible and distinct") {
  const SeedLineage a{42, 3};
  Stream s1(a), s2(a);
  for (int i = 0; i < 1000; ++i) REQUIRE(s1() == s2());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t id = 0; id < 1000; ++id) firsts.insert(Stream({42, id})());
  for (std::uint64_t seed = 0; seed < 1000; ++seed) firsts.insert(Stream({seed + 1000, 0})());
  CHECK(firsts.size() == 2000);
}

TEST_CASE("uniform ranges and moments") {
  Stream s({9, 0});
  double sum = 0.0, sq = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = s.uniform_open();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / count;
  CHECK(std::fabs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / count));
  CHECK(std::fabs(sq / count - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal draws have unit variance") {
  Stream s({10, 0});
  double sum = 0.0, sq = 0.0, quart = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
    quart += z * z * z * z;
  }
  CHECK(std::fabs(sum / count) < 4.0 / std::sqrt(count));
  CHECK(std::fabs(sq / count - 1.0) < 4.0 * std::sqrt(2.0 / count));
  CHECK(std::fabs(quart / count - 3.0) < 4.0 * std::sqrt(96.0 / count));
}

TEST_CASE("below is uniform on small ranges") {
  Stream s({11, 0});
  std::vector<int> counts(7, 0);
  const int total = 70000;
  for (int i = 0; i < total; ++i) {
    const auto v = s.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 22.46);  // chi-square 6 dof, 0.999 quantile
  CHECK(s.below(1) == 0);
}

TEST_CASE("derive_master_seed") {
  CHECK(derive_master_seed(5, 0) == derive_master_seed(5, 0));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 100; ++i) seeds.insert(derive_master_seed(5, i));
  CHECK(seeds.size() == 100);
  CHECK(seeds.count(5) == 0);
  // splitmix64 first outputs from state 0 (reference implementation).
  CHECK(splitmix64_mix(0x9e3779b97f4a7c15ULL) == 0xe220a8397b1dcdafULL);
}
