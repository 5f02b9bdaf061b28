// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/random.hpp"

#include "cltlab/numerics.hpp"

namespace cltlab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline PhiloxCounter philox_round(const PhiloxCounter& ctr, const PhiloxKey& key) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
  mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    counter = philox_round(counter, key);
  }
  return counter;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_master_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64_mix(base + 0x9e3779b97f4a7c15ull * (index + 1));
}

Stream::Stream(SeedLineage lineage)
    : lineage_(lineage),
      key_{static_cast<std::uint32_t>(lineage.master_seed),
           static_cast<std::uint32_t>(lineage.master_seed >> 32)} {}

void Stream::refill() {
  const PhiloxCounter ctr = {static_cast<std::uint32_t>(block_),
                             static_cast<std::uint32_t>(block_ >> 32),
                             static_cast<std::uint32_t>(lineage_.stream_id),
                             static_cast<std::uint32_t>(lineage_.stream_id >> 32)};
  const PhiloxCounter out = philox4x32_10(ctr, key_);
  ++block_;
  // Stored in reverse so that buffer_[available_ - 1] pops in order.
  buffer_[1] = static_cast<std::uint64_t>(out[0]) |
               (static_cast<std::uint64_t>(out[1]) << 32);
  buffer_[0] = static_cast<std::uint64_t>(out[2]) |
               (static_cast<std::uint64_t>(out[3]) << 32);
  available_ = 2;
}

Stream::result_type Stream::operator()() {
  if (available_ == 0) refill();
  return buffer_[--available_];
}

double Stream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Stream::uniform_open() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() { return normal_quantile(uniform_open()); }

std::uint64_t Stream::below(std::uint64_t bound) {
  const unsigned __int128 product =
      static_cast<unsigned __int128>((*this)()) * bound;
  return static_cast<std::uint64_t>(product >> 64);
}

}  // namespace cltlab
