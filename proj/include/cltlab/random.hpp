// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace cltlab {

/// Philox4x32-10 block function (Salmon et al., Random123). Maps a 128-bit
/// counter and a 64-bit key to 128 output bits.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t splitmix64_mix(std::uint64_t z);

/// Identifies one random stream: the experiment-wide master seed and the
/// replicate index.
///
/// The generator for (master_seed, stream_id) is Philox4x32-10 with
///   key     = (lo32(master_seed), hi32(master_seed))
///   counter = (lo32(block), hi32(block), lo32(stream_id), hi32(stream_id))
/// where block = 0, 1, 2, ... counts 128-bit output blocks. Each block is
/// consumed as two 64-bit words, word = out[0] | out[1] << 32 first, then
/// out[2] | out[3] << 32. No state is carried between streams, so any
/// replicate can be regenerated in isolation.
struct SeedLineage {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SeedLineage&, const SeedLineage&) = default;
};

/// Derives the i-th independent master seed from a base seed. Used when an
/// experiment is repeated over several master seeds.
std::uint64_t derive_master_seed(std::uint64_t base, std::uint64_t index);

/// Counter-based generator for one SeedLineage. Satisfies
/// UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(SeedLineage lineage);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1); safe as input to normal_quantile.
  double uniform_open();
  /// Standard normal by inversion of uniform_open().
  double normal();
  /// Integer in [0, bound), bound >= 1, by multiply-shift of one 64-bit
  /// word; the bias is at most bound / 2^64.
  std::uint64_t below(std::uint64_t bound);

  SeedLineage lineage() const { return lineage_; }
  std::uint64_t blocks_consumed() const { return block_; }

 private:
  void refill();

  SeedLineage lineage_;
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int available_ = 0;
};

}  // namespace cltlab
