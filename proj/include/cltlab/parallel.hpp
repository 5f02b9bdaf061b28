// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cltlab {

/// Worker count from CLTLAB_THREADS, else the hardware concurrency.
int default_threads();

/// Splits [0, count) into fixed blocks of `block` items and calls
/// fn(block_index, begin, end) for each, on up to `threads` workers. Block
/// boundaries do not depend on the worker count, so per-block partial
/// results reduced in block order are identical for any `threads`.
template <class Fn>
void parallel_blocks(std::int64_t count, std::int64_t block, int threads, Fn&& fn) {
  if (count <= 0) return;
  block = std::max<std::int64_t>(block, 1);
  const std::int64_t blocks = (count + block - 1) / block;
  const int workers = static_cast<int>(
      std::clamp<std::int64_t>(threads, 1, blocks));
  auto run = [&](std::int64_t b) {
    const std::int64_t begin = b * block;
    fn(b, begin, std::min(count, begin + block));
  };
  if (workers == 1) {
    for (std::int64_t b = 0; b < blocks; ++b) run(b);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t b = next++; b < blocks; b = next++) {
        try {
          run(b);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = blocks;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace cltlab
