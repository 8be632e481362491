#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tagagg {

// Instances are cut into fixed-size chunks whose boundaries do not depend on
// the worker count. Callers accumulate one partial result per chunk and
// reduce partials in chunk order, so sums are bit-identical for any number
// of threads.
inline constexpr std::size_t kChunkSize = 512;

inline std::size_t num_chunks(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

// Runs fn(chunk, begin, end) for every chunk of [0, n).
template <class Fn>
void for_each_chunk(std::size_t n, std::size_t threads, Fn&& fn) {
  const std::size_t chunks = num_chunks(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c)
      fn(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            fn(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace tagagg
