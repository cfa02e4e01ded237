#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace cause {

// Runs fn(chunk_index, begin, end) over [0, n) split into `threads` contiguous
// chunks. Chunk boundaries are a pure function of (n, threads), so results
// that are merged in chunk order are reproducible for any thread count.
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  if (threads < 1) threads = 1;
  std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (t <= 1) {
    if (n > 0) fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::size_t base = n / t;
  std::size_t extra = n % t;
  std::vector<std::thread> pool;
  pool.reserve(t);
  std::size_t begin = 0;
  for (std::size_t c = 0; c < t; ++c) {
    std::size_t len = base + (c < extra ? 1 : 0);
    std::size_t end = begin + len;
    pool.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
    begin = end;
  }
  for (auto& th : pool) th.join();
}

inline std::size_t num_chunks(std::size_t n, int threads) {
  if (threads < 1) threads = 1;
  return std::min<std::size_t>(static_cast<std::size_t>(threads), n);
}

}  // namespace cause
