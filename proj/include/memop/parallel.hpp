#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace memop {

// Worker cap: MEMOP_THREADS if set and positive, else the hardware count.
inline unsigned thread_count() {
  if (const char* env = std::getenv("MEMOP_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n) on up to `threads` workers. Work is strided by index, so
// any per-index output is independent of the thread count. The exception from the
// lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// splitmix64 finaliser, used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace memop
