#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace distinct {

namespace detail {
inline std::atomic<int> thread_override{-1};
}

/// Overrides the worker count for this process. 0 restores automatic
/// selection, negative values defer to DISTINCT_THREADS again.
inline void set_thread_count(int n) { detail::thread_override.store(n); }

/// Worker count: explicit override, else DISTINCT_THREADS, else hardware.
/// A value of 0 from either source means "auto".
inline unsigned thread_count() {
  int n = detail::thread_override.load();
  if (n < 0) {
    n = 0;
    if (const char* env = std::getenv("DISTINCT_THREADS"); env && *env) {
      try {
        n = std::max(0, std::stoi(env));
      } catch (...) {
        n = 0;
      }
    }
  }
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<unsigned>(n);
}

/// Calls body(i) for i in [0, count). Work is split into contiguous chunks,
/// one per worker. body must only write to slots owned by index i; the
/// first exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace distinct
