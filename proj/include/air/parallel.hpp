#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace air {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> threads{1};
  return threads;
}
}  // namespace detail

inline void set_num_threads(unsigned n) { detail::thread_setting() = std::max(1u, n); }
inline unsigned num_threads() { return detail::thread_setting(); }

/// Runs fn(begin, end) over a static partition of [0, count).
///
/// Chunks are disjoint and fixed by (count, threads), and callers only write
/// to the slots of their own chunk, so results never depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = num_threads()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    if (count) fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  workers.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace air
