#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace covaca {

/// Threads requested through the COVACA_THREADS environment variable, or 1.
int threads_from_env();

/// Splits [0, count) into contiguous chunks and calls body(begin, end) on up to
/// `threads` threads. The first exception thrown by any chunk is rethrown.
inline void parallel_for(long long count, int threads,
                         const std::function<void(long long, long long)>& body) {
  if (count <= 0) return;
  const long long workers = std::max(1LL, std::min<long long>(threads, count));
  if (workers == 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  const long long chunk = (count + workers - 1) / workers;
  for (long long w = 0; w < workers; ++w) {
    const long long b = w * chunk, e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, w, b, e] {
      try {
        body(b, e);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace covaca
