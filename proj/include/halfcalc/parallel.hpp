#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace halfcalc {

// Worker count from HALFCALC_THREADS; 1 when unset or malformed.
inline std::size_t thread_count() {
  const char* env = std::getenv("HALFCALC_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) return 1;
  return std::size_t(std::min(v, 64L));
}

// Runs fn(i) for i in [0, count). Each index must write only its own output
// slot, which keeps results independent of scheduling. The exception from the
// lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t count, F&& fn, std::size_t threads = thread_count()) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t begin) {
    for (std::size_t i = begin; i < count; i += threads) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace halfcalc
