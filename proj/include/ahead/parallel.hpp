/* Copyright 2026 The aheadeval Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ahead/errors.hpp"

namespace ahead {

inline constexpr const char* kThreadsEnvVar = "AMAP_EVAL_THREADS";

// Worker count: the explicit request (0 = machine concurrency), capped by
// AMAP_EVAL_THREADS when set.
inline unsigned resolve_thread_count(unsigned requested = 0) {
  unsigned n = requested > 0 ? requested
                             : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv(kThreadsEnvVar); env && *env) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (*end != '\0' || value <= 0) {
      throw InvalidArgument(std::string(kThreadsEnvVar) +
                            " must be a positive integer, got '" + env + "'");
    }
    n = std::min<unsigned long>(n, static_cast<unsigned long>(value));
  }
  return n;
}

// Calls fn(i) for i in [0, count). Work is handed out dynamically; callers
// write results into per-index slots so the outcome is independent of
// scheduling. The first exception thrown by any call is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ahead
