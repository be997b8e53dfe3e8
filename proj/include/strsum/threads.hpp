// Copyright 2026 The StrSum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STRSUM_THREADS_HPP
#define STRSUM_THREADS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace strsum {

/// Worker cap: STRSUM_THREADS if set to a positive integer, else the
/// hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("STRSUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(k) for k in [0, count) on up to `workers` threads. Task k always
/// runs on worker k % workers, in increasing k. The first exception (by
/// task index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t w) {
    for (std::size_t k = w; k < count; k += workers) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace strsum

#endif  // STRSUM_THREADS_HPP
