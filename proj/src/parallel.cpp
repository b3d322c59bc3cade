#include "hyperme/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <vector>

namespace hyperme {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t env_workers() {
  const char* env = std::getenv("HYPERME_THREADS");
  if (env == nullptr) return 0;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
  if (ec != std::errc{}) return 0;
  return value;
}

}  // namespace

std::size_t worker_count() {
  std::size_t w = g_override.load(std::memory_order_relaxed);
  if (w == 0) w = env_workers();
  if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
  return w;
}

void set_worker_count(std::size_t workers) { g_override.store(workers, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        for (std::size_t i = begin; i < end; ++i) {
          try {
            body(i);
          } catch (...) {
            errors[w] = std::current_exception();
            return;
          }
        }
      });
    }
  }
  // Chunks are ordered, so the first failing chunk holds the lowest index.
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w]) std::rethrow_exception(errors[w]);
  }
}

}  // namespace hyperme
