#include "gscenes/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gscenes {

namespace {

int default_threads() {
  if (const char *env = std::getenv("GSCENES_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0)
      return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int> g_threads{0};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

void set_num_threads(int n) { g_threads = n > 0 ? n : 0; }

int num_threads() {
  int n = g_threads.load();
  if (n <= 0) {
    n = default_threads();
    g_threads = n;
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, int)> &body) {
  if (n == 0)
    return;
  const int workers = static_cast<int>(std::min<std::size_t>(num_threads(), n));
  if (workers <= 1) {
    body(0, n, 0);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b < e)
      pool.emplace_back(body, b, e, w);
  }
  body(0, std::min(n, chunk), 0);
  for (auto &t : pool)
    t.join();
}

std::uint64_t split_seed(std::uint64_t root, std::string_view stream) {
  // FNV-1a over the stream name, then mixed with the root seed
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root) ^ h);
}

} // namespace gscenes
