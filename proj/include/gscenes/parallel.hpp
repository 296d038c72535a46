#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace gscenes {

// Worker-pool cap shared by every parallel loop; n <= 0 restores the default. Defaults to the
// GSCENES_THREADS environment variable, else hardware concurrency.
void set_num_threads(int n);
int num_threads();

// Runs body(begin, end, worker) over [0, n) split into contiguous chunks, one per worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, int)> &body);

// Named-stream seed splitting: every phase draws from its own generator
// derived from (root seed, stream name), so phases reproduce independently.
std::uint64_t split_seed(std::uint64_t root, std::string_view stream);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t root, std::string_view stream) { return Rng(split_seed(root, stream)); }

} // namespace gscenes
