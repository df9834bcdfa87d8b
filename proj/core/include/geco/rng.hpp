#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace geco {

/// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under `tag`, derived from a root seed. Pure function.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag,
                                    std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(root) ^ tag) ^ index);
}

using Rng = std::mt19937_64;

inline void fill_standard_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : out) v = nd(rng);
}

inline std::vector<double> standard_normal(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> z(n);
  fill_standard_normal(rng, z);
  return z;
}

}  // namespace geco
