#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace star {

/// Deterministic RNG utilities. One root seed is split into named streams so
/// that every stochastic component (init, shuffling, k-means, generator)
/// draws from its own reproducible sequence. Distributions are implemented
/// here rather than taken from <random> because the standard leaves their
/// algorithms unspecified; mt19937_64 itself is fully specified.
namespace rng {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t fnv1a(std::string_view s,
                                     std::uint64_t h = 0xcbf29ce484222325ull) {
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of the stream `name` (optionally indexed) derived from `root`.
/// Useful where an API takes a raw seed instead of an engine.
inline std::uint64_t derive(std::uint64_t root, std::string_view name,
                            std::uint64_t index = 0) {
  std::uint64_t h = fnv1a(name);
  h = splitmix64(h ^ splitmix64(root));
  h = splitmix64(h ^ splitmix64(index + 1));
  return h;
}

/// Engine for the stream `name` (optionally indexed) derived from `root`.
inline Engine stream(std::uint64_t root, std::string_view name,
                     std::uint64_t index = 0) {
  return Engine(derive(root, name, index));
}

/// Uniform double in [0, 1).
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased. n must be > 0.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t x = eng();
  while (x >= limit) x = eng();
  return x % n;
}

/// Standard normal via Box-Muller (single value, partner discarded).
inline double normal(Engine& eng) {
  double u1 = 1.0 - uniform01(eng);  // (0, 1]
  double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Index permutation 0..n-1 shuffled in place.
inline std::vector<std::size_t> permutation(std::size_t n, Engine& eng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  shuffle(p, eng);
  return p;
}

/// Sample an index proportionally to the (nonnegative) weights.
inline std::size_t discrete(Engine& eng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = uniform01(eng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace rng
}  // namespace star
