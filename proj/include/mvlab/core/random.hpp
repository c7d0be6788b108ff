#pragma once

#include <cstdint>
#include <random>

#include "mvlab/core/view_stack.hpp"

namespace mvlab {

// Seed derivation so that per-sample streams do not depend on worker count.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Unit-normal noise with the given shape.
ViewStack gaussian_like(int views, int channels, int height, int width, Rng& rng);
ViewStack gaussian_like(const ViewStack& shape, Rng& rng);

}  // namespace mvlab
