#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace metaems {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t HashTag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based seed split: the derived stream depends only on the parent
// seed, the tag and the counters, so adding a new consumer never shifts
// the streams of existing ones.
inline std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view tag,
                                std::initializer_list<std::uint64_t> counters = {}) {
  std::uint64_t h = Mix64(parent ^ HashTag(tag));
  for (std::uint64_t c : counters) h = Mix64(h ^ Mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng MakeRng(std::uint64_t parent, std::string_view tag,
                   std::initializer_list<std::uint64_t> counters = {}) {
  return Rng(DeriveSeed(parent, tag, counters));
}

// Uniform double in [0, 1) built from raw 64-bit draws. Unlike
// std::uniform_real_distribution its output is identical across
// standard library implementations.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformIn(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

inline std::size_t UniformIndex(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(UniformUnit(rng) * static_cast<double>(n));
}

// Standard normal via Box-Muller, portable for the same reason as UniformUnit.
double StandardNormal(Rng& rng);

}  // namespace metaems
