#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vvs {

using Rng = std::mt19937_64;

// Deterministically mixes a root seed with a sequence of tags (epoch, batch
// index, purpose, ...) into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  return Rng(derive_seed(seed, tags));
}

// Stream purposes. Keeping them distinct means enabling one consumer never
// shifts the random sequence seen by another.
namespace stream {
inline constexpr std::uint64_t kShuffle = 0x5348;
inline constexpr std::uint64_t kViews = 0x5649;
inline constexpr std::uint64_t kRelPos = 0x5250;
inline constexpr std::uint64_t kInit = 0x494e;
inline constexpr std::uint64_t kSplit = 0x5350;
inline constexpr std::uint64_t kCeiling = 0x4345;
inline constexpr std::uint64_t kProjection = 0x5052;
inline constexpr std::uint64_t kSynth = 0x5359;
}  // namespace stream

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

}  // namespace vvs
