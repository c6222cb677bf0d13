#pragma once

#include <cstdint>
#include <random>

namespace hotspot::rng {

// splitmix64 finalizer; used both to mix seeds and to derive substreams.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

inline constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix(mix(a, b), c);
}

using Stream = std::mt19937_64;

// Independent substream of a master seed. Identical (seed, id) pairs yield
// bitwise-identical streams on every platform std::mt19937_64 covers.
inline Stream make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return Stream(mix(seed, stream_id));
}

// Fresh distribution objects per call so draw sequences depend only on the
// engine state, never on distribution-internal caches.
inline double standard_normal(Stream& s) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(s);
}

inline double normal(Stream& s, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  return d(s);
}

inline double uniform(Stream& s, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(s);
}

inline int uniform_int(Stream& s, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(s);
}

}  // namespace hotspot::rng
