#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rbn {

// splitmix64; used to fan a master seed out into independent named streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-stream derived from a master seed, a component name, and an index.
// Components (training, sampling, calibration, simulation, ...) draw from
// disjoint streams so they are independently reproducible.
inline std::mt19937_64 substream(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
  return std::mt19937_64(splitmix64(master ^ hash_str(name) ^ splitmix64(index)));
}

}  // namespace rbn
