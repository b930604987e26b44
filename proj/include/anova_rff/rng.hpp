#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anova_rff {

// Named, independent random streams derived from one master seed.
// A stream is fully determined by (master, name, key), so feature draws,
// data draws and noise draws never share state, and a top-up of features
// for one term does not shift anything else.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

using Engine = std::mt19937_64;

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t key) {
  return detail::splitmix64(detail::splitmix64(master) ^ detail::splitmix64(key + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t mix_seed(std::uint64_t master, std::string_view name,
                              std::uint64_t key = 0) {
  return mix_seed(mix_seed(master, detail::fnv1a(name)), key);
}

inline Engine make_stream(std::uint64_t master, std::string_view name,
                          std::uint64_t key = 0) {
  return Engine(mix_seed(master, name, key));
}

}  // namespace anova_rff
