#ifndef OUTBACK_TEST_UTIL_HPP
#define OUTBACK_TEST_UTIL_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace testutil {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::string u64_key(uint64_t v) {
  std::string k(8, '\0');
  std::memcpy(k.data(), &v, 8);
  return k;
}

// n distinct 8-byte keys; splitmix64 is a bijection, so distinctness is
// guaranteed rather than probabilistic.
inline std::vector<std::string> make_keys(size_t n, uint64_t stream = 1) {
  std::vector<std::string> keys;
  keys.reserve(n);
  for (size_t i = 0; i < n; ++i) keys.push_back(u64_key(splitmix64(stream * 0x10000000000ULL + i)));
  return keys;
}

}  // namespace testutil

#endif
