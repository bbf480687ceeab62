#ifndef OUTBACK_HASH_HPP
#define OUTBACK_HASH_HPP

#include <cstdint>
#include <cstring>
#include <string_view>

// Seeded hash primitives shared by the compute-node and memory-node roles.
// Both sides must agree bit-for-bit on every derived index, so the hash
// family is pinned: XXH64 (xxHash, 64-bit variant), implemented here from
// the published algorithm. Do not change it; serialized locators, golden
// protocol bytes and cross-role lookups all depend on it.

namespace outback {

namespace probe {
// Counts digest invocations on the current thread. Used by structural tests
// that assert certain code paths (the memory-node Get path, Othello queries)
// perform a fixed number of hash computations.
inline thread_local uint64_t digest_calls = 0;
}  // namespace probe

namespace detail {

inline constexpr uint64_t kPrime64_1 = 0x9E3779B185EBCA87ULL;
inline constexpr uint64_t kPrime64_2 = 0xC2B2AE3D27D4EB4FULL;
inline constexpr uint64_t kPrime64_3 = 0x165667B19E3779F9ULL;
inline constexpr uint64_t kPrime64_4 = 0x85EBCA77C2B2AE63ULL;
inline constexpr uint64_t kPrime64_5 = 0x27D4EB2F165667C5ULL;

inline uint64_t rotl64(uint64_t x, int r) {
  return (x << r) | (x >> (64 - r));
}

inline uint64_t read64(const unsigned char* p) {
  uint64_t v;
  std::memcpy(&v, p, 8);
  return v;  // little-endian hosts only; pinned for this artifact
}

inline uint32_t read32(const unsigned char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

inline uint64_t xxh64_round(uint64_t acc, uint64_t input) {
  acc += input * kPrime64_2;
  acc = rotl64(acc, 31);
  acc *= kPrime64_1;
  return acc;
}

inline uint64_t xxh64_merge_round(uint64_t acc, uint64_t val) {
  acc ^= xxh64_round(0, val);
  acc = acc * kPrime64_1 + kPrime64_4;
  return acc;
}

inline uint64_t xxh64(const void* data, size_t len, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  const unsigned char* end = p + len;
  uint64_t h;

  if (len >= 32) {
    uint64_t v1 = seed + kPrime64_1 + kPrime64_2;
    uint64_t v2 = seed + kPrime64_2;
    uint64_t v3 = seed;
    uint64_t v4 = seed - kPrime64_1;
    const unsigned char* limit = end - 32;
    do {
      v1 = xxh64_round(v1, read64(p));
      v2 = xxh64_round(v2, read64(p + 8));
      v3 = xxh64_round(v3, read64(p + 16));
      v4 = xxh64_round(v4, read64(p + 24));
      p += 32;
    } while (p <= limit);
    h = rotl64(v1, 1) + rotl64(v2, 7) + rotl64(v3, 12) + rotl64(v4, 18);
    h = xxh64_merge_round(h, v1);
    h = xxh64_merge_round(h, v2);
    h = xxh64_merge_round(h, v3);
    h = xxh64_merge_round(h, v4);
  } else {
    h = seed + kPrime64_5;
  }

  h += static_cast<uint64_t>(len);

  while (p + 8 <= end) {
    h ^= xxh64_round(0, read64(p));
    h = rotl64(h, 27) * kPrime64_1 + kPrime64_4;
    p += 8;
  }
  if (p + 4 <= end) {
    h ^= static_cast<uint64_t>(read32(p)) * kPrime64_1;
    h = rotl64(h, 23) * kPrime64_2 + kPrime64_3;
    p += 4;
  }
  while (p < end) {
    h ^= (*p) * kPrime64_5;
    h = rotl64(h, 11) * kPrime64_1;
    ++p;
  }

  h ^= h >> 33;
  h *= kPrime64_2;
  h ^= h >> 29;
  h *= kPrime64_3;
  h ^= h >> 32;
  return h;
}

}  // namespace detail

// Fixed seed constants, one per derived hash. All roles use this table.
//
//   purpose                      constant
//   candidate bucket h0          kBucketSeed0
//   candidate bucket h1          kBucketSeed1
//   locator array A (initial)    kLocatorSeedA
//   locator array B (initial)    kLocatorSeedB
//   slot fingerprint             kFingerprintSeed
//   extendible directory         kDirectorySeed
//   slot seed widening base      kSlotSeedBase
//   consistent hashing ring      kRingSeed
//
// Locator seeds change on construction retries; the constants above are the
// attempt-0 values (see othello.hpp for the reseeding rule).
inline constexpr uint64_t kBucketSeed0     = 0xA0761D6478BD642FULL;
inline constexpr uint64_t kBucketSeed1     = 0xE7037ED1A0B428DBULL;
inline constexpr uint64_t kLocatorSeedA    = 0x8EBC6AF09C88C6E3ULL;
inline constexpr uint64_t kLocatorSeedB    = 0x589965CC75374CC3ULL;
inline constexpr uint64_t kFingerprintSeed = 0x1D8E4E27C47D124FULL;
inline constexpr uint64_t kDirectorySeed   = 0xEB44ACCAB455D165ULL;
inline constexpr uint64_t kSlotSeedBase    = 0x2D358DCCAA6C78A5ULL;
inline constexpr uint64_t kRingSeed        = 0x4B33A62ED433D4A3ULL;

struct HashSeed {
  uint64_t value = 0;
};

// 6-bit fingerprint stored in a slot entry; checked only on the write path.
struct Fingerprint {
  uint8_t value = 0;  // < 64
};

inline uint64_t digest(std::string_view key, uint64_t seed) {
  ++probe::digest_calls;
  return detail::xxh64(key.data(), key.size(), seed);
}

inline uint64_t digest(std::string_view key, HashSeed seed) {
  return digest(key, seed.value);
}

// Widens a per-bucket 8-bit seed into the 64-bit family.
inline constexpr uint64_t widen_slot_seed(uint8_t seed) {
  return kSlotSeedBase + seed;
}

// Slot index within a 4-slot bucket.
inline uint32_t slot_of(std::string_view key, uint8_t seed) {
  return static_cast<uint32_t>(digest(key, widen_slot_seed(seed)) & 3);
}

inline Fingerprint fingerprint_of(std::string_view key) {
  return Fingerprint{static_cast<uint8_t>(digest(key, kFingerprintSeed) & 63)};
}

}  // namespace outback

#endif  // OUTBACK_HASH_HPP
