#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "outback/hash.hpp"
#include "test_util.hpp"

using namespace outback;

// Reference digests computed with the canonical xxHash implementation
// (python xxhash 3.x). These pin the algorithm: serialized locators and
// golden protocol bytes all depend on it staying bit-identical.
TEST_CASE("digest matches pinned xxh64 reference vectors") {
  CHECK(digest("", 0) == 0xef46db3751d8e999ULL);
  CHECK(digest("a", 0) == 0xd24ec4f1a98c6e5bULL);
  CHECK(digest("abc", 0) == 0x44bc2cf5ad770999ULL);
  CHECK(digest("key-000042", 0x9E3779B97F4A7C15ULL) == 0x4b12381a33f75038ULL);
  CHECK(digest("0123456789abcdef0123456789abcdef0123", 12345) == 0xd9649408acdad24fULL);
  std::string long_input;
  for (int i = 1; i < 100; ++i) long_input.push_back(static_cast<char>(i));
  CHECK(digest(long_input, 0xDEADBEEFULL) == 0xd4b8b47ff036f1ULL);
}

TEST_CASE("digest is deterministic and seed-sensitive") {
  auto keys = testutil::make_keys(1000, 7);
  for (const auto& k : keys) {
    CHECK(digest(k, 42) == digest(k, 42));
  }

  // 10^6 (key, seed-pair) samples: digests under distinct seeds should
  // essentially never collide.
  size_t collisions = 0;
  for (size_t i = 0; i < 1'000'000; ++i) {
    std::string k = testutil::u64_key(testutil::splitmix64(i));
    uint64_t s1 = testutil::splitmix64(i * 2 + 1);
    uint64_t s2 = testutil::splitmix64(i * 2 + 2);
    if (s1 == s2) continue;
    if (digest(k, s1) == digest(k, s2)) ++collisions;
  }
  CHECK(collisions == 0);
}

TEST_CASE("digest mod 4 is uniform (chi-square, 99% bound)") {
  uint64_t counts[4] = {0, 0, 0, 0};
  const size_t n = 1'000'000;
  for (size_t i = 0; i < n; ++i) {
    counts[digest(testutil::u64_key(testutil::splitmix64(i ^ 0xABCDEF)), 99) & 3]++;
  }
  double expected = n / 4.0;
  double chi2 = 0;
  for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 11.345);  // chi-square critical value, df=3, p=0.01
}

TEST_CASE("slot_of stays in range and matches its definition") {
  auto keys = testutil::make_keys(500, 3);
  for (const auto& k : keys) {
    for (int s = 0; s < 256; s += 17) {
      uint32_t slot = slot_of(k, static_cast<uint8_t>(s));
      CHECK(slot < 4);
      CHECK(slot == (digest(k, widen_slot_seed(static_cast<uint8_t>(s))) & 3));
    }
  }
}

TEST_CASE("slot_of frozen regression vector") {
  // Computed once with the pinned hash and frozen; a change here means the
  // hash family or the widening rule drifted.
  CHECK(slot_of("key-000042", 17) == 0);
}

TEST_CASE("fingerprint is 6 bits, deterministic, with ~1/64 pair-match rate") {
  auto keys = testutil::make_keys(2000, 11);
  for (const auto& k : keys) {
    CHECK(fingerprint_of(k).value < 64);
    CHECK(fingerprint_of(k).value == fingerprint_of(k).value);
  }

  // Monte-Carlo: match rate of random distinct key pairs within 3 sigma of
  // 1/64 (N = 1e5, sigma = sqrt(p(1-p)/N)).
  const size_t pairs = 100'000;
  size_t matches = 0;
  for (size_t i = 0; i < pairs; ++i) {
    auto a = testutil::u64_key(testutil::splitmix64(i * 2));
    auto b = testutil::u64_key(testutil::splitmix64(i * 2 + 1));
    if (a == b) continue;
    if (fingerprint_of(a).value == fingerprint_of(b).value) ++matches;
  }
  double p = 1.0 / 64.0;
  double sigma = std::sqrt(p * (1 - p) / pairs);
  double rate = static_cast<double>(matches) / pairs;
  CHECK(rate > p - 3 * sigma);
  CHECK(rate < p + 3 * sigma);
}

TEST_CASE("digest probe counter counts calls") {
  probe::digest_calls = 0;
  digest("abc", 1);
  digest("def", 2);
  CHECK(probe::digest_calls == 2);
}
