#ifndef OUTBACK_OTHELLO_HPP
#define OUTBACK_OTHELLO_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "outback/errors.hpp"
#include "outback/hash.hpp"

// 1-bit bucket locator. For each key of the construction set the locator
// answers which of the key's two candidate buckets holds it, by XORing one
// bit from each of two arrays:
//
//     query(k) = A[digest(k, seed_a) mod m_a] xor B[digest(k, seed_b) mod m_b]
//
// Construction treats every array position as a vertex of a bipartite graph
// and every key as an edge between its A-position and B-position. If the
// graph is acyclic, bits can be assigned by walking each tree so that every
// edge's XOR equals the key's assigned bit; on a cycle the arrays are
// reseeded and construction retried. Positions touched by no key stay 0.
//
// The locator is immutable once built. Inserts never modify it; it is
// replaced wholesale (with a version bump) when a table is rebuilt.

namespace outback {

struct KeyBit {
  std::string_view key;
  bool bit;
};

class Locator {
 public:
  Locator() = default;

  bool query(std::string_view key) const {
    uint64_t ha = digest(key, seed_a_) % ma_;
    uint64_t hb = digest(key, seed_b_) % mb_;
    return get_bit(bits_a_, ha) ^ get_bit(bits_b_, hb);
  }

  uint64_t bit_count_a() const { return ma_; }
  uint64_t bit_count_b() const { return mb_; }
  uint64_t total_bits() const { return ma_ + mb_; }
  uint64_t version() const { return version_; }
  uint64_t seed_a() const { return seed_a_; }
  uint64_t seed_b() const { return seed_b_; }

  // Layout: [ma u64][mb u64][seed_a u64][seed_b u64][version u64]
  //         [A: ceil(ma/8) bytes][B: ceil(mb/8) bytes], all little-endian.
  static constexpr size_t kHeaderBytes = 40;

  size_t serialized_size() const {
    return kHeaderBytes + (ma_ + 7) / 8 + (mb_ + 7) / 8;
  }

  void serialize_into(std::string& out) const {
    append_u64(out, ma_);
    append_u64(out, mb_);
    append_u64(out, seed_a_);
    append_u64(out, seed_b_);
    append_u64(out, version_);
    append_bits(out, bits_a_, ma_);
    append_bits(out, bits_b_, mb_);
  }

  std::string serialize() const {
    std::string out;
    out.reserve(serialized_size());
    serialize_into(out);
    return out;
  }

  // Parses one locator from the front of `bytes`. When `consumed` is null
  // the input must contain exactly one locator; otherwise trailing bytes
  // are left for the caller.
  static Locator deserialize(std::string_view bytes, size_t* consumed = nullptr) {
    if (bytes.size() < kHeaderBytes) throw MalformedBytes("locator header truncated");
    Locator loc;
    loc.ma_ = read_u64(bytes.data());
    loc.mb_ = read_u64(bytes.data() + 8);
    loc.seed_a_ = read_u64(bytes.data() + 16);
    loc.seed_b_ = read_u64(bytes.data() + 24);
    loc.version_ = read_u64(bytes.data() + 32);
    if (loc.ma_ == 0 || loc.mb_ == 0) throw MalformedBytes("locator with empty array");
    size_t ca = (loc.ma_ + 7) / 8;
    size_t cb = (loc.mb_ + 7) / 8;
    size_t total = kHeaderBytes + ca + cb;
    if (bytes.size() < total) throw MalformedBytes("locator bit arrays truncated");
    if (consumed == nullptr && bytes.size() != total) {
      throw MalformedBytes("trailing bytes after locator");
    }
    loc.bits_a_ = read_bits(bytes.data() + kHeaderBytes, loc.ma_);
    loc.bits_b_ = read_bits(bytes.data() + kHeaderBytes + ca, loc.mb_);
    if (consumed) *consumed = total;
    return loc;
  }

  static Locator build(const std::vector<KeyBit>& assignments, uint64_t version = 0);

 private:
  static void append_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
  }

  static uint64_t read_u64(const char* p) {
    uint64_t v;
    std::memcpy(&v, p, 8);
    return v;
  }

  static void append_bits(std::string& out, const std::vector<uint64_t>& words, uint64_t nbits) {
    size_t nbytes = (nbits + 7) / 8;
    size_t off = out.size();
    out.resize(off + nbytes);
    std::memcpy(out.data() + off, words.data(), nbytes);
  }

  static std::vector<uint64_t> read_bits(const char* p, uint64_t nbits) {
    std::vector<uint64_t> words((nbits + 63) / 64, 0);
    std::memcpy(words.data(), p, (nbits + 7) / 8);
    return words;
  }

  static bool get_bit(const std::vector<uint64_t>& words, uint64_t i) {
    return (words[i >> 6] >> (i & 63)) & 1;
  }

  static void set_bit(std::vector<uint64_t>& words, uint64_t i) {
    words[i >> 6] |= uint64_t{1} << (i & 63);
  }

  uint64_t ma_ = 0, mb_ = 0;
  uint64_t seed_a_ = 0, seed_b_ = 0;
  uint64_t version_ = 0;
  std::vector<uint64_t> bits_a_, bits_b_;

  friend class LocatorBuilder;
};

namespace detail {

// Seeds for construction attempt k. Attempt 0 uses the fixed constants from
// the seed table; later attempts derive fresh seeds deterministically.
inline std::pair<uint64_t, uint64_t> locator_seeds(uint32_t attempt) {
  if (attempt == 0) return {kLocatorSeedA, kLocatorSeedB};
  uint64_t a = xxh64(&attempt, sizeof(attempt), kLocatorSeedA);
  uint64_t b = xxh64(&attempt, sizeof(attempt), kLocatorSeedB);
  return {a, b};
}

inline uint64_t round_up_multiple(uint64_t v, uint64_t m) {
  return (v + m - 1) / m * m;
}

}  // namespace detail

inline Locator Locator::build(const std::vector<KeyBit>& assignments, uint64_t version) {
  constexpr uint32_t kRetryCap = 32;
  const uint64_t n = assignments.size();

  // m_a ~ 1.33n, m_b ~ n, both word-aligned with a floor for tiny sets.
  // This keeps the acyclic-graph regime and the 2.33 bits/key budget.
  const uint64_t ma = std::max<uint64_t>(64, detail::round_up_multiple(n * 4 / 3 + 1, 64));
  const uint64_t mb = std::max<uint64_t>(64, detail::round_up_multiple(n, 64));
  const uint64_t nvert = ma + mb;

  std::vector<uint32_t> ea(n), eb(n);    // edge endpoints (vertex ids)
  std::vector<uint16_t> deg;
  std::vector<uint32_t> exor;            // xor of incident edge ids per vertex
  std::vector<uint32_t> peel_order;      // edge ids in removal order
  std::vector<uint32_t> peel_vertex;     // the degree-1 vertex each edge was peeled at

  for (uint32_t attempt = 0;; ++attempt) {
    if (attempt >= kRetryCap) {
      throw ConstructionFailed("locator graph stayed cyclic after reseeding cap");
    }
    auto [sa, sb] = detail::locator_seeds(attempt);

    deg.assign(nvert, 0);
    exor.assign(nvert, 0);
    for (uint64_t i = 0; i < n; ++i) {
      uint64_t ha = digest(assignments[i].key, sa) % ma;
      uint64_t hb = digest(assignments[i].key, sb) % mb;
      ea[i] = static_cast<uint32_t>(ha);
      eb[i] = static_cast<uint32_t>(ma + hb);
      deg[ea[i]]++;
      deg[eb[i]]++;
      exor[ea[i]] ^= static_cast<uint32_t>(i);
      exor[eb[i]] ^= static_cast<uint32_t>(i);
    }

    // Peel degree-1 vertices. All edges removed <=> acyclic.
    peel_order.clear();
    peel_vertex.clear();
    peel_order.reserve(n);
    peel_vertex.reserve(n);
    std::vector<uint32_t> stack;
    for (uint64_t v = 0; v < nvert; ++v) {
      if (deg[v] == 1) stack.push_back(static_cast<uint32_t>(v));
    }
    while (!stack.empty()) {
      uint32_t v = stack.back();
      stack.pop_back();
      if (deg[v] != 1) continue;
      uint32_t e = exor[v];
      uint32_t u = (ea[e] == v) ? eb[e] : ea[e];
      deg[v] = 0;
      exor[v] = 0;
      deg[u]--;
      exor[u] ^= e;
      peel_order.push_back(e);
      peel_vertex.push_back(v);
      if (deg[u] == 1) stack.push_back(u);
    }

    if (peel_order.size() != n) continue;  // cycle somewhere; reseed

    Locator loc;
    loc.ma_ = ma;
    loc.mb_ = mb;
    loc.seed_a_ = sa;
    loc.seed_b_ = sb;
    loc.version_ = version;
    loc.bits_a_.assign((ma + 63) / 64, 0);
    loc.bits_b_.assign((mb + 63) / 64, 0);

    // Assign bits in reverse peel order: when edge e is processed, its peel
    // vertex is free and the other endpoint already has its final value.
    auto vertex_bit = [&](uint64_t v) {
      return v < ma ? get_bit(loc.bits_a_, v) : get_bit(loc.bits_b_, v - ma);
    };
    auto set_vertex_bit = [&](uint64_t v) {
      if (v < ma) set_bit(loc.bits_a_, v);
      else set_bit(loc.bits_b_, v - ma);
    };
    for (size_t i = peel_order.size(); i-- > 0;) {
      uint32_t e = peel_order[i];
      uint32_t v = peel_vertex[i];
      uint32_t u = (ea[e] == v) ? eb[e] : ea[e];
      bool want = assignments[e].bit;
      if ((vertex_bit(u) != vertex_bit(v)) != want) set_vertex_bit(v);
    }
    return loc;
  }
}

}  // namespace outback

#endif  // OUTBACK_OTHELLO_HPP
