#ifndef OUTBACK_LUDO_HPP
#define OUTBACK_LUDO_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outback/errors.hpp"
#include "outback/hash.hpp"
#include "outback/kvlog.hpp"
#include "outback/othello.hpp"

// DMPH construction and the compute-heavy half of the index. Keys are
// distributed over 4-slot buckets with two-choice placement; each bucket
// stores an 8-bit seed under which its residents hash to distinct slots;
// an Othello locator remembers each key's bucket choice. Lookup is then
// collision-free without storing keys.

namespace outback {

inline constexpr uint32_t kSlotsPerBucket = 4;

inline uint32_t candidate_bucket(std::string_view key, bool choice, uint32_t bucket_count) {
  return static_cast<uint32_t>(digest(key, choice ? kBucketSeed1 : kBucketSeed0) % bucket_count);
}

// Smallest 8-bit seed mapping the given keys (at most 4, distinct) to
// pairwise distinct slots. Empty when no seed in 0..255 separates them.
inline std::optional<uint8_t> find_seed(std::span<const std::string_view> keys) {
  if (keys.size() <= 1) return uint8_t{0};
  for (uint32_t s = 0; s < 256; ++s) {
    uint32_t mask = 0;
    for (const auto& k : keys) mask |= 1u << slot_of(k, static_cast<uint8_t>(s));
    if (static_cast<size_t>(std::popcount(mask)) == keys.size()) return static_cast<uint8_t>(s);
  }
  return std::nullopt;
}

struct BucketAssignment {
  uint32_t bucket_count = 0;
  std::vector<uint32_t> key_bucket;  // per input key: its assigned bucket
};

// Two-choice placement with cuckoo-style displacement at bucket granularity:
// when both candidate buckets of a key are full, a resident is evicted to its
// alternate bucket, random-walk style, within a bounded step budget.
inline BucketAssignment assign_buckets(std::span<const std::string_view> keys,
                                       uint32_t bucket_count) {
  constexpr uint32_t kStepCap = 2048;
  const size_t n = keys.size();
  if (bucket_count == 0 || uint64_t{bucket_count} * kSlotsPerBucket < n) {
    throw AssignmentFailed("bucket_count below ceil(n/4)");
  }

  constexpr uint32_t kNone = UINT32_MAX;
  std::vector<uint32_t> cand0(n), cand1(n);
  for (size_t i = 0; i < n; ++i) {
    cand0[i] = candidate_bucket(keys[i], false, bucket_count);
    cand1[i] = candidate_bucket(keys[i], true, bucket_count);
  }

  std::vector<uint32_t> residents(uint64_t{bucket_count} * kSlotsPerBucket, kNone);
  std::vector<uint8_t> count(bucket_count, 0);
  std::mt19937 rng(0x9E3779B9u);  // fixed seed: construction is deterministic

  auto place = [&](uint32_t key_idx, uint32_t bucket) {
    residents[uint64_t{bucket} * kSlotsPerBucket + count[bucket]] = key_idx;
    count[bucket]++;
  };

  for (size_t i = 0; i < n; ++i) {
    uint32_t cur_key = static_cast<uint32_t>(i);
    uint32_t cur_bucket = cand0[i];
    if (count[cand0[i]] < kSlotsPerBucket) {
      place(cur_key, cand0[i]);
      continue;
    }
    if (count[cand1[i]] < kSlotsPerBucket) {
      place(cur_key, cand1[i]);
      continue;
    }
    bool placed = false;
    for (uint32_t step = 0; step < kStepCap; ++step) {
      // Evict a random resident and take its cell; the victim walks to its
      // alternate bucket.
      uint32_t victim_cell = static_cast<uint32_t>(rng() & 3);
      uint64_t cell = uint64_t{cur_bucket} * kSlotsPerBucket + victim_cell;
      uint32_t victim = residents[cell];
      residents[cell] = cur_key;
      cur_key = victim;
      cur_bucket = (cand0[victim] == cur_bucket) ? cand1[victim] : cand0[victim];
      if (count[cur_bucket] < kSlotsPerBucket) {
        place(cur_key, cur_bucket);
        placed = true;
        break;
      }
    }
    if (!placed) throw AssignmentFailed("displacement step cap exceeded");
  }

  BucketAssignment out;
  out.bucket_count = bucket_count;
  out.key_bucket.assign(n, 0);
  for (uint32_t b = 0; b < bucket_count; ++b) {
    for (uint32_t s = 0; s < count[b]; ++s) {
      out.key_bucket[residents[uint64_t{b} * kSlotsPerBucket + s]] = b;
    }
  }
  return out;
}

struct ConstructEntry {
  std::string_view key;
  SlotEntry entry;
};

// One DMPH table split into its two halves plus construction fallout.
struct ConstructedTable {
  // compute half
  Locator locator;
  std::vector<uint8_t> seeds;
  uint32_t bucket_count = 0;
  // memory half
  std::vector<SlotEntry> slots;  // 4 * bucket_count
  // entries no 8-bit seed could place; the caller routes them to the
  // fallback table
  std::vector<size_t> fallback;
};

inline uint32_t bucket_count_for(size_t n, double load_factor) {
  if (n == 0) return 1;
  return static_cast<uint32_t>(
      (n + kSlotsPerBucket * load_factor - 1e-9) / (kSlotsPerBucket * load_factor));
}

// Bulk construction: assign buckets, search per-bucket seeds, build the
// locator over each key's bucket-choice bit, then place slot entries at
// their seeded slots.
inline ConstructedTable construct_with_buckets(std::span<const ConstructEntry> entries,
                                               uint32_t bucket_count,
                                               uint64_t locator_version = 0) {
  const size_t n = entries.size();
  std::vector<std::string_view> keys(n);
  for (size_t i = 0; i < n; ++i) keys[i] = entries[i].key;

  BucketAssignment assignment = assign_buckets(keys, bucket_count);

  std::vector<uint32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    return assignment.key_bucket[a] < assignment.key_bucket[b];
  });

  ConstructedTable out;
  out.bucket_count = bucket_count;
  out.seeds.assign(bucket_count, 0);
  out.slots.assign(uint64_t{bucket_count} * kSlotsPerBucket, SlotEntry{});

  std::vector<bool> in_fallback(n, false);
  std::array<std::string_view, kSlotsPerBucket> bucket_keys;
  std::array<uint32_t, kSlotsPerBucket> bucket_members;

  size_t i = 0;
  while (i < n) {
    uint32_t b = assignment.key_bucket[order[i]];
    size_t m = 0;
    while (i < n && assignment.key_bucket[order[i]] == b) {
      bucket_keys[m] = entries[order[i]].key;
      bucket_members[m] = order[i];
      ++m;
      ++i;
    }
    // NoSeed is vanishingly rare; shed members one at a time until the rest
    // can be perfectly hashed.
    size_t live = m;
    std::optional<uint8_t> seed;
    while (!(seed = find_seed(std::span(bucket_keys.data(), live)))) {
      --live;
      in_fallback[bucket_members[live]] = true;
      out.fallback.push_back(bucket_members[live]);
    }
    out.seeds[b] = *seed;
    for (size_t j = 0; j < live; ++j) {
      uint32_t slot = slot_of(bucket_keys[j], *seed);
      out.slots[uint64_t{b} * kSlotsPerBucket + slot] = entries[bucket_members[j]].entry;
    }
  }

  std::vector<KeyBit> bits;
  bits.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    if (in_fallback[k]) continue;
    bool choice = assignment.key_bucket[k] == candidate_bucket(keys[k], true, bucket_count) &&
                  assignment.key_bucket[k] != candidate_bucket(keys[k], false, bucket_count);
    bits.push_back(KeyBit{keys[k], choice});
  }
  out.locator = Locator::build(bits, locator_version);
  return out;
}

inline ConstructedTable construct(std::span<const ConstructEntry> entries, double load_factor,
                                  uint64_t locator_version = 0) {
  return construct_with_buckets(entries, bucket_count_for(entries.size(), load_factor),
                                locator_version);
}

// Per-table seed cache on the compute side. Cells are replaced atomically
// when a memory node returns a fresher seed; the locator is immutable.
struct SeedCache {
  explicit SeedCache(std::span<const uint8_t> seeds)
      : cells(new std::atomic<uint8_t>[seeds.size()]), size(seeds.size()) {
    for (size_t i = 0; i < seeds.size(); ++i) {
      cells[i].store(seeds[i], std::memory_order_relaxed);
    }
  }
  std::unique_ptr<std::atomic<uint8_t>[]> cells;
  size_t size;
  std::atomic<uint64_t> version{0};

  uint8_t get(uint32_t bucket) const { return cells[bucket].load(std::memory_order_acquire); }
  void put(uint32_t bucket, uint8_t seed) {
    cells[bucket].store(seed, std::memory_order_release);
    version.fetch_add(1, std::memory_order_acq_rel);
  }
};

// Compute half of one table as held by a client.
struct ComputeTable {
  uint32_t table_id = 0;
  uint32_t bucket_count = 0;
  std::shared_ptr<const Locator> locator;
  std::shared_ptr<SeedCache> seeds;
};

struct Location {
  uint32_t table_id;
  uint32_t bucket;
  uint32_t slot;
};

// Extendible directory of compute halves. The table for a key is chosen by
// the top global-depth bits of a fixed directory hash.
struct CompactIndex {
  uint32_t global_depth = 0;
  std::vector<std::shared_ptr<const ComputeTable>> directory;  // 2^global_depth entries

  static uint64_t dir_index(std::string_view key, uint32_t global_depth) {
    if (global_depth == 0) return 0;
    return digest(key, kDirectorySeed) >> (64 - global_depth);
  }

  const ComputeTable& table_for(std::string_view key) const {
    return *directory[dir_index(key, global_depth)];
  }

  const ComputeTable* table_by_id(uint32_t id) const {
    for (const auto& t : directory) {
      if (t && t->table_id == id) return t.get();
    }
    return nullptr;
  }

  Location locate(std::string_view key) const {
    const ComputeTable& t = table_for(key);
    bool choice = t.locator->query(key);
    uint32_t bucket = candidate_bucket(key, choice, t.bucket_count);
    uint32_t slot = slot_of(key, t.seeds->get(bucket));
    return Location{t.table_id, bucket, slot};
  }

  // Bits held in locators and seed arrays; the budget checks compare this
  // against the (2.33 + 2/load)n formula.
  uint64_t compute_half_bits() const {
    uint64_t bits = 0;
    std::vector<const ComputeTable*> seen;
    for (const auto& t : directory) {
      bool dup = false;
      for (auto* s : seen) dup |= (s == t.get());
      if (dup) continue;
      seen.push_back(t.get());
      bits += t->locator->total_bits() + uint64_t{t->bucket_count} * 8;
    }
    return bits;
  }
};

}  // namespace outback

#endif  // OUTBACK_LUDO_HPP
