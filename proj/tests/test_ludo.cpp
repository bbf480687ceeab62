#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <vector>

#include "outback/ludo.hpp"
#include "test_util.hpp"

using namespace outback;

namespace {

std::vector<std::string_view> views(const std::vector<std::string>& keys) {
  return {keys.begin(), keys.end()};
}

std::vector<ConstructEntry> entries_for(const std::vector<std::string>& keys) {
  std::vector<ConstructEntry> out;
  out.reserve(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) {
    out.push_back({keys[i], SlotEntry::make(false, fingerprint_of(keys[i]).value, 32, i * 32)});
  }
  return out;
}

}  // namespace

TEST_CASE("four keys into one bucket") {
  auto keys = testutil::make_keys(4, 31);
  auto a = assign_buckets(views(keys), 1);
  for (auto b : a.key_bucket) CHECK(b == 0);
}

TEST_CASE("five keys cannot fit one bucket") {
  auto keys = testutil::make_keys(5, 32);
  CHECK_THROWS_AS(assign_buckets(views(keys), 1), AssignmentFailed);
}

TEST_CASE("assignment at load 0.95 fills without overflow") {
  const size_t n = 100'000;
  auto keys = testutil::make_keys(n, 33);
  uint32_t bc = bucket_count_for(n, 0.95);
  auto a = assign_buckets(views(keys), bc);

  // occupancy histogram oracle
  std::vector<uint32_t> occupancy(bc, 0);
  for (size_t i = 0; i < n; ++i) {
    uint32_t b = a.key_bucket[i];
    REQUIRE(b < bc);
    // every key sits in one of its two candidates
    bool legal = b == candidate_bucket(keys[i], false, bc) ||
                 b == candidate_bucket(keys[i], true, bc);
    REQUIRE(legal);
    occupancy[b]++;
  }
  uint32_t maxocc = 0;
  uint64_t total = 0;
  for (auto c : occupancy) {
    maxocc = std::max(maxocc, c);
    total += c;
  }
  CHECK(maxocc <= 4);
  CHECK(total == n);
}

TEST_CASE("find_seed basics") {
  CHECK(find_seed({}) == uint8_t{0});

  auto one = testutil::make_keys(1, 34);
  std::vector<std::string_view> v{one[0]};
  CHECK(find_seed(v) == uint8_t{0});
}

TEST_CASE("find_seed returns the smallest qualifying seed (exhaustive oracle)") {
  for (uint64_t trial = 0; trial < 1000; ++trial) {
    auto keys = testutil::make_keys(4, 100 + trial);
    std::vector<std::string_view> v = views(keys);
    auto seed = find_seed(v);
    REQUIRE(seed.has_value());

    auto separates = [&](uint8_t s) {
      std::set<uint32_t> slots;
      for (auto& k : v) slots.insert(slot_of(k, s));
      return slots.size() == v.size();
    };
    CHECK(separates(*seed));
    for (uint32_t s = 0; s < *seed; ++s) CHECK_FALSE(separates(static_cast<uint8_t>(s)));
  }
}

TEST_CASE("find_seed reports NoSeed for an inseparable set") {
  // Duplicate keys always land in the same slot; no seed can separate them.
  auto keys = testutil::make_keys(1, 35);
  std::vector<std::string_view> v{keys[0], keys[0], keys[0], keys[0]};
  CHECK_FALSE(find_seed(v).has_value());
}

TEST_CASE("construct places every key at a distinct seeded slot") {
  const size_t n = 100'000;
  auto keys = testutil::make_keys(n, 36);
  auto entries = entries_for(keys);
  ConstructedTable t = construct(entries, 0.95);
  CHECK(t.fallback.empty());

  // minimality: slot count within a bucket of the formula and load factor
  CHECK(t.bucket_count == bucket_count_for(n, 0.95));
  double load = static_cast<double>(n) / (4.0 * t.bucket_count);
  CHECK(load >= 0.94);

  // full-sweep collision oracle via locate
  ComputeTable ct;
  ct.table_id = 0;
  ct.bucket_count = t.bucket_count;
  ct.locator = std::make_shared<Locator>(t.locator);
  ct.seeds = std::make_shared<SeedCache>(std::span(t.seeds));
  CompactIndex index;
  index.global_depth = 0;
  index.directory = {std::make_shared<const ComputeTable>(std::move(ct))};

  std::set<uint64_t> seen;
  for (size_t i = 0; i < n; ++i) {
    Location loc = index.locate(keys[i]);
    REQUIRE(seen.insert(uint64_t{loc.bucket} * 4 + loc.slot).second);
    CHECK(t.slots[uint64_t{loc.bucket} * 4 + loc.slot] == entries[i].entry);
  }
}

TEST_CASE("construct of nothing yields an empty table") {
  ConstructedTable t = construct({}, 0.95);
  CHECK(t.bucket_count == 1);
  for (const auto& s : t.slots) CHECK(s.empty());
}

TEST_CASE("construct sheds unseedable keys to the fallback list") {
  // Degenerate duplicated keys force the NoSeed path deliberately.
  auto keys = testutil::make_keys(1, 37);
  std::vector<ConstructEntry> entries;
  for (int i = 0; i < 3; ++i) {
    entries.push_back({keys[0], SlotEntry::make(false, 1, 32, i)});
  }
  ConstructedTable t = construct_with_buckets(entries, 1);
  CHECK(t.fallback.size() == 2);
}

TEST_CASE("locate is deterministic across repeated calls") {
  auto keys = testutil::make_keys(500, 38);
  auto entries = entries_for(keys);
  ConstructedTable t = construct(entries, 0.95);

  ComputeTable ct;
  ct.table_id = 7;
  ct.bucket_count = t.bucket_count;
  ct.locator = std::make_shared<Locator>(t.locator);
  ct.seeds = std::make_shared<SeedCache>(std::span(t.seeds));
  CompactIndex index;
  index.global_depth = 0;
  index.directory = {std::make_shared<const ComputeTable>(std::move(ct))};

  Location first = index.locate(keys[0]);
  for (int i = 0; i < 100; ++i) {
    Location again = index.locate(keys[0]);
    CHECK(again.table_id == first.table_id);
    CHECK(again.bucket == first.bucket);
    CHECK(again.slot == first.slot);
  }
  CHECK(first.table_id == 7);
}

TEST_CASE("locate costs five digests: directory, locator pair, bucket, slot") {
  auto keys = testutil::make_keys(64, 39);
  auto entries = entries_for(keys);
  ConstructedTable t = construct(entries, 0.95);

  ComputeTable ct;
  ct.table_id = 0;
  ct.bucket_count = t.bucket_count;
  ct.locator = std::make_shared<Locator>(t.locator);
  ct.seeds = std::make_shared<SeedCache>(std::span(t.seeds));
  CompactIndex index;
  index.global_depth = 1;
  auto shared = std::make_shared<const ComputeTable>(std::move(ct));
  index.directory = {shared, shared};

  probe::digest_calls = 0;
  index.locate(keys[0]);
  CHECK(probe::digest_calls == 5);
}

TEST_CASE("fig-6 narrative: key 5 resolves to bucket 10 slot 0 under injected state") {
  const std::string key = "5";

  // Inject locator and seed state that steer the lookup, rather than relying
  // on hashing coincidence: pick a bucket count where one candidate of "5"
  // is bucket 10, force the locator bit to that candidate, and pick a seed
  // under which "5" hashes to slot 0.
  uint32_t bucket_count = 0;
  bool choice = false;
  for (uint32_t bc = 11; bc < 4096 && bucket_count == 0; ++bc) {
    if (candidate_bucket(key, false, bc) == 10) {
      bucket_count = bc;
      choice = false;
    } else if (candidate_bucket(key, true, bc) == 10) {
      bucket_count = bc;
      choice = true;
    }
  }
  REQUIRE(bucket_count != 0);

  uint8_t seed = 0;
  bool found_seed = false;
  for (uint32_t s = 0; s < 256; ++s) {
    if (slot_of(key, static_cast<uint8_t>(s)) == 0) {
      seed = static_cast<uint8_t>(s);
      found_seed = true;
      break;
    }
  }
  REQUIRE(found_seed);

  Locator loc = Locator::build({KeyBit{key, choice}});
  std::vector<uint8_t> seeds(bucket_count, 0);
  seeds[10] = seed;

  ComputeTable ct;
  ct.table_id = 0;
  ct.bucket_count = bucket_count;
  ct.locator = std::make_shared<Locator>(std::move(loc));
  ct.seeds = std::make_shared<SeedCache>(std::span(seeds));
  CompactIndex index;
  index.global_depth = 0;
  index.directory = {std::make_shared<const ComputeTable>(std::move(ct))};

  Location at = index.locate(key);
  CHECK(at.bucket == 10);
  CHECK(at.slot == 0);
}

TEST_CASE("compute half stays within the memory budget formula") {
  const size_t n = 100'000;
  const double eps = 0.95;
  auto keys = testutil::make_keys(n, 40);
  auto entries = entries_for(keys);
  ConstructedTable t = construct(entries, eps);

  ComputeTable ct;
  ct.table_id = 0;
  ct.bucket_count = t.bucket_count;
  ct.locator = std::make_shared<Locator>(t.locator);
  ct.seeds = std::make_shared<SeedCache>(std::span(t.seeds));
  CompactIndex index;
  index.global_depth = 0;
  index.directory = {std::make_shared<const ComputeTable>(std::move(ct))};

  double budget = (2.33 + 2.0 / eps) * n;
  CHECK(static_cast<double>(index.compute_half_bits()) <= 1.25 * budget);
}
