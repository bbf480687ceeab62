#include <catch2/catch_amalgamated.hpp>

#include "outback/kvlog.hpp"

using namespace outback;

TEST_CASE("slot entry packs and unpacks every field") {
  SlotEntry e = SlotEntry::make(true, 63, 511, SlotEntry::kMaxAddress);
  CHECK(e.cache_bit());
  CHECK(e.fingerprint() == 63);
  CHECK(e.length() == 511);
  CHECK(e.address() == SlotEntry::kMaxAddress);

  e = SlotEntry::make(false, 17, 32, 0x123456789ABCULL);
  CHECK_FALSE(e.cache_bit());
  CHECK(e.fingerprint() == 17);
  CHECK(e.length() == 32);
  CHECK(e.address() == 0x123456789ABCULL);

  CHECK(SlotEntry{}.empty());
  CHECK(SlotEntry{}.raw == 0);
}

TEST_CASE("clear_length preserves the cache bit") {
  SlotEntry e = SlotEntry::make(true, 5, 100, 4096);
  e.clear_length();
  CHECK(e.empty());
  CHECK(e.cache_bit());
  CHECK(e.fingerprint() == 5);
}

TEST_CASE("repoint changes address and length only") {
  SlotEntry e = SlotEntry::make(true, 9, 40, 1000);
  e.repoint(48, 2000);
  CHECK(e.cache_bit());
  CHECK(e.fingerprint() == 9);
  CHECK(e.length() == 48);
  CHECK(e.address() == 2000);
}

TEST_CASE("log append/read round trip") {
  KvLog log;
  uint64_t a1 = log.append("hello", "world");
  uint64_t a2 = log.append("k2", std::string(100, 'x'));
  CHECK(a1 == 0);
  CHECK(a2 == 16 + 5 + 5);

  BlockView b1 = log.read(a1, static_cast<uint16_t>(kv_block_size(5, 5)));
  CHECK(b1.key == "hello");
  CHECK(b1.value == "world");
  BlockView b2 = log.read(a2, static_cast<uint16_t>(kv_block_size(2, 100)));
  CHECK(b2.key == "k2");
  CHECK(b2.value == std::string(100, 'x'));
}

TEST_CASE("log read validates bounds and length") {
  KvLog log;
  uint64_t a = log.append("abc", "def");
  CHECK_THROWS_AS(log.read(a + 1000, 22), OutOfRange);
  CHECK_THROWS_AS(log.read(a, 23), OutOfRange);  // wrong block length
  CHECK_THROWS_AS(log.read(a, 15), OutOfRange);  // shorter than headers
}

TEST_CASE("blocks never straddle a chunk boundary") {
  KvLog log;
  std::string big(200, 'b');
  uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = log.append("key", big);
  BlockView b = log.read(last, static_cast<uint16_t>(kv_block_size(3, 200)));
  CHECK(b.key == "key");
  CHECK(last % KvLog::kChunkBytes + kv_block_size(3, 200) <= KvLog::kChunkBytes);
}

TEST_CASE("log read probe counts reads") {
  KvLog log;
  uint64_t a = log.append("k", "v");
  probe::log_reads = 0;
  log.read(a, 18);
  log.read(a, 18);
  CHECK(probe::log_reads == 2);
}
