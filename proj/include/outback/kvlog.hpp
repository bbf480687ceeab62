#ifndef OUTBACK_KVLOG_HPP
#define OUTBACK_KVLOG_HPP

#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

#include "outback/errors.hpp"

namespace outback {

namespace probe {
// Log block reads on the current thread; the zero-computation Get assertion
// counts these.
inline thread_local uint64_t log_reads = 0;
}  // namespace probe

// One 64-bit packed bucket slot:
//
//   bit 63      cache bit   - some key hashing here lives in the overflow cache
//   bits 62..57 fingerprint - 6-bit key fingerprint, write-path check only
//   bits 56..48 length      - byte length of the whole KV block; 0 = empty slot
//   bits 47..0  address     - offset of the KV block in the log
//
// A bucket is four such words (32 bytes).
struct SlotEntry {
  uint64_t raw = 0;

  static constexpr uint16_t kMaxBlockLen = 511;
  static constexpr uint64_t kMaxAddress = (uint64_t{1} << 48) - 1;

  static SlotEntry make(bool cache, uint8_t fingerprint, uint16_t length, uint64_t address) {
    SlotEntry e;
    e.raw = (uint64_t{cache} << 63) | (static_cast<uint64_t>(fingerprint & 63) << 57) |
            (static_cast<uint64_t>(length & 0x1FF) << 48) | (address & kMaxAddress);
    return e;
  }

  bool empty() const { return length() == 0; }
  bool cache_bit() const { return raw >> 63; }
  uint8_t fingerprint() const { return (raw >> 57) & 63; }
  uint16_t length() const { return (raw >> 48) & 0x1FF; }
  uint64_t address() const { return raw & kMaxAddress; }

  void set_cache_bit(bool v) {
    raw = (raw & ~(uint64_t{1} << 63)) | (uint64_t{v} << 63);
  }

  // Delete semantics: only the length is zeroed. The cache bit survives so
  // overflowed keys sharing this slot stay reachable.
  void clear_length() { raw &= ~(uint64_t{0x1FF} << 48); }

  void repoint(uint16_t length, uint64_t address) {
    raw = (raw & ~((uint64_t{0x1FF} << 48) | kMaxAddress)) |
          (static_cast<uint64_t>(length & 0x1FF) << 48) | (address & kMaxAddress);
  }

  bool operator==(const SlotEntry&) const = default;
};

// A KV block as stored in the log: [key_len: 8B][val_len: 8B][key][value].
struct BlockView {
  std::string_view key;
  std::string_view value;
};

inline constexpr uint64_t kv_block_size(size_t key_len, size_t val_len) {
  return 16 + key_len + val_len;
}

// Append-only data area addressed by 48-bit offsets. Storage is chunked so
// readers keep stable views while writers append; a block never spans a
// chunk boundary (the writer pads to the next chunk instead).
class KvLog {
 public:
  static constexpr size_t kChunkBytes = 1 << 20;

  KvLog() { chunks_.push_back(std::make_unique<char[]>(kChunkBytes)); }

  // Returns the block's address. The caller validates the 511-byte cap.
  uint64_t append(std::string_view key, std::string_view value) {
    const uint64_t block = kv_block_size(key.size(), value.size());
    std::lock_guard<std::mutex> g(mu_);
    uint64_t off_in_chunk = tail_ % kChunkBytes;
    if (off_in_chunk + block > kChunkBytes) {
      tail_ += kChunkBytes - off_in_chunk;  // pad to chunk boundary
      chunks_.push_back(std::make_unique<char[]>(kChunkBytes));
      off_in_chunk = 0;
    }
    char* p = chunks_[tail_ / kChunkBytes].get() + off_in_chunk;
    uint64_t klen = key.size(), vlen = value.size();
    std::memcpy(p, &klen, 8);
    std::memcpy(p + 8, &vlen, 8);
    std::memcpy(p + 16, key.data(), key.size());
    std::memcpy(p + 16 + key.size(), value.data(), value.size());
    uint64_t addr = tail_;
    tail_ += block;
    return addr;
  }

  BlockView read(uint64_t address, uint16_t length) const {
    ++probe::log_reads;
    if (length < 16) throw OutOfRange("kv block shorter than its headers");
    uint64_t off_in_chunk = address % kChunkBytes;
    if (off_in_chunk + length > kChunkBytes) throw OutOfRange("kv block crosses chunk");
    const char* base;
    {
      std::lock_guard<std::mutex> g(mu_);
      if (address + length > tail_) throw OutOfRange("kv block past log tail");
      base = chunks_[address / kChunkBytes].get();
    }
    const char* p = base + off_in_chunk;
    uint64_t klen, vlen;
    std::memcpy(&klen, p, 8);
    std::memcpy(&vlen, p + 8, 8);
    if (16 + klen + vlen != length) throw OutOfRange("kv block length mismatch");
    return BlockView{std::string_view(p + 16, klen), std::string_view(p + 16 + klen, vlen)};
  }

  uint64_t extent() const {
    std::lock_guard<std::mutex> g(mu_);
    return tail_;
  }

 private:
  mutable std::mutex mu_;
  uint64_t tail_ = 0;
  std::vector<std::unique_ptr<char[]>> chunks_;
};

}  // namespace outback

#endif  // OUTBACK_KVLOG_HPP
