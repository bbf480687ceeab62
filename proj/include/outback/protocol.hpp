#ifndef OUTBACK_PROTOCOL_HPP
#define OUTBACK_PROTOCOL_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "outback/errors.hpp"
#include "outback/othello.hpp"

// Wire formats. One framing covers both the request/response channel and the
// resize read/FAA channel; the latter two kinds are serviced by the transport
// straight from the registered image, never by request workers. All integers
// little-endian. Worked examples live in PROTOCOL.md; golden-file tests pin
// every layout.

namespace outback {

enum class MsgKind : uint8_t {
  kGet = 1,
  kMakeupGet = 2,
  kInsert = 3,
  kUpdate = 4,
  kDelete = 5,
  kResizeRead = 6,
  kResizeFaa = 7,
};

enum class Status : uint8_t {
  kSuccess = 0,
  kNotFound = 1,
  kFalseBuffered = 2,  // insert/delete buffered during resize; replayed at finalize
  kPreResize = 3,      // resize pending; for inserts: not applied, retry
  kKeyMismatch = 4,
  kTooLarge = 5,
};

// Request layout (22-byte header, then key bytes, then value bytes):
//
//   offset 0  kind        1B
//   offset 1  table_id    4B
//   offset 5  bucket      4B
//   offset 9  slot        1B signed; -1 flags a makeup Get
//   offset 10 key_len     2B
//   offset 12 val_len     2B
//   offset 14 request_id  8B
//
// Kind-dependent fields are zero when unused; a Get carries no key at all.
// RESIZE_READ / RESIZE_FAA reuse table_id|bucket as a 64-bit image offset
// (table_id = low word) and carry their 8-byte argument as the key: read
// length for RESIZE_READ, two's-complement delta for RESIZE_FAA.
struct RequestFrame {
  MsgKind kind = MsgKind::kGet;
  uint32_t table_id = 0;
  uint32_t bucket = 0;
  int8_t slot = 0;
  uint64_t request_id = 0;
  std::string key;
  std::string value;

  static constexpr size_t kHeaderBytes = 22;
  static constexpr size_t kMaxFrameBytes = 600;

  bool operator==(const RequestFrame&) const = default;

  uint64_t image_offset() const {
    return uint64_t{table_id} | (uint64_t{bucket} << 32);
  }
  void set_image_offset(uint64_t off) {
    table_id = static_cast<uint32_t>(off);
    bucket = static_cast<uint32_t>(off >> 32);
  }
  uint64_t image_arg() const {
    if (key.size() != 8) throw MalformedFrame("resize frame without 8-byte argument");
    uint64_t v;
    std::memcpy(&v, key.data(), 8);
    return v;
  }
};

// Response layout (11-byte header, then the optional payload):
//
//   offset 0  request_id       8B
//   offset 8  status           1B
//   offset 9  new_seed_present 1B
//   offset 10 new_seed         1B
//
// The payload is a verbatim KV block for Get-family responses, the read
// bytes for RESIZE_READ, or the 8-byte previous value for RESIZE_FAA.
struct ResponseFrame {
  uint64_t request_id = 0;
  Status status = Status::kSuccess;
  bool new_seed_present = false;
  uint8_t new_seed = 0;
  std::string payload;

  static constexpr size_t kHeaderBytes = 11;

  bool operator==(const ResponseFrame&) const = default;
};

namespace wire {

inline void put_u16(std::string& out, uint16_t v) {
  char b[2];
  std::memcpy(b, &v, 2);
  out.append(b, 2);
}
inline void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}
inline void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}
inline uint16_t get_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
inline uint32_t get_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline uint64_t get_u64(const char* p) {
  uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

inline void validate_request(const RequestFrame& f) {
  size_t total = RequestFrame::kHeaderBytes + f.key.size() + f.value.size();
  if (total > RequestFrame::kMaxFrameBytes) throw MalformedFrame("request exceeds 600 bytes");
  if (f.key.size() > UINT16_MAX || f.value.size() > UINT16_MAX) {
    throw MalformedFrame("key/value length field overflow");
  }
  switch (f.kind) {
    case MsgKind::kGet:
      if (!f.key.empty() || !f.value.empty()) throw MalformedFrame("get carries no key");
      if (f.slot < 0) throw MalformedFrame("get slot must be non-negative");
      break;
    case MsgKind::kMakeupGet:
      if (f.slot != -1) throw MalformedFrame("makeup get uses slot -1");
      if (f.key.empty() || !f.value.empty()) throw MalformedFrame("makeup get carries key only");
      break;
    case MsgKind::kInsert:
      if (f.slot != 0) throw MalformedFrame("insert leaves slot zero");
      if (f.key.empty()) throw MalformedFrame("insert needs the full key");
      break;
    case MsgKind::kUpdate:
      if (f.key.empty()) throw MalformedFrame("update needs the full key");
      if (f.slot < 0) throw MalformedFrame("update slot must be non-negative");
      break;
    case MsgKind::kDelete:
      if (f.key.empty() || !f.value.empty()) throw MalformedFrame("delete carries key only");
      if (f.slot < 0) throw MalformedFrame("delete slot must be non-negative");
      break;
    case MsgKind::kResizeRead:
    case MsgKind::kResizeFaa:
      if (f.key.size() != 8 || !f.value.empty()) {
        throw MalformedFrame("resize frames carry an 8-byte argument");
      }
      if (f.slot != 0) throw MalformedFrame("resize frames leave slot zero");
      break;
    default:
      throw MalformedFrame("unknown request kind");
  }
}

}  // namespace wire

inline std::string encode(const RequestFrame& f) {
  wire::validate_request(f);
  std::string out;
  out.reserve(RequestFrame::kHeaderBytes + f.key.size() + f.value.size());
  out.push_back(static_cast<char>(f.kind));
  wire::put_u32(out, f.table_id);
  wire::put_u32(out, f.bucket);
  out.push_back(static_cast<char>(f.slot));
  wire::put_u16(out, static_cast<uint16_t>(f.key.size()));
  wire::put_u16(out, static_cast<uint16_t>(f.value.size()));
  wire::put_u64(out, f.request_id);
  out.append(f.key);
  out.append(f.value);
  return out;
}

inline RequestFrame decode_request(std::string_view bytes) {
  if (bytes.size() < RequestFrame::kHeaderBytes) throw MalformedFrame("request header truncated");
  RequestFrame f;
  f.kind = static_cast<MsgKind>(bytes[0]);
  f.table_id = wire::get_u32(bytes.data() + 1);
  f.bucket = wire::get_u32(bytes.data() + 5);
  f.slot = static_cast<int8_t>(bytes[9]);
  uint16_t key_len = wire::get_u16(bytes.data() + 10);
  uint16_t val_len = wire::get_u16(bytes.data() + 12);
  f.request_id = wire::get_u64(bytes.data() + 14);
  if (bytes.size() != RequestFrame::kHeaderBytes + key_len + val_len) {
    throw MalformedFrame("request length mismatch");
  }
  f.key.assign(bytes.data() + RequestFrame::kHeaderBytes, key_len);
  f.value.assign(bytes.data() + RequestFrame::kHeaderBytes + key_len, val_len);
  wire::validate_request(f);
  return f;
}

inline std::string encode(const ResponseFrame& f) {
  if (!f.new_seed_present && f.new_seed != 0) {
    throw MalformedFrame("new_seed without new_seed_present");
  }
  std::string out;
  out.reserve(ResponseFrame::kHeaderBytes + f.payload.size());
  wire::put_u64(out, f.request_id);
  out.push_back(static_cast<char>(f.status));
  out.push_back(static_cast<char>(f.new_seed_present ? 1 : 0));
  out.push_back(static_cast<char>(f.new_seed));
  out.append(f.payload);
  return out;
}

inline ResponseFrame decode_response(std::string_view bytes) {
  if (bytes.size() < ResponseFrame::kHeaderBytes) throw MalformedFrame("response header truncated");
  ResponseFrame f;
  f.request_id = wire::get_u64(bytes.data());
  uint8_t status = static_cast<uint8_t>(bytes[8]);
  if (status > static_cast<uint8_t>(Status::kTooLarge)) throw MalformedFrame("unknown status");
  f.status = static_cast<Status>(status);
  uint8_t present = static_cast<uint8_t>(bytes[9]);
  if (present > 1) throw MalformedFrame("new_seed_present must be 0 or 1");
  f.new_seed_present = present == 1;
  f.new_seed = static_cast<uint8_t>(bytes[10]);
  if (!f.new_seed_present && f.new_seed != 0) {
    throw MalformedFrame("new_seed without new_seed_present");
  }
  f.payload.assign(bytes.data() + ResponseFrame::kHeaderBytes,
                   bytes.size() - ResponseFrame::kHeaderBytes);
  return f;
}

// ---------------------------------------------------------------------------
// Registered-memory image, read by clients over the resize channel.
//
//   offset 0   N_cNode u64 - 0 while the image is being written; set to the
//                            shard's compute-node count when complete;
//                            decremented once per client via FAA
//   offset 8   len     u64 - bytes from offset 24 through the end
//   offset 16  Global_d u64
//   --- payload covered by len, starting at offset 24 ---
//   offset 24  epoch       u64 - resize sequence number, guards double fetch
//   offset 32  table_count u64
//   per table: [table_id u64][prefix u64][local_depth u64][bucket_count u64]
//              [seeds: bucket_count bytes]
//   then per table, same order: serialized locator
//
// A table owns the directory entries whose top local_depth bits equal its
// prefix.
inline constexpr size_t kImageHeaderBytes = 24;

struct PublishedTable {
  uint64_t table_id = 0;
  uint64_t prefix = 0;
  uint64_t local_depth = 0;
  std::vector<uint8_t> seeds;
  Locator locator;
};

struct ResizeImage {
  uint64_t epoch = 0;
  uint64_t global_depth = 0;
  std::vector<PublishedTable> tables;
};

inline std::string encode_image_payload(const ResizeImage& img) {
  std::string out;
  wire::put_u64(out, img.epoch);
  wire::put_u64(out, img.tables.size());
  for (const auto& t : img.tables) {
    wire::put_u64(out, t.table_id);
    wire::put_u64(out, t.prefix);
    wire::put_u64(out, t.local_depth);
    wire::put_u64(out, t.seeds.size());
    out.append(reinterpret_cast<const char*>(t.seeds.data()), t.seeds.size());
  }
  for (const auto& t : img.tables) t.locator.serialize_into(out);
  return out;
}

inline ResizeImage decode_image_payload(std::string_view bytes, uint64_t global_depth) {
  ResizeImage img;
  img.global_depth = global_depth;
  if (bytes.size() < 16) throw MalformedBytes("image payload truncated");
  img.epoch = wire::get_u64(bytes.data());
  uint64_t count = wire::get_u64(bytes.data() + 8);
  size_t off = 16;
  img.tables.resize(count);
  for (auto& t : img.tables) {
    if (bytes.size() < off + 32) throw MalformedBytes("image table header truncated");
    t.table_id = wire::get_u64(bytes.data() + off);
    t.prefix = wire::get_u64(bytes.data() + off + 8);
    t.local_depth = wire::get_u64(bytes.data() + off + 16);
    uint64_t bucket_count = wire::get_u64(bytes.data() + off + 24);
    off += 32;
    if (bytes.size() < off + bucket_count) throw MalformedBytes("image seeds truncated");
    t.seeds.assign(bytes.data() + off, bytes.data() + off + bucket_count);
    off += bucket_count;
  }
  for (auto& t : img.tables) {
    size_t consumed = 0;
    t.locator = Locator::deserialize(bytes.substr(off), &consumed);
    off += consumed;
  }
  if (off != bytes.size()) throw MalformedBytes("trailing bytes after image payload");
  return img;
}

}  // namespace outback

#endif  // OUTBACK_PROTOCOL_HPP
