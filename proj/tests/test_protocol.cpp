#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>

#include "outback/protocol.hpp"
#include "test_util.hpp"

using namespace outback;

namespace {

std::string hex(const std::string& s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

}  // namespace

// Golden bytes generated once with the pinned encoder. Any mismatch here is
// wire-layout drift and breaks cross-version compatibility.
TEST_CASE("request frames match golden bytes for every kind") {
  RequestFrame get{MsgKind::kGet, 0, 10, 0, 7, "", ""};
  CHECK(encode(get).size() == 22);
  CHECK(hex(encode(get)) == "01000000000a00000000000000000700000000000000");

  RequestFrame makeup{MsgKind::kMakeupGet, 1, 3, -1, 8, "hello", ""};
  CHECK(hex(encode(makeup)) == "020100000003000000ff05000000080000000000000068656c6c6f");

  RequestFrame ins{MsgKind::kInsert, 2, 5, 0, 9, "k", "v"};
  CHECK(hex(encode(ins)) == "030200000005000000000100010009000000000000006b76");

  RequestFrame upd{MsgKind::kUpdate, 0, 1, 2, 10, "kk", "vv"};
  CHECK(hex(encode(upd)) == "04000000000100000002020002000a000000000000006b6b7676");

  RequestFrame del{MsgKind::kDelete, 3, 7, 1, 11, "dk", ""};
  CHECK(hex(encode(del)) == "05030000000700000001020000000b00000000000000646b");

  RequestFrame rr{MsgKind::kResizeRead, 0, 0, 0, 12, "", ""};
  rr.set_image_offset(24);
  uint64_t len = 16;
  rr.key.assign(reinterpret_cast<char*>(&len), 8);
  CHECK(hex(encode(rr)) == "06180000000000000000080000000c000000000000001000000000000000");

  RequestFrame faa{MsgKind::kResizeFaa, 0, 0, 0, 13, "", ""};
  int64_t delta = -1;
  faa.key.assign(reinterpret_cast<char*>(&delta), 8);
  CHECK(hex(encode(faa)) == "07000000000000000000080000000d00000000000000ffffffffffffffff");
}

TEST_CASE("response frames match golden bytes") {
  ResponseFrame ok{7, Status::kSuccess, true, 42, "PAYLOAD"};
  CHECK(hex(encode(ok)) == "070000000000000000012a5041594c4f4144");
  ResponseFrame nf{8, Status::kNotFound, false, 0, ""};
  CHECK(hex(encode(nf)) == "0800000000000000010000");
}

TEST_CASE("registered-memory image payload matches golden bytes") {
  ResizeImage img;
  img.epoch = 1;
  img.global_depth = 1;
  PublishedTable t;
  t.table_id = 2;
  t.prefix = 1;
  t.local_depth = 1;
  t.seeds = {1, 2, 3, 4};
  t.locator = Locator::build({KeyBit{"a", false}, KeyBit{"b", true}}, 5);
  img.tables.push_back(std::move(t));

  std::string payload = encode_image_payload(img);
  CHECK(hex(payload) ==
        "010000000000000001000000000000000200000000000000010000000000000001000000000000000400"
        "0000000000000102030440000000000000004000000000000000e3c6889cf06abc8ec34c3775cc659958"
        "050000000000000000000000000000004000000000000000");

  ResizeImage back = decode_image_payload(payload, 1);
  CHECK(back.epoch == 1);
  REQUIRE(back.tables.size() == 1);
  CHECK(back.tables[0].table_id == 2);
  CHECK(back.tables[0].prefix == 1);
  CHECK(back.tables[0].local_depth == 1);
  CHECK(back.tables[0].seeds == std::vector<uint8_t>{1, 2, 3, 4});
  CHECK_FALSE(back.tables[0].locator.query("a"));
  CHECK(back.tables[0].locator.query("b"));
}

TEST_CASE("random frames round-trip for every kind") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 2000; ++i) {
    RequestFrame f;
    f.kind = static_cast<MsgKind>(1 + rng() % 5);
    f.table_id = static_cast<uint32_t>(rng());
    f.bucket = static_cast<uint32_t>(rng());
    f.request_id = rng();
    size_t klen = 1 + rng() % 32;
    size_t vlen = rng() % 64;
    for (size_t j = 0; j < klen; ++j) f.key.push_back(static_cast<char>(rng()));
    switch (f.kind) {
      case MsgKind::kGet:
        f.key.clear();
        f.slot = static_cast<int8_t>(rng() % 4);
        break;
      case MsgKind::kMakeupGet:
        f.slot = -1;
        break;
      case MsgKind::kInsert:
        f.slot = 0;
        for (size_t j = 0; j < vlen; ++j) f.value.push_back(static_cast<char>(rng()));
        break;
      case MsgKind::kUpdate:
        f.slot = static_cast<int8_t>(rng() % 4);
        for (size_t j = 0; j < vlen; ++j) f.value.push_back(static_cast<char>(rng()));
        break;
      case MsgKind::kDelete:
        f.slot = static_cast<int8_t>(rng() % 4);
        break;
      default:
        break;
    }
    RequestFrame back = decode_request(encode(f));
    REQUIRE(back == f);
  }

  for (int i = 0; i < 2000; ++i) {
    ResponseFrame f;
    f.request_id = rng();
    f.status = static_cast<Status>(rng() % 6);
    f.new_seed_present = (rng() & 1) != 0;
    f.new_seed = f.new_seed_present ? static_cast<uint8_t>(rng()) : 0;
    size_t plen = rng() % 300;
    for (size_t j = 0; j < plen; ++j) f.payload.push_back(static_cast<char>(rng()));
    ResponseFrame back = decode_response(encode(f));
    REQUIRE(back == f);
  }
}

TEST_CASE("truncated or oversized frames are rejected") {
  RequestFrame ins{MsgKind::kInsert, 2, 5, 0, 9, "key", "value"};
  std::string bytes = encode(ins);
  CHECK_THROWS_AS(decode_request(bytes.substr(0, bytes.size() - 1)), MalformedFrame);
  CHECK_THROWS_AS(decode_request(bytes.substr(0, 10)), MalformedFrame);
  CHECK_THROWS_AS(decode_request(bytes + "z"), MalformedFrame);

  ResponseFrame ok{7, Status::kSuccess, false, 0, "x"};
  std::string rbytes = encode(ok);
  CHECK_THROWS_AS(decode_response(rbytes.substr(0, 5)), MalformedFrame);

  RequestFrame big{MsgKind::kInsert, 0, 0, 0, 1, "k", std::string(600, 'v')};
  CHECK_THROWS_AS(encode(big), MalformedFrame);
}

TEST_CASE("kind invariants are enforced") {
  RequestFrame get_with_key{MsgKind::kGet, 0, 0, 0, 1, "k", ""};
  CHECK_THROWS_AS(encode(get_with_key), MalformedFrame);

  RequestFrame makeup_wrong_slot{MsgKind::kMakeupGet, 0, 0, 0, 1, "k", ""};
  CHECK_THROWS_AS(encode(makeup_wrong_slot), MalformedFrame);

  RequestFrame insert_no_key{MsgKind::kInsert, 0, 0, 0, 1, "", "v"};
  CHECK_THROWS_AS(encode(insert_no_key), MalformedFrame);

  std::string bad_status = encode(ResponseFrame{1, Status::kSuccess, false, 0, ""});
  bad_status[8] = 17;
  CHECK_THROWS_AS(decode_response(bad_status), MalformedFrame);
}

TEST_CASE("truncated image payloads are rejected") {
  ResizeImage img;
  img.epoch = 3;
  img.global_depth = 0;
  PublishedTable t;
  t.table_id = 0;
  t.prefix = 0;
  t.local_depth = 0;
  t.seeds = {9};
  t.locator = Locator::build({});
  img.tables.push_back(std::move(t));
  std::string payload = encode_image_payload(img);
  for (size_t cut : {payload.size() - 1, size_t{20}, size_t{8}}) {
    CHECK_THROWS_AS(decode_image_payload(payload.substr(0, cut), 0), MalformedBytes);
  }
}
