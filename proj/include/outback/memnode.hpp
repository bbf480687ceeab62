#ifndef OUTBACK_MEMNODE_HPP
#define OUTBACK_MEMNODE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "outback/errors.hpp"
#include "outback/hash.hpp"
#include "outback/kvlog.hpp"
#include "outback/ludo.hpp"
#include "outback/othello.hpp"
#include "outback/protocol.hpp"

// Memory-node engine: packed DMPH buckets, the KV log, the overflowed cache,
// authoritative seeds, per-bucket exclusive locks, the extendible directory
// and the resize state machine. The Get path touches exactly one bucket word
// and one log block; it never hashes and never compares keys.

namespace outback {

struct MemNodeConfig {
  double load_factor = 0.95;            // table sizing for bulk loads
  uint32_t cache_capacity = 4096;       // overflow cache entries per table
  double resize_load_trigger = 0.97;    // s_slow: table load factor bound
  // s_slow also fires at cache >= capacity/2; s_stop at >= 0.9 * capacity.
  std::chrono::milliseconds ack_grace{100};       // build starts after this even if un-acked
  std::chrono::milliseconds check_interval{500};  // N_cNode poll, 2x a second
  bool record_history = false;          // per-bucket op recording for checkers
};

enum class Phase : uint8_t { kIdle, kPreResize, kPublished, kDraining };

// FIFO per-bucket lock: requests for a locked bucket queue in arrival order.
class TicketLock {
 public:
  void lock() {
    uint32_t ticket = next_.fetch_add(1, std::memory_order_acq_rel);
    while (serving_.load(std::memory_order_acquire) != ticket) {
      std::this_thread::yield();
    }
  }
  void unlock() { serving_.fetch_add(1, std::memory_order_release); }

 private:
  std::atomic<uint32_t> next_{0};
  std::atomic<uint32_t> serving_{0};
};

// Overflow cache: full key -> (home bucket, block address, block length).
// The home bucket is kept so cache bits can be recomputed when a bucket
// reseeds.
class OverflowCache {
 public:
  bool insert(const std::string& key, uint32_t bucket, uint64_t addr, uint16_t len) {
    std::unique_lock g(mu_);
    auto [it, fresh] = map_.try_emplace(key, Entry{bucket, addr, len});
    if (!fresh) {
      it->second = Entry{bucket, addr, len};
      return false;
    }
    by_bucket_.emplace(bucket, it->first);
    return true;
  }

  struct Entry {
    uint32_t bucket;
    uint64_t addr;
    uint16_t len;
  };

  std::optional<Entry> lookup(const std::string& key) const {
    std::shared_lock g(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  bool update(const std::string& key, uint64_t addr, uint16_t len) {
    std::unique_lock g(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return false;
    it->second.addr = addr;
    it->second.len = len;
    return true;
  }

  std::optional<uint32_t> erase(const std::string& key) {
    std::unique_lock g(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    uint32_t bucket = it->second.bucket;
    auto range = by_bucket_.equal_range(bucket);
    for (auto b = range.first; b != range.second; ++b) {
      if (b->second == key) {
        by_bucket_.erase(b);
        break;
      }
    }
    map_.erase(it);
    return bucket;
  }

  std::vector<std::string> keys_in_bucket(uint32_t bucket) const {
    std::shared_lock g(mu_);
    std::vector<std::string> out;
    auto range = by_bucket_.equal_range(bucket);
    for (auto it = range.first; it != range.second; ++it) out.push_back(it->second);
    return out;
  }

  std::vector<std::pair<std::string, Entry>> snapshot() const {
    std::shared_lock g(mu_);
    std::vector<std::pair<std::string, Entry>> out;
    out.reserve(map_.size());
    for (const auto& [k, e] : map_) out.emplace_back(k, e);
    return out;
  }

  size_t size() const {
    std::shared_lock g(mu_);
    return map_.size();
  }

  void clear() {
    std::unique_lock g(mu_);
    map_.clear();
    by_bucket_.clear();
  }

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Entry> map_;
  std::unordered_multimap<uint32_t, std::string> by_bucket_;
};

// (2,4)-cuckoo side table for keys no 8-bit seed could place. Stores the
// full key and the block address; consulted only on the makeup path.
class FallbackTable {
 public:
  FallbackTable() : buckets_(16), cells_(buckets_ * 4) {}

  void insert(const std::string& key, uint64_t addr, uint16_t len) {
    std::unique_lock g(mu_);
    insert_locked(key, addr, len);
  }

  std::optional<std::pair<uint64_t, uint16_t>> lookup(const std::string& key) const {
    std::shared_lock g(mu_);
    const Cell* c = find_locked(key);
    if (!c) return std::nullopt;
    return std::make_pair(c->addr, c->len);
  }

  bool update(const std::string& key, uint64_t addr, uint16_t len) {
    std::unique_lock g(mu_);
    Cell* c = const_cast<Cell*>(find_locked(key));
    if (!c) return false;
    c->addr = addr;
    c->len = len;
    return true;
  }

  bool erase(const std::string& key) {
    std::unique_lock g(mu_);
    Cell* c = const_cast<Cell*>(find_locked(key));
    if (!c) return false;
    c->used = false;
    c->key.clear();
    --count_;
    return true;
  }

  size_t size() const {
    std::shared_lock g(mu_);
    return count_;
  }

 private:
  struct Cell {
    std::string key;
    uint64_t addr = 0;
    uint16_t len = 0;
    bool used = false;
  };

  const Cell* find_locked(const std::string& key) const {
    for (bool choice : {false, true}) {
      uint64_t b = digest(key, choice ? kBucketSeed1 : kBucketSeed0) % buckets_;
      for (int s = 0; s < 4; ++s) {
        const Cell& c = cells_[b * 4 + s];
        if (c.used && c.key == key) return &c;
      }
    }
    return nullptr;
  }

  void insert_locked(std::string key, uint64_t addr, uint16_t len) {
    if (Cell* c = const_cast<Cell*>(find_locked(key))) {
      c->addr = addr;
      c->len = len;
      return;
    }
    std::string cur_key = std::move(key);
    uint64_t cur_addr = addr;
    uint16_t cur_len = len;
    uint64_t b = digest(cur_key, kBucketSeed0) % buckets_;
    for (int step = 0; step < 64; ++step) {
      for (int s = 0; s < 4; ++s) {
        Cell& c = cells_[b * 4 + s];
        if (!c.used) {
          c = Cell{std::move(cur_key), cur_addr, cur_len, true};
          ++count_;
          return;
        }
      }
      int victim = step & 3;
      Cell& c = cells_[b * 4 + victim];
      std::swap(cur_key, c.key);
      std::swap(cur_addr, c.addr);
      std::swap(cur_len, c.len);
      uint64_t b0 = digest(cur_key, kBucketSeed0) % buckets_;
      b = (b == b0) ? digest(cur_key, kBucketSeed1) % buckets_ : b0;
    }
    grow_locked();
    insert_locked(std::move(cur_key), cur_addr, cur_len);
  }

  void grow_locked() {
    std::vector<Cell> old = std::move(cells_);
    buckets_ *= 2;
    cells_.assign(buckets_ * 4, Cell{});
    count_ = 0;
    for (auto& c : old) {
      if (c.used) insert_locked(std::move(c.key), c.addr, c.len);
    }
  }

  mutable std::shared_mutex mu_;
  uint64_t buckets_;
  std::vector<Cell> cells_;
  size_t count_ = 0;
};

// One operation as recorded under its bucket lock, for the history checker.
struct HistoryRecord {
  uint32_t table_id;
  uint32_t bucket;
  uint64_t seq;      // per-bucket sequence number taken inside the lock
  MsgKind kind;
  std::string key;   // key written, or key read back (for Get: block key)
  std::string value; // value written or returned
  Status status;
};

// One DMPH table's memory half. Slot words are atomic so the lock-free Get
// path reads them untorn; writers mutate them under the bucket lock.
struct MemTable {
  uint32_t id = 0;
  uint32_t bucket_count = 0;
  uint64_t prefix = 0;
  uint32_t local_depth = 0;
  std::unique_ptr<std::atomic<uint64_t>[]> slots;  // 4 * bucket_count words
  std::vector<uint8_t> seeds;                      // authoritative copy
  std::unique_ptr<TicketLock[]> locks;             // one per bucket
  std::vector<uint64_t> bucket_seq;                // history mode only
  OverflowCache cache;
  std::atomic<uint64_t> residents{0};

  MemTable(uint32_t table_id, uint32_t buckets, uint64_t pfx, uint32_t depth)
      : id(table_id),
        bucket_count(buckets),
        prefix(pfx),
        local_depth(depth),
        slots(new std::atomic<uint64_t>[uint64_t{buckets} * kSlotsPerBucket]),
        locks(new TicketLock[buckets]) {
    for (uint64_t i = 0; i < uint64_t{buckets} * kSlotsPerBucket; ++i) {
      slots[i].store(0, std::memory_order_relaxed);
    }
  }

  SlotEntry slot(uint32_t bucket, uint32_t s) const {
    return SlotEntry{slots[uint64_t{bucket} * kSlotsPerBucket + s].load(std::memory_order_acquire)};
  }
  void set_slot(uint32_t bucket, uint32_t s, SlotEntry e) {
    slots[uint64_t{bucket} * kSlotsPerBucket + s].store(e.raw, std::memory_order_release);
  }

  double load() const {
    return static_cast<double>(residents.load(std::memory_order_relaxed)) /
           (static_cast<double>(bucket_count) * kSlotsPerBucket);
  }

  // buckets + seeds bits, for the memory budget checks
  uint64_t index_bits() const {
    return uint64_t{bucket_count} * kSlotsPerBucket * 64 + uint64_t{bucket_count} * 8;
  }
};

// The registered memory region clients read (and FAA) during resize.
// [0: N_cNode u64][8: len u64][16: Global_d u64][24: payload…]
class RegisteredImage {
 public:
  RegisteredImage() : bytes_(kImageHeaderBytes, '\0') {}

  void publish(uint64_t global_depth, std::string_view payload, uint64_t n_cnode) {
    std::unique_lock g(mu_);
    bytes_.assign(kImageHeaderBytes, '\0');
    bytes_ += payload;
    uint64_t len = payload.size();
    std::memcpy(bytes_.data() + 8, &len, 8);
    std::memcpy(bytes_.data() + 16, &global_depth, 8);
    // Written last: a non-zero N_cNode tells clients the image is complete.
    std::memcpy(bytes_.data(), &n_cnode, 8);
  }

  void clear() {
    std::unique_lock g(mu_);
    bytes_.assign(kImageHeaderBytes, '\0');
  }

  std::string read(uint64_t offset, uint64_t len) const {
    std::shared_lock g(mu_);
    if (offset + len > bytes_.size() || offset + len < offset) {
      throw OutOfRange("image read past end");
    }
    return bytes_.substr(offset, len);
  }

  uint64_t faa(uint64_t offset, int64_t delta) {
    std::unique_lock g(mu_);
    if (offset + 8 > bytes_.size()) throw OutOfRange("image faa past end");
    uint64_t prev;
    std::memcpy(&prev, bytes_.data() + offset, 8);
    uint64_t next = prev + static_cast<uint64_t>(delta);
    std::memcpy(bytes_.data() + offset, &next, 8);
    return prev;
  }

  uint64_t n_cnode() const {
    std::shared_lock g(mu_);
    uint64_t v;
    std::memcpy(&v, bytes_.data(), 8);
    return v;
  }

 private:
  mutable std::shared_mutex mu_;
  std::string bytes_;
};

struct BootstrapImage {
  uint64_t global_depth = 0;
  std::vector<PublishedTable> tables;
};

class MemNode {
 public:
  explicit MemNode(MemNodeConfig cfg = {}) : cfg_(cfg) {
    resize_worker_ = std::jthread([this](std::stop_token st) { resize_loop(st); });
  }

  ~MemNode() {
    resize_worker_.request_stop();
    {
      std::lock_guard g(resize_mu_);
      resize_cv_.notify_all();
    }
  }

  MemNode(const MemNode&) = delete;
  MemNode& operator=(const MemNode&) = delete;

  // --- bootstrap -----------------------------------------------------------

  // Loads n pairs through the bulk construct path and returns the compute
  // half for client bootstrap.
  BootstrapImage bulk_load(const std::vector<std::pair<std::string, std::string>>& kvs) {
    std::vector<ConstructEntry> entries;
    entries.reserve(kvs.size());
    for (const auto& [k, v] : kvs) {
      if (kv_block_size(k.size(), v.size()) > SlotEntry::kMaxBlockLen) {
        throw OutOfRange("kv block exceeds 511 bytes");
      }
      uint64_t addr = log_.append(k, v);
      entries.push_back(ConstructEntry{
          k, SlotEntry::make(false, fingerprint_of(k).value,
                             static_cast<uint16_t>(kv_block_size(k.size(), v.size())), addr)});
    }
    ConstructedTable built = construct(entries, cfg_.load_factor);

    auto table = install_table(built, entries, /*prefix=*/0, /*depth=*/0);
    {
      std::unique_lock g(registry_mu_);
      global_depth_ = 0;
      directory_.assign(1, table->id);
    }

    BootstrapImage image;
    image.global_depth = 0;
    PublishedTable pt;
    pt.table_id = table->id;
    pt.prefix = 0;
    pt.local_depth = 0;
    pt.seeds = built.seeds;
    pt.locator = std::move(built.locator);
    image.tables.push_back(std::move(pt));
    return image;
  }

  // --- client registry -----------------------------------------------------

  uint32_t register_client() {
    std::lock_guard g(clients_mu_);
    uint32_t id = next_client_id_++;
    clients_.insert(id);
    return id;
  }

  void unregister_client(uint32_t id) {
    std::lock_guard g(clients_mu_);
    clients_.erase(id);
  }

  // --- request dispatch (what transport workers run) ------------------------

  ResponseFrame dispatch(uint32_t client_id, const RequestFrame& req) {
    worker_dispatches_.fetch_add(1, std::memory_order_relaxed);
    ResponseFrame resp;
    try {
      switch (req.kind) {
        case MsgKind::kGet:
          resp = handle_get(req.table_id, req.bucket, static_cast<uint32_t>(req.slot));
          break;
        case MsgKind::kMakeupGet:
          resp = handle_makeup_get(req.table_id, req.bucket, req.key);
          break;
        case MsgKind::kInsert:
          resp = handle_insert(client_id, req);
          break;
        case MsgKind::kUpdate:
          resp = handle_update(req.table_id, req.bucket, static_cast<uint32_t>(req.slot), req.key,
                               req.value);
          break;
        case MsgKind::kDelete:
          resp = handle_delete(client_id, req);
          break;
        default:
          throw MalformedFrame("resize frames never reach request workers");
      }
    } catch (const OutOfRange&) {
      resp.status = Status::kNotFound;
    }
    resp.request_id = req.request_id;
    fold_resize_notice(client_id, req.kind, resp);
    return resp;
  }

  // --- resize channel (serviced by the transport, not request workers) ------

  std::string resize_read(uint64_t offset, uint64_t len) const { return image_.read(offset, len); }

  uint64_t resize_faa(uint64_t offset, int64_t delta) {
    uint64_t prev = image_.faa(offset, delta);
    return prev;
  }

  // --- module operations -----------------------------------------------------

  // Zero-computation read: one slot word, one log block, nothing else.
  ResponseFrame handle_get(uint32_t table_id, uint32_t bucket, uint32_t slot) {
    ResponseFrame resp;
    std::shared_ptr<MemTable> t = table_or_null(table_id);
    if (!t) {
      resp.status = Status::kNotFound;
      return resp;
    }
    if (bucket >= t->bucket_count || slot >= kSlotsPerBucket) {
      throw OutOfRange("get indices out of range");
    }
    if (cfg_.record_history) return recorded_get(*t, bucket, slot);
    SlotEntry e = t->slot(bucket, slot);
    if (e.empty()) {
      resp.status = Status::kNotFound;
      return resp;
    }
    BlockView block = log_.read(e.address(), e.length());
    resp.status = Status::kSuccess;
    resp.payload = block_bytes(block);
    return resp;
  }

  ResponseFrame handle_makeup_get(uint32_t table_id, uint32_t bucket, const std::string& key) {
    ResponseFrame resp;
    std::shared_ptr<MemTable> t = table_or_null(table_id);
    if (t && bucket < t->bucket_count) {
      // overflowed cache first
      if (auto hit = t->cache.lookup(key)) {
        BlockView block = log_.read(hit->addr, hit->len);
        resp.status = Status::kSuccess;
        resp.payload = block_bytes(block);
        return resp;
      }
      // then every resident of the bucket, returning the current seed when
      // the key moved to another slot
      t->locks[bucket].lock();
      for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
        SlotEntry e = t->slot(bucket, s);
        if (e.empty()) continue;
        BlockView block = log_.read(e.address(), e.length());
        if (block.key == key) {
          resp.status = Status::kSuccess;
          resp.payload = block_bytes(block);
          resp.new_seed_present = true;
          resp.new_seed = t->seeds[bucket];
          t->locks[bucket].unlock();
          return resp;
        }
      }
      t->locks[bucket].unlock();
    }
    if (auto fb = fallback_.lookup(key)) {
      BlockView block = log_.read(fb->first, fb->second);
      resp.status = Status::kSuccess;
      resp.payload = block_bytes(block);
      return resp;
    }
    // The addressed table may be stale (post-finalize); resolve through the
    // current directory and search both candidate buckets by full key.
    if (auto found = directory_resolve_search(table_id, key)) {
      resp.status = Status::kSuccess;
      resp.payload = *found;
      return resp;
    }
    resp.status = Status::kNotFound;
    return resp;
  }

  ResponseFrame handle_insert(uint32_t client_id, const RequestFrame& req) {
    ResponseFrame resp;
    if (kv_block_size(req.key.size(), req.value.size()) > SlotEntry::kMaxBlockLen) {
      resp.status = Status::kTooLarge;
      return resp;
    }
    {
      std::unique_lock g(pending_mu_);
      Phase p = phase_.load(std::memory_order_acquire);
      if (p != Phase::kIdle) {
        std::shared_ptr<MemTable> target;
        {
          std::lock_guard rg(resize_mu_);
          target = resize_target_;
        }
        if (target && target->cache.size() >= stop_threshold()) {
          resp.status = Status::kPreResize;  // s_stop: refused outright
          return resp;
        }
        pending_.push_back(PendingOp{next_seq(), client_id, req});
        resp.status = Status::kFalseBuffered;
        return resp;
      }
    }
    resp = apply_insert(req);
    if (resp.status == Status::kSuccess) {
      Phase p = maybe_trigger_resize(req.table_id);
      if (p == Phase::kPreResize &&
          trigger_epoch_.load(std::memory_order_acquire) != acked_epoch(client_id)) {
        resp.status = Status::kPreResize;
      }
    }
    return resp;
  }

  ResponseFrame handle_update(uint32_t table_id, uint32_t bucket, uint32_t slot,
                              const std::string& key, const std::string& value) {
    ResponseFrame resp;
    if (kv_block_size(key.size(), value.size()) > SlotEntry::kMaxBlockLen) {
      resp.status = Status::kTooLarge;
      return resp;
    }
    std::shared_ptr<MemTable> t = table_or_null(table_id);
    if (!t || bucket >= t->bucket_count || slot >= kSlotsPerBucket) {
      throw OutOfRange("update indices out of range");
    }
    t->locks[bucket].lock();
    SlotEntry e = t->slot(bucket, slot);
    bool matched = false;
    if (!e.empty()) {
      BlockView block = log_.read(e.address(), e.length());
      if (block.key == key) {
        uint64_t addr = log_.append(key, value);
        uint16_t len = static_cast<uint16_t>(kv_block_size(key.size(), value.size()));
        SlotEntry updated = e;
        updated.repoint(len, addr);  // fingerprint unchanged: same key
        t->set_slot(bucket, slot, updated);
        record_write(*t, bucket, MsgKind::kUpdate, key, value, Status::kSuccess);
        matched = true;
        uint64_t seq = next_seq();
        t->locks[bucket].unlock();
        note_dirty_if_resizing(t->id, key, addr, len, seq);
        resp.status = Status::kSuccess;
        return resp;
      }
    }
    if (!matched) {
      // mismatch or empty: the key may live in the overflowed cache
      if (e.cache_bit() || e.empty()) {
        if (t->cache.lookup(key)) {
          uint64_t addr = log_.append(key, value);
          uint16_t len = static_cast<uint16_t>(kv_block_size(key.size(), value.size()));
          t->cache.update(key, addr, len);
          record_write(*t, bucket, MsgKind::kUpdate, key, value, Status::kSuccess);
          uint64_t seq = next_seq();
          t->locks[bucket].unlock();
          note_dirty_if_resizing(t->id, key, addr, len, seq);
          resp.status = Status::kSuccess;
          return resp;
        }
      }
      if (fallback_.lookup(key)) {
        uint64_t addr = log_.append(key, value);
        uint16_t len = static_cast<uint16_t>(kv_block_size(key.size(), value.size()));
        fallback_.update(key, addr, len);
        t->locks[bucket].unlock();
        resp.status = Status::kSuccess;
        return resp;
      }
    }
    Status st = e.empty() ? Status::kNotFound : Status::kKeyMismatch;
    record_write(*t, bucket, MsgKind::kUpdate, key, value, st);
    t->locks[bucket].unlock();
    resp.status = st;
    return resp;
  }

  ResponseFrame handle_delete(uint32_t client_id, const RequestFrame& req) {
    ResponseFrame resp;
    {
      std::unique_lock g(pending_mu_);
      if (phase_.load(std::memory_order_acquire) != Phase::kIdle) {
        pending_.push_back(PendingOp{next_seq(), client_id, req});
        resp.status = Status::kFalseBuffered;
        return resp;
      }
    }
    return apply_delete(req);
  }

  // Called after every insert; starts resize preparation when a threshold
  // crossed.
  Phase maybe_trigger_resize(uint32_t table_id) {
    std::shared_ptr<MemTable> t = table_or_null(table_id);
    if (!t) return phase_.load(std::memory_order_acquire);
    bool over_load = t->load() >= cfg_.resize_load_trigger;
    bool over_cache = t->cache.size() >= cfg_.cache_capacity / 2;
    if (!over_load && !over_cache) return phase_.load(std::memory_order_acquire);
    {
      std::lock_guard g(resize_mu_);
      if (phase_.load(std::memory_order_acquire) == Phase::kIdle) {
        resize_target_ = t;
        trigger_epoch_.fetch_add(1, std::memory_order_acq_rel);
        notified_.clear();
        // Target and epoch are in place before the phase flips; the worker
        // reads them under the same mutex.
        phase_.store(Phase::kPreResize, std::memory_order_release);
        resize_cv_.notify_all();
      }
    }
    return phase_.load(std::memory_order_acquire);
  }

  // --- observers -------------------------------------------------------------

  Phase phase() const { return phase_.load(std::memory_order_acquire); }
  uint64_t resize_count() const { return resizes_done_.load(std::memory_order_acquire); }
  uint64_t worker_dispatches() const { return worker_dispatches_.load(std::memory_order_relaxed); }
  const KvLog& log() const { return log_; }
  FallbackTable& fallback() { return fallback_; }

  uint64_t global_depth() const {
    std::shared_lock g(registry_mu_);
    return global_depth_;
  }

  std::shared_ptr<MemTable> table_or_null(uint32_t table_id) const {
    std::shared_lock g(registry_mu_);
    auto it = tables_.find(table_id);
    return it == tables_.end() ? nullptr : it->second;
  }

  std::vector<uint32_t> directory_snapshot() const {
    std::shared_lock g(registry_mu_);
    return directory_;
  }

  // index overhead in bits (buckets + seeds + cache), for the budget check
  uint64_t memory_half_bits() const {
    std::shared_lock g(registry_mu_);
    uint64_t bits = 0;
    for (const auto& [id, t] : tables_) {
      bits += t->index_bits();
      // cache item: full key + 64-bit packed (bucket, address, length)
      for (const auto& [k, e] : t->cache.snapshot()) bits += 8 * k.size() + 64;
    }
    return bits;
  }

  std::vector<HistoryRecord> history_snapshot() const {
    std::lock_guard g(history_mu_);
    return history_;
  }

  // Waits until any in-flight resize fully finalizes.
  void wait_idle() const {
    while (phase_.load(std::memory_order_acquire) != Phase::kIdle) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  struct ResizeEvent {
    uint64_t epoch;
    std::chrono::steady_clock::time_point pre_resize;
    std::chrono::steady_clock::time_point published;
    std::chrono::steady_clock::time_point finalized;
  };
  std::vector<ResizeEvent> resize_events() const {
    std::lock_guard g(resize_mu_);
    return resize_events_;
  }

 private:
  struct PendingOp {
    uint64_t seq;
    uint32_t client_id;
    RequestFrame req;
  };

  struct DirtyRecord {
    uint64_t seq;
    bool is_delete;
    std::string key;
    uint64_t addr;
    uint16_t len;
  };

  static std::string block_bytes(const BlockView& block) {
    std::string out;
    out.reserve(16 + block.key.size() + block.value.size());
    uint64_t klen = block.key.size(), vlen = block.value.size();
    out.append(reinterpret_cast<const char*>(&klen), 8);
    out.append(reinterpret_cast<const char*>(&vlen), 8);
    out.append(block.key);
    out.append(block.value);
    return out;
  }

  uint32_t stop_threshold() const {
    return static_cast<uint32_t>(cfg_.cache_capacity * 9 / 10);
  }

  uint64_t acked_epoch(uint32_t client_id) const {
    std::lock_guard g(resize_mu_);
    auto it = notified_.find(client_id);
    return it == notified_.end() ? 0 : it->second;
  }

  // Marks resize-pending responses: any successful Get/Makeup/Update response
  // during the notification window carries PRE_RESIZE exactly once per client
  // per resize. Buffered inserts/deletes already say FALSE_BUFFERED.
  void fold_resize_notice(uint32_t client_id, MsgKind kind, ResponseFrame& resp) {
    Phase p = phase_.load(std::memory_order_acquire);
    if (p == Phase::kIdle) return;
    uint64_t epoch = trigger_epoch_.load(std::memory_order_acquire);
    std::lock_guard g(resize_mu_);
    auto it = notified_.find(client_id);
    bool already = it != notified_.end() && it->second >= epoch;
    if (resp.status == Status::kPreResize || resp.status == Status::kFalseBuffered) {
      notified_[client_id] = epoch;
      resize_cv_.notify_all();
      return;
    }
    if (already) return;
    bool foldable = (kind == MsgKind::kGet || kind == MsgKind::kMakeupGet) &&
                    (resp.status == Status::kSuccess || resp.status == Status::kNotFound);
    foldable |= kind == MsgKind::kUpdate && resp.status == Status::kSuccess;
    if (foldable) {
      resp.status = Status::kPreResize;
      notified_[client_id] = epoch;
      resize_cv_.notify_all();
    }
  }

  ResponseFrame recorded_get(MemTable& t, uint32_t bucket, uint32_t slot) {
    // History mode serializes Gets through the bucket lock so the recorded
    // order is a real linearization; the production path stays lock-free.
    ResponseFrame resp;
    t.locks[bucket].lock();
    SlotEntry e = t.slot(bucket, slot);
    if (e.empty()) {
      resp.status = Status::kNotFound;
      record_locked(t, bucket, MsgKind::kGet, "", "", Status::kNotFound);
    } else {
      BlockView block = log_.read(e.address(), e.length());
      resp.status = Status::kSuccess;
      resp.payload = block_bytes(block);
      record_locked(t, bucket, MsgKind::kGet, std::string(block.key), std::string(block.value),
                    Status::kSuccess);
    }
    t.locks[bucket].unlock();
    return resp;
  }

  void record_write(MemTable& t, uint32_t bucket, MsgKind kind, const std::string& key,
                    const std::string& value, Status st) {
    if (!cfg_.record_history) return;
    record_locked(t, bucket, kind, key, value, st);
  }

  void record_locked(MemTable& t, uint32_t bucket, MsgKind kind, const std::string& key,
                     const std::string& value, Status st) {
    if (!cfg_.record_history) return;
    if (t.bucket_seq.empty()) t.bucket_seq.assign(t.bucket_count, 0);
    uint64_t seq = t.bucket_seq[bucket]++;
    std::lock_guard g(history_mu_);
    history_.push_back(HistoryRecord{t.id, bucket, seq, kind, key, value, st});
  }

  // The three-case insert, run under the bucket's exclusive lock.
  ResponseFrame apply_insert(const RequestFrame& req) {
    ResponseFrame resp;
    std::shared_ptr<MemTable> t = table_or_null(req.table_id);
    if (!t || req.bucket >= t->bucket_count) {
      resp.status = Status::kNotFound;
      return resp;
    }
    const std::string& key = req.key;
    const std::string& value = req.value;
    const uint32_t bucket = req.bucket;
    const uint16_t len = static_cast<uint16_t>(kv_block_size(key.size(), value.size()));

    t->locks[bucket].lock();
    // Slot from the authoritative seed, not from the (possibly stale) client.
    uint32_t slot = slot_of(key, t->seeds[bucket]);
    SlotEntry existing = t->slot(bucket, slot);

    // Fingerprint gate, then full-key check: same key resolves to an update.
    if (!existing.empty() && existing.fingerprint() == fingerprint_of(key).value) {
      BlockView block = log_.read(existing.address(), existing.length());
      if (block.key == key) {
        uint64_t addr = log_.append(key, value);
        SlotEntry updated = existing;
        updated.repoint(len, addr);
        t->set_slot(bucket, slot, updated);
        record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
        uint64_t seq = next_seq();
        t->locks[bucket].unlock();
        note_dirty_if_resizing(t->id, key, addr, len, seq);
        resp.status = Status::kSuccess;  // UpdatedExisting
        return resp;
      }
    }
    // A key that previously overflowed updates its cache entry in place.
    if (t->cache.lookup(key)) {
      uint64_t addr = log_.append(key, value);
      t->cache.update(key, addr, len);
      record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
      uint64_t seq = next_seq();
      t->locks[bucket].unlock();
      note_dirty_if_resizing(t->id, key, addr, len, seq);
      resp.status = Status::kSuccess;
      return resp;
    }
    if (fallback_.lookup(key)) {
      uint64_t addr = log_.append(key, value);
      fallback_.update(key, addr, len);
      record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
      t->locks[bucket].unlock();
      resp.status = Status::kSuccess;
      return resp;
    }

    uint64_t addr = log_.append(key, value);
    SlotEntry fresh = SlotEntry::make(false, fingerprint_of(key).value, len, addr);

    if (existing.empty()) {
      // case a: free slot; keep the slot's cache bit for overflowed sharers
      fresh.set_cache_bit(existing.cache_bit());
      t->set_slot(bucket, slot, fresh);
      t->residents.fetch_add(1, std::memory_order_relaxed);
      record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
      uint64_t seq = next_seq();
      t->locks[bucket].unlock();
      note_dirty_if_resizing(t->id, key, addr, len, seq);
      resp.status = Status::kSuccess;  // Inserted
      return resp;
    }

    // Count residents and gather their keys.
    std::array<SlotEntry, kSlotsPerBucket> entries;
    std::array<std::string, kSlotsPerBucket> keys;
    uint32_t live = 0;
    for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
      SlotEntry e = t->slot(bucket, s);
      if (e.empty()) continue;
      BlockView block = log_.read(e.address(), e.length());
      entries[live] = e;
      keys[live] = std::string(block.key);
      ++live;
    }

    if (live < kSlotsPerBucket) {
      // case b: reseed so residents plus the new key occupy distinct slots
      std::array<std::string_view, kSlotsPerBucket> kviews;
      for (uint32_t i = 0; i < live; ++i) kviews[i] = keys[i];
      kviews[live] = key;
      if (auto seed = find_seed(std::span(kviews.data(), live + 1))) {
        std::array<SlotEntry, kSlotsPerBucket> rearranged{};
        for (uint32_t i = 0; i < live; ++i) {
          SlotEntry moved = entries[i];
          moved.set_cache_bit(false);
          rearranged[slot_of(keys[i], *seed)] = moved;
        }
        rearranged[slot_of(key, *seed)] = fresh;
        // Cache bits follow the cached keys' new home slots.
        for (const auto& cached : t->cache.keys_in_bucket(bucket)) {
          uint32_t home = slot_of(cached, *seed);
          rearranged[home].set_cache_bit(true);
        }
        for (uint32_t s = 0; s < kSlotsPerBucket; ++s) t->set_slot(bucket, s, rearranged[s]);
        t->seeds[bucket] = *seed;
        t->residents.fetch_add(1, std::memory_order_relaxed);
        record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
        uint64_t seq = next_seq();
        t->locks[bucket].unlock();
        note_dirty_if_resizing(t->id, key, addr, len, seq);
        resp.status = Status::kSuccess;
        resp.new_seed_present = true;
        resp.new_seed = *seed;
        return resp;
      }
    }

    // case c: full bucket (or unseedable): overflow cache, mark the slot
    if (t->cache.size() >= stop_threshold()) {
      record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kPreResize);
      t->locks[bucket].unlock();
      resp.status = Status::kPreResize;  // s_stop: no room left to buffer
      return resp;
    }
    t->cache.insert(key, bucket, addr, len);
    SlotEntry collided = t->slot(bucket, slot);
    collided.set_cache_bit(true);
    t->set_slot(bucket, slot, collided);
    record_write(*t, bucket, MsgKind::kInsert, key, value, Status::kSuccess);
    uint64_t seq = next_seq();
    t->locks[bucket].unlock();
    note_dirty_if_resizing(t->id, key, addr, len, seq);
    resp.status = Status::kSuccess;  // CachedOverflow
    return resp;
  }

  ResponseFrame apply_delete(const RequestFrame& req) {
    ResponseFrame resp;
    std::shared_ptr<MemTable> t = table_or_null(req.table_id);
    uint32_t slot = static_cast<uint32_t>(req.slot);
    if (!t || req.bucket >= t->bucket_count || slot >= kSlotsPerBucket) {
      throw OutOfRange("delete indices out of range");
    }
    const std::string& key = req.key;
    const uint32_t bucket = req.bucket;
    t->locks[bucket].lock();
    SlotEntry e = t->slot(bucket, slot);
    if (!e.empty()) {
      BlockView block = log_.read(e.address(), e.length());
      if (block.key == key) {
        SlotEntry cleared = e;
        cleared.clear_length();
        t->set_slot(bucket, slot, cleared);
        t->residents.fetch_sub(1, std::memory_order_relaxed);
        record_write(*t, bucket, MsgKind::kDelete, key, "", Status::kSuccess);
        uint64_t seq = next_seq();
        t->locks[bucket].unlock();
        note_dirty_if_resizing(t->id, key, 0, 0, seq, /*is_delete=*/true);
        resp.status = Status::kSuccess;
        return resp;
      }
    }
    if (e.cache_bit() || e.empty()) {
      if (auto home = t->cache.erase(key)) {
        refresh_cache_bits(*t, *home);
        record_write(*t, bucket, MsgKind::kDelete, key, "", Status::kSuccess);
        uint64_t seq = next_seq();
        t->locks[bucket].unlock();
        note_dirty_if_resizing(t->id, key, 0, 0, seq, /*is_delete=*/true);
        resp.status = Status::kSuccess;
        return resp;
      }
    }
    if (fallback_.erase(key)) {
      record_write(*t, bucket, MsgKind::kDelete, key, "", Status::kSuccess);
      t->locks[bucket].unlock();
      resp.status = Status::kSuccess;
      return resp;
    }
    Status st = e.empty() ? Status::kNotFound : Status::kKeyMismatch;
    record_write(*t, bucket, MsgKind::kDelete, key, "", st);
    t->locks[bucket].unlock();
    resp.status = st;
    return resp;
  }

  // Recomputes the four cache bits of a bucket from the cache's bucket index.
  // Caller holds the bucket lock.
  void refresh_cache_bits(MemTable& t, uint32_t bucket) {
    std::array<bool, kSlotsPerBucket> want{};
    for (const auto& cached : t.cache.keys_in_bucket(bucket)) {
      want[slot_of(cached, t.seeds[bucket])] = true;
    }
    for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
      SlotEntry e = t.slot(bucket, s);
      if (e.cache_bit() != want[s]) {
        e.set_cache_bit(want[s]);
        t.set_slot(bucket, s, e);
      }
    }
  }

  uint64_t next_seq() { return op_seq_.fetch_add(1, std::memory_order_acq_rel); }

  // Ops that mutate the resize target while a resize is in flight are
  // re-applied to the children at finalize, merged with buffered ops in
  // arrival order (seq is taken inside the bucket lock). This covers both
  // updates served on the stale table and writes that raced the phase flip
  // before the snapshot.
  void note_dirty_if_resizing(uint32_t table_id, const std::string& key, uint64_t addr,
                              uint16_t len, uint64_t seq, bool is_delete = false) {
    if (phase_.load(std::memory_order_acquire) == Phase::kIdle) return;
    std::lock_guard g(pending_mu_);
    if (phase_.load(std::memory_order_acquire) == Phase::kIdle) return;
    std::shared_ptr<MemTable> target;
    {
      std::lock_guard rg(resize_mu_);
      target = resize_target_;
    }
    if (!target || target->id != table_id) return;
    dirty_.push_back(DirtyRecord{seq, is_delete, key, addr, len});
  }

  // Full-key search through the current directory; used when a makeup Get
  // addressed a table that no longer exists. Searches the overflow cache and
  // both candidate buckets of the key in its current table, then gives up.
  std::optional<std::string> directory_resolve_search(uint32_t stale_table_id,
                                                      const std::string& key) {
    std::shared_ptr<MemTable> t;
    {
      std::shared_lock g(registry_mu_);
      if (directory_.empty()) return std::nullopt;
      uint64_t idx = global_depth_ == 0
                         ? 0
                         : digest(key, kDirectorySeed) >> (64 - global_depth_);
      auto it = tables_.find(directory_[idx]);
      if (it == tables_.end()) return std::nullopt;
      t = it->second;
    }
    if (t->id == stale_table_id) return std::nullopt;  // already searched
    if (auto hit = t->cache.lookup(key)) {
      BlockView block = log_.read(hit->addr, hit->len);
      return block_bytes(block);
    }
    for (bool choice : {false, true}) {
      uint32_t bucket = candidate_bucket(key, choice, t->bucket_count);
      t->locks[bucket].lock();
      for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
        SlotEntry e = t->slot(bucket, s);
        if (e.empty()) continue;
        BlockView block = log_.read(e.address(), e.length());
        if (block.key == key) {
          std::string bytes = block_bytes(block);
          t->locks[bucket].unlock();
          return bytes;
        }
      }
      t->locks[bucket].unlock();
    }
    return std::nullopt;
  }

  std::shared_ptr<MemTable> install_table(const ConstructedTable& built,
                                          const std::vector<ConstructEntry>& entries,
                                          uint64_t prefix, uint32_t depth) {
    uint32_t id = next_table_id_.fetch_add(1, std::memory_order_acq_rel);
    auto table = std::make_shared<MemTable>(id, built.bucket_count, prefix, depth);
    for (uint64_t i = 0; i < uint64_t{built.bucket_count} * kSlotsPerBucket; ++i) {
      table->slots[i].store(built.slots[i].raw, std::memory_order_relaxed);
    }
    table->seeds = built.seeds;
    table->residents.store(entries.size() - built.fallback.size(), std::memory_order_relaxed);
    for (size_t idx : built.fallback) {
      fallback_.insert(std::string(entries[idx].key), entries[idx].entry.address(),
                       entries[idx].entry.length());
    }
    {
      std::unique_lock g(registry_mu_);
      tables_.emplace(id, table);
    }
    return table;
  }

  // --- resize worker ---------------------------------------------------------

  void resize_loop(std::stop_token st) {
    while (!st.stop_requested()) {
      {
        std::unique_lock g(resize_mu_);
        resize_cv_.wait(g, [&] {
          return st.stop_requested() || phase_.load(std::memory_order_acquire) == Phase::kPreResize;
        });
      }
      if (st.stop_requested()) return;
      run_resize(st);
    }
  }

  bool all_clients_notified() const {
    std::lock_guard cg(clients_mu_);
    std::lock_guard rg(resize_mu_);
    uint64_t epoch = trigger_epoch_.load(std::memory_order_acquire);
    for (uint32_t id : clients_) {
      auto it = notified_.find(id);
      if (it == notified_.end() || it->second < epoch) return false;
    }
    return true;
  }

  void run_resize(std::stop_token st) {
    ResizeEvent event;
    event.epoch = trigger_epoch_.load(std::memory_order_acquire);
    event.pre_resize = std::chrono::steady_clock::now();

    std::shared_ptr<MemTable> stale;
    {
      std::lock_guard g(resize_mu_);
      stale = resize_target_;
    }

    // Wait for acknowledgements, the stop threshold, or the grace period.
    auto t0 = std::chrono::steady_clock::now();
    while (!st.stop_requested() && !all_clients_notified() &&
           stale->cache.size() < stop_threshold() &&
           std::chrono::steady_clock::now() - t0 < cfg_.ack_grace) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }

    // Snapshot residents and cache; Gets/Updates keep hitting the stale table
    // while the new tables are under construction.
    std::vector<std::pair<std::string, std::string>> snapshot;
    snapshot.reserve(static_cast<size_t>(stale->residents.load()) + stale->cache.size());
    for (uint32_t b = 0; b < stale->bucket_count; ++b) {
      stale->locks[b].lock();
      for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
        SlotEntry e = stale->slot(b, s);
        if (e.empty()) continue;
        BlockView block = log_.read(e.address(), e.length());
        snapshot.emplace_back(block.key, block.value);
      }
      stale->locks[b].unlock();
    }
    for (const auto& [key, entry] : stale->cache.snapshot()) {
      BlockView block = log_.read(entry.addr, entry.len);
      snapshot.emplace_back(std::string(block.key), std::string(block.value));
    }

    // Split by the next directory bit below the new local depth.
    uint32_t child_depth = stale->local_depth + 1;
    std::vector<std::pair<std::string, std::string>> part[2];
    for (auto& [k, v] : snapshot) {
      uint64_t pfx = digest(k, kDirectorySeed) >> (64 - child_depth);
      part[pfx & 1].emplace_back(std::move(k), std::move(v));
    }

    std::shared_ptr<MemTable> children[2];
    ConstructedTable built[2];
    std::vector<ConstructEntry> centries[2];
    for (int half = 0; half < 2; ++half) {
      centries[half].reserve(part[half].size());
      for (const auto& [k, v] : part[half]) {
        // Moved keys get fresh blocks; the log is append-only and never
        // compacted, so the old blocks simply become garbage.
        uint64_t addr = log_.append(k, v);
        centries[half].push_back(ConstructEntry{
            k, SlotEntry::make(false, fingerprint_of(k).value,
                               static_cast<uint16_t>(kv_block_size(k.size(), v.size())), addr)});
      }
      uint32_t bc = stale->bucket_count;  // capacity doubling across the two halves
      for (int attempt = 0;; ++attempt) {
        try {
          built[half] = construct_with_buckets(centries[half], bc,
                                               stale->id + 1);  // version: lineage marker
          break;
        } catch (const AssignmentFailed&) {
          if (attempt >= 4) throw;
          bc *= 2;
        }
      }
      uint64_t child_prefix = (stale->prefix << 1) | static_cast<uint64_t>(half);
      children[half] = install_table(built[half], centries[half], child_prefix, child_depth);
      child_locators_[half] = std::make_shared<const Locator>(built[half].locator);
    }

    // Directory update (doubling when the child depth exceeds it).
    {
      std::unique_lock g(registry_mu_);
      if (child_depth > global_depth_) {
        std::vector<uint32_t> doubled(directory_.size() * 2);
        for (size_t i = 0; i < doubled.size(); ++i) doubled[i] = directory_[i >> 1];
        directory_ = std::move(doubled);
        global_depth_ = child_depth;
      }
      uint32_t shift = static_cast<uint32_t>(global_depth_) - child_depth;
      for (int half = 0; half < 2; ++half) {
        uint64_t base = children[half]->prefix << shift;
        for (uint64_t i = 0; i < (uint64_t{1} << shift); ++i) {
          directory_[base + i] = children[half]->id;
        }
      }
    }

    // Publish the image: N_cNode stays 0 until the payload is complete.
    ResizeImage img;
    img.epoch = event.epoch;
    img.global_depth = global_depth();
    for (int half = 0; half < 2; ++half) {
      PublishedTable pt;
      pt.table_id = children[half]->id;
      pt.prefix = children[half]->prefix;
      pt.local_depth = child_depth;
      pt.seeds = built[half].seeds;
      pt.locator = built[half].locator;
      img.tables.push_back(std::move(pt));
    }
    uint64_t live_clients;
    {
      std::lock_guard g(clients_mu_);
      live_clients = clients_.size();
    }
    image_.publish(img.global_depth, encode_image_payload(img), live_clients);
    phase_.store(Phase::kPublished, std::memory_order_release);
    event.published = std::chrono::steady_clock::now();

    // Periodic checks (2x a second by default) until every client fetched.
    while (!st.stop_requested() && image_.n_cnode() > 0) {
      std::this_thread::sleep_for(cfg_.check_interval);
    }

    phase_.store(Phase::kDraining, std::memory_order_release);

    // Repoint updates that landed on the stale table during the resize, then
    // replay buffered inserts/deletes in arrival order, until both drain.
    while (true) {
      std::vector<DirtyRecord> dirty;
      std::vector<PendingOp> pending;
      {
        std::lock_guard g(pending_mu_);
        dirty.swap(dirty_);
        pending.swap(pending_);
        if (dirty.empty() && pending.empty()) {
          // Zero moved keys in the stale table before dropping it.
          for (uint32_t b = 0; b < stale->bucket_count; ++b) {
            stale->locks[b].lock();
            for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
              SlotEntry e = stale->slot(b, s);
              if (!e.empty()) {
                e.clear_length();
                stale->set_slot(b, s, e);
              }
            }
            stale->locks[b].unlock();
          }
          stale->cache.clear();
          {
            std::unique_lock rg(registry_mu_);
            tables_.erase(stale->id);
          }
          image_.clear();  // close the read channel
          {
            std::lock_guard rg(resize_mu_);
            resize_target_.reset();
          }
          phase_.store(Phase::kIdle, std::memory_order_release);
          break;
        }
      }
      // Merge live-op propagation and buffered ops back into arrival order.
      struct Step {
        uint64_t seq;
        const DirtyRecord* d;
        const PendingOp* p;
      };
      std::vector<Step> steps;
      steps.reserve(dirty.size() + pending.size());
      for (const auto& d : dirty) steps.push_back(Step{d.seq, &d, nullptr});
      for (const auto& op : pending) steps.push_back(Step{op.seq, nullptr, &op});
      std::sort(steps.begin(), steps.end(),
                [](const Step& a, const Step& b) { return a.seq < b.seq; });
      for (const auto& s : steps) {
        if (s.d) replay_dirty_on_children(children, *s.d);
        else replay_pending(children, child_depth, stale->id, *s.p);
      }
    }

    child_locators_[0].reset();
    child_locators_[1].reset();
    event.finalized = std::chrono::steady_clock::now();
    {
      std::lock_guard g(resize_mu_);
      resize_events_.push_back(event);
    }
    resizes_done_.fetch_add(1, std::memory_order_acq_rel);

    // Replay may itself have pushed a table over a threshold.
    std::vector<uint32_t> ids;
    {
      std::shared_lock g(registry_mu_);
      for (const auto& [id, t] : tables_) ids.push_back(id);
    }
    for (uint32_t id : ids) maybe_trigger_resize(id);
  }

  // Re-applies a live write's final state to the child table that now owns
  // the key: repoint when present, full insert when missing, delete when the
  // record is a delete. Child locators are still available here.
  void replay_dirty_on_children(std::shared_ptr<MemTable> children[2], const DirtyRecord& d) {
    uint64_t pfx_bit = (digest(d.key, kDirectorySeed) >> (64 - children[0]->local_depth)) & 1;
    MemTable& t = *children[pfx_bit];
    bool choice = child_locators_[pfx_bit]->query(d.key);
    uint32_t bucket = candidate_bucket(d.key, choice, t.bucket_count);
    if (d.is_delete) {
      RequestFrame del;
      del.kind = MsgKind::kDelete;
      del.table_id = t.id;
      del.bucket = bucket;
      del.slot = static_cast<int8_t>(slot_of(d.key, t.seeds[bucket]));
      del.key = d.key;
      try {
        apply_delete(del);
      } catch (const OutOfRange&) {
      }
      return;
    }
    // Look for the key in either candidate bucket by full key, then the
    // cache, then the fallback.
    for (bool c : {false, true}) {
      uint32_t b = candidate_bucket(d.key, c, t.bucket_count);
      t.locks[b].lock();
      for (uint32_t s = 0; s < kSlotsPerBucket; ++s) {
        SlotEntry e = t.slot(b, s);
        if (e.empty()) continue;
        BlockView block = log_.read(e.address(), e.length());
        if (block.key == d.key) {
          SlotEntry updated = e;
          updated.repoint(d.len, d.addr);
          t.set_slot(b, s, updated);
          t.locks[b].unlock();
          return;
        }
      }
      t.locks[b].unlock();
    }
    if (t.cache.lookup(d.key)) {
      t.cache.update(d.key, d.addr, d.len);
      return;
    }
    if (fallback_.lookup(d.key)) {
      fallback_.update(d.key, d.addr, d.len);
      return;
    }
    // Raced ahead of the snapshot: the key never made it into the child.
    BlockView block = log_.read(d.addr, d.len);
    RequestFrame ins;
    ins.kind = MsgKind::kInsert;
    ins.table_id = t.id;
    ins.bucket = bucket;
    ins.key = d.key;
    ins.value = std::string(block.value);
    apply_insert(ins);
  }

  void replay_pending(std::shared_ptr<MemTable> children[2], uint32_t child_depth,
                      uint32_t stale_id, const PendingOp& op) {
    RequestFrame req = op.req;
    if (req.table_id == stale_id) {
      // Stale coordinates: re-locate on the children using their locators.
      uint64_t pfx_bit = (digest(req.key, kDirectorySeed) >> (64 - child_depth)) & 1;
      MemTable& t = *children[pfx_bit];
      bool choice = child_locators_[pfx_bit]->query(req.key);
      req.table_id = t.id;
      req.bucket = candidate_bucket(req.key, choice, t.bucket_count);
    }
    if (req.kind == MsgKind::kInsert) {
      apply_insert(req);
      replayed_ops_.fetch_add(1, std::memory_order_relaxed);
    } else if (req.kind == MsgKind::kDelete) {
      // The buffered slot may predate a reseed; recompute from the current
      // authoritative seed.
      if (auto t = table_or_null(req.table_id); t && req.bucket < t->bucket_count) {
        t->locks[req.bucket].lock();
        req.slot = static_cast<int8_t>(slot_of(req.key, t->seeds[req.bucket]));
        t->locks[req.bucket].unlock();
      }
      try {
        apply_delete(req);
      } catch (const OutOfRange&) {
      }
      replayed_ops_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  MemNodeConfig cfg_;
  KvLog log_;
  FallbackTable fallback_;

  mutable std::shared_mutex registry_mu_;
  std::unordered_map<uint32_t, std::shared_ptr<MemTable>> tables_;
  std::vector<uint32_t> directory_;
  uint64_t global_depth_ = 0;
  std::atomic<uint32_t> next_table_id_{0};

  mutable std::mutex clients_mu_;
  std::set<uint32_t> clients_;
  uint32_t next_client_id_ = 1;

  std::atomic<Phase> phase_{Phase::kIdle};
  std::atomic<uint64_t> trigger_epoch_{0};
  mutable std::mutex resize_mu_;
  std::condition_variable resize_cv_;
  std::shared_ptr<MemTable> resize_target_;
  std::unordered_map<uint32_t, uint64_t> notified_;  // client -> acked epoch
  std::vector<ResizeEvent> resize_events_;

  std::mutex pending_mu_;
  std::vector<PendingOp> pending_;
  std::vector<DirtyRecord> dirty_;

  std::shared_ptr<const Locator> child_locators_[2];

  RegisteredImage image_;
  std::atomic<uint64_t> op_seq_{0};
  std::atomic<uint64_t> resizes_done_{0};
  std::atomic<uint64_t> replayed_ops_{0};
  std::atomic<uint64_t> worker_dispatches_{0};

  mutable std::mutex history_mu_;
  std::vector<HistoryRecord> history_;

  std::jthread resize_worker_;
};

}  // namespace outback

#endif  // OUTBACK_MEMNODE_HPP
