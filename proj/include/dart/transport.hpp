#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dart::transport {

/// Rank in the fabric (for regions: index within the region's participants).
using Rank = std::uint32_t;

enum class RegionId : std::uint32_t {};

enum class Channel : std::uint8_t {
  collective = 1,
  region = 2,
  lock = 3,
  user = 4,
};

/// Message tags: channel in the top byte, a 32-bit context (team id) and a
/// 24-bit sub-tag below it.
constexpr std::uint64_t make_tag(Channel ch, std::uint32_t context,
                                 std::uint32_t sub) {
  return (std::uint64_t{static_cast<std::uint8_t>(ch)} << 56) |
         (std::uint64_t{context} << 24) | (sub & 0xFFFFFFu);
}

enum class OpKind : std::uint8_t {
  put,
  get,
  fetch_and_store,
  compare_and_swap,
  notify_send,
  notify_recv,
  lock_acquire_start,
  lock_queued,
  lock_acquired,
  lock_released,
};

const char* to_string(OpKind kind);

struct TraceEvent {
  OpKind kind;
  Rank source = 0;  // absolute rank of the issuing unit
  Rank target = 0;  // absolute rank of the target unit
  std::uint32_t region = 0;
  std::uint64_t disp = 0;
  std::size_t bytes = 0;
  std::uint64_t seq = 0;  // fabric-wide order; exact for atomics per location
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::int64_t operand = 0;  // atomics: value written / expected
  std::int64_t result = 0;   // atomics: value observed
};

using TraceHook = std::function<void(const TraceEvent&)>;

struct Request {
  std::uint64_t id = 0;
  Rank origin = 0;
};

class Fabric;

/// An exposed memory region: one slab per participant.
class Region {
 public:
  Region(RegionId id, std::vector<Rank> participants, std::size_t bytes);

  RegionId id() const { return id_; }
  std::size_t extent() const { return bytes_; }
  const std::vector<Rank>& participants() const { return participants_; }
  /// Index of absolute rank `r` among participants.
  std::optional<Rank> index_of(Rank r) const;
  std::byte* slab(Rank index) {
    return reinterpret_cast<std::byte*>(slabs_[index].get());
  }

 private:
  friend class Fabric;
  friend class Endpoint;

  RegionId id_;
  std::vector<Rank> participants_;
  std::size_t bytes_;
  std::vector<std::unique_ptr<std::uint64_t[]>> slabs_;
  std::vector<char> epoch_open_;  // per participant index, written by owner only
  std::mutex atomic_mutex_;
  std::size_t pending_destroy_;
};

/// Shared in-process substrate for one run: regions, atomics, mailboxes.
class Fabric {
 public:
  struct Options {
    std::chrono::milliseconds recv_timeout{std::chrono::minutes(5)};
    /// Bytes moved per progress step of a non-blocking transfer.
    std::size_t progress_chunk = 64 * 1024;
  };

  explicit Fabric(Rank ranks);
  Fabric(Rank ranks, Options options);
  ~Fabric();
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  Rank ranks() const { return ranks_; }
  const Options& options() const { return options_; }

  void set_trace(TraceHook hook);
  bool tracing() const { return static_cast<bool>(trace_); }
  void emit(TraceEvent ev);

  /// Wakes every blocked receiver; all later blocking calls throw
  /// Errc::aborted.
  void abort(const std::string& reason);
  bool aborted() const { return aborted_.load(std::memory_order_acquire); }
  std::string abort_reason() const;

  std::size_t live_regions() const;
  std::size_t queued_messages() const;

  static std::int64_t now_ns();

 private:
  friend class Endpoint;

  struct Mailbox {
    std::mutex mutex;
    std::condition_variable cv;
    // FIFO per (source, tag).
    std::map<std::pair<Rank, std::uint64_t>, std::deque<std::vector<std::byte>>>
        queues;
  };

  std::shared_ptr<Region> lookup(RegionId id) const;
  RegionId create_region(std::vector<Rank> participants, std::size_t bytes);
  void release_region(RegionId id);

  Rank ranks_;
  Options options_;
  TraceHook trace_;
  std::atomic<std::uint64_t> seq_{0};
  std::atomic<bool> aborted_{false};
  mutable std::mutex abort_mutex_;
  std::string abort_reason_;

  mutable std::shared_mutex regions_mutex_;
  std::unordered_map<std::uint32_t, std::shared_ptr<Region>> regions_;
  std::uint32_t next_region_ = 1;

  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
};

/// A unit's view of the fabric. Requests issued here belong to this endpoint.
/// Not thread-safe; each unit owns exactly one.
class Endpoint {
 public:
  Endpoint(Fabric& fabric, Rank rank);
  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;

  Rank rank() const { return rank_; }
  Fabric& fabric() { return *fabric_; }

  // Collective over `participants` (ascending absolute ranks, caller
  // included). `tag` must be unique per concurrent creation context.
  RegionId region_create(std::span<const Rank> participants, std::size_t bytes,
                         std::uint64_t tag);
  /// Each participant calls once; storage is released after the last call.
  void region_destroy(RegionId id);
  void epoch_open(RegionId id);
  void epoch_close(RegionId id);
  bool epoch_is_open(RegionId id) const;
  std::size_t region_extent(RegionId id) const;

  // `target` is an index into the region's participants.
  Request put_nb(RegionId id, Rank target, std::uint64_t disp,
                 std::span<const std::byte> src);
  Request get_nb(RegionId id, Rank target, std::uint64_t disp,
                 std::span<std::byte> dest);

  void wait(const Request& req);
  void wait(std::span<const Request> reqs);
  bool test(const Request& req);
  std::vector<bool> test(std::span<const Request> reqs);
  bool testall(std::span<const Request> reqs);
  std::size_t pending() const { return pending_.size(); }

  std::int64_t fetch_and_store(RegionId id, Rank target, std::uint64_t disp,
                               std::int64_t value);
  std::int64_t compare_and_swap(RegionId id, Rank target, std::uint64_t disp,
                                std::int64_t expected, std::int64_t desired);

  /// Direct access to this rank's own slab; no epoch needed.
  std::span<std::byte> local_slab(RegionId id);
  std::int64_t local_load64(RegionId id, std::uint64_t disp);
  void local_store64(RegionId id, std::uint64_t disp, std::int64_t value);

  void send(Rank dest, std::uint64_t tag, std::span<const std::byte> payload);
  std::vector<std::byte> recv(Rank source, std::uint64_t tag);
  void notify_send(Rank dest, std::uint64_t tag);
  void notify_recv(Rank source, std::uint64_t tag);

 private:
  struct PendingOp {
    std::shared_ptr<Region> region;
    bool is_put;
    Rank target;
    std::uint64_t disp;
    const std::byte* src;
    std::byte* dest;
    std::size_t length;
    std::size_t done;
    std::int64_t start_ns;
  };

  std::shared_ptr<Region> checked_rma(RegionId id, Rank target, std::uint64_t disp,
                                      std::size_t length, const char* what);
  std::shared_ptr<Region> checked_atomic(RegionId id, Rank target,
                                         std::uint64_t disp);
  bool progress(std::uint64_t id, bool to_completion);
  void check_owned(const Request& req) const;
  void finish(PendingOp& op);

  Fabric* fabric_;
  Rank rank_;
  std::uint64_t next_request_ = 1;
  std::unordered_map<std::uint64_t, PendingOp> pending_;
};

}  // namespace dart::transport
