#include "dart/transport.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

#include "dart/error.hpp"

namespace dart::transport {

namespace {

struct FreeDeleter {
  void operator()(std::uint64_t* p) const noexcept { std::free(p); }
};

std::string region_name(RegionId id) {
  return "region " + std::to_string(static_cast<std::uint32_t>(id));
}

// Aligned 8-byte transfers go through atomic_ref so that a remote word write
// can be polled by the owner with local_load64.
void copy_out(std::byte* dst, const std::byte* src, std::size_t n) {
  if (n == 8 && reinterpret_cast<std::uintptr_t>(dst) % 8 == 0) {
    std::uint64_t v;
    std::memcpy(&v, src, 8);
    std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(dst))
        .store(v, std::memory_order_release);
    return;
  }
  std::memcpy(dst, src, n);
  std::atomic_thread_fence(std::memory_order_release);
}

void copy_in(std::byte* dst, const std::byte* src, std::size_t n) {
  if (n == 8 && reinterpret_cast<std::uintptr_t>(src) % 8 == 0) {
    const std::uint64_t v =
        std::atomic_ref<std::uint64_t>(
            *reinterpret_cast<std::uint64_t*>(const_cast<std::byte*>(src)))
            .load(std::memory_order_acquire);
    std::memcpy(dst, &v, 8);
    return;
  }
  std::atomic_thread_fence(std::memory_order_acquire);
  std::memcpy(dst, src, n);
}

}  // namespace

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::put: return "put";
    case OpKind::get: return "get";
    case OpKind::fetch_and_store: return "fetch_and_store";
    case OpKind::compare_and_swap: return "compare_and_swap";
    case OpKind::notify_send: return "notify_send";
    case OpKind::notify_recv: return "notify_recv";
    case OpKind::lock_acquire_start: return "lock_acquire_start";
    case OpKind::lock_queued: return "lock_queued";
    case OpKind::lock_acquired: return "lock_acquired";
    case OpKind::lock_released: return "lock_released";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Region

Region::Region(RegionId id, std::vector<Rank> participants, std::size_t bytes)
    : id_(id),
      participants_(std::move(participants)),
      bytes_(bytes),
      epoch_open_(participants_.size(), 0),
      pending_destroy_(participants_.size()) {
  const std::size_t words = std::max<std::size_t>(1, (bytes + 7) / 8);
  slabs_.reserve(participants_.size());
  for (std::size_t i = 0; i < participants_.size(); ++i) {
    // calloc: large slabs come back as lazily zeroed pages.
    auto* mem = static_cast<std::uint64_t*>(std::calloc(words, 8));
    if (mem == nullptr) {
      fail(Errc::out_of_global_memory, "cannot back " + region_name(id));
    }
    slabs_.emplace_back(mem);
  }
}

std::optional<Rank> Region::index_of(Rank r) const {
  auto it = std::lower_bound(participants_.begin(), participants_.end(), r);
  if (it == participants_.end() || *it != r) return std::nullopt;
  return static_cast<Rank>(it - participants_.begin());
}

// ---------------------------------------------------------------------------
// Fabric

Fabric::Fabric(Rank ranks) : Fabric(ranks, Options{}) {}

Fabric::Fabric(Rank ranks, Options options) : ranks_(ranks), options_(options) {
  if (ranks == 0) fail(Errc::invalid_config, "fabric needs at least one rank");
  mailboxes_.reserve(ranks);
  for (Rank r = 0; r < ranks; ++r) mailboxes_.push_back(std::make_unique<Mailbox>());
}

Fabric::~Fabric() = default;

void Fabric::set_trace(TraceHook hook) { trace_ = std::move(hook); }

void Fabric::emit(TraceEvent ev) {
  if (!trace_) return;
  if (ev.seq == 0) ev.seq = seq_.fetch_add(1, std::memory_order_relaxed) + 1;
  trace_(ev);
}

void Fabric::abort(const std::string& reason) {
  {
    std::lock_guard lk(abort_mutex_);
    if (aborted_.load()) return;
    abort_reason_ = reason;
    aborted_.store(true, std::memory_order_release);
  }
  for (auto& box : mailboxes_) {
    std::lock_guard lk(box->mutex);
    box->cv.notify_all();
  }
}

std::string Fabric::abort_reason() const {
  std::lock_guard lk(abort_mutex_);
  return abort_reason_;
}

std::size_t Fabric::live_regions() const {
  std::shared_lock lk(regions_mutex_);
  return regions_.size();
}

std::size_t Fabric::queued_messages() const {
  std::size_t n = 0;
  for (const auto& box : mailboxes_) {
    std::lock_guard lk(box->mutex);
    for (const auto& [key, q] : box->queues) n += q.size();
  }
  return n;
}

std::int64_t Fabric::now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<Region> Fabric::lookup(RegionId id) const {
  std::shared_lock lk(regions_mutex_);
  auto it = regions_.find(static_cast<std::uint32_t>(id));
  return it == regions_.end() ? nullptr : it->second;
}

RegionId Fabric::create_region(std::vector<Rank> participants, std::size_t bytes) {
  std::unique_lock lk(regions_mutex_);
  const RegionId id{next_region_++};
  regions_.emplace(static_cast<std::uint32_t>(id),
                   std::make_shared<Region>(id, std::move(participants), bytes));
  return id;
}

void Fabric::release_region(RegionId id) {
  std::unique_lock lk(regions_mutex_);
  auto it = regions_.find(static_cast<std::uint32_t>(id));
  if (it == regions_.end()) {
    fail(Errc::invalid_argument, "destroy of unknown " + region_name(id));
  }
  if (--it->second->pending_destroy_ == 0) regions_.erase(it);
}

// ---------------------------------------------------------------------------
// Endpoint

Endpoint::Endpoint(Fabric& fabric, Rank rank) : fabric_(&fabric), rank_(rank) {
  if (rank >= fabric.ranks()) fail(Errc::invalid_argument, "rank out of range");
}

RegionId Endpoint::region_create(std::span<const Rank> participants,
                                 std::size_t bytes, std::uint64_t tag) {
  if (participants.empty() ||
      !std::is_sorted(participants.begin(), participants.end()) ||
      std::adjacent_find(participants.begin(), participants.end()) !=
          participants.end()) {
    fail(Errc::invalid_argument, "region participants must be strictly ascending");
  }
  if (!std::binary_search(participants.begin(), participants.end(), rank_)) {
    fail(Errc::invalid_argument, "caller is not a region participant");
  }
  const Rank leader = participants.front();
  if (rank_ == leader) {
    const RegionId id = fabric_->create_region(
        std::vector<Rank>(participants.begin(), participants.end()), bytes);
    const auto raw = static_cast<std::uint32_t>(id);
    for (Rank r : participants.subspan(1)) {
      send(r, tag, std::as_bytes(std::span(&raw, 1)));
    }
    return id;
  }
  auto msg = recv(leader, tag);
  std::uint32_t raw = 0;
  if (msg.size() != sizeof raw) fail(Errc::invalid_state, "bad region handshake");
  std::memcpy(&raw, msg.data(), sizeof raw);
  return RegionId{raw};
}

void Endpoint::region_destroy(RegionId id) {
  if (auto region = fabric_->lookup(id)) {
    if (auto idx = region->index_of(rank_)) region->epoch_open_[*idx] = 0;
  }
  fabric_->release_region(id);
}

void Endpoint::epoch_open(RegionId id) {
  auto region = fabric_->lookup(id);
  if (!region) fail(Errc::invalid_argument, "unknown " + region_name(id));
  auto idx = region->index_of(rank_);
  if (!idx) fail(Errc::invalid_argument, "not a participant of " + region_name(id));
  region->epoch_open_[*idx] = 1;
}

void Endpoint::epoch_close(RegionId id) {
  auto region = fabric_->lookup(id);
  if (!region) fail(Errc::invalid_argument, "unknown " + region_name(id));
  auto idx = region->index_of(rank_);
  if (!idx) fail(Errc::invalid_argument, "not a participant of " + region_name(id));
  region->epoch_open_[*idx] = 0;
}

bool Endpoint::epoch_is_open(RegionId id) const {
  auto region = fabric_->lookup(id);
  if (!region) return false;
  auto idx = region->index_of(rank_);
  return idx && region->epoch_open_[*idx] != 0;
}

std::size_t Endpoint::region_extent(RegionId id) const {
  auto region = fabric_->lookup(id);
  if (!region) fail(Errc::invalid_argument, "unknown " + region_name(id));
  return region->extent();
}

std::shared_ptr<Region> Endpoint::checked_rma(RegionId id, Rank target,
                                              std::uint64_t disp,
                                              std::size_t length,
                                              const char* what) {
  auto region = fabric_->lookup(id);
  if (!region) fail(Errc::invalid_argument, std::string(what) + " on unknown " + region_name(id));
  auto idx = region->index_of(rank_);
  if (!idx || region->epoch_open_[*idx] == 0) {
    fail(Errc::epoch_violation,
         std::string(what) + " outside an access epoch on " + region_name(id));
  }
  if (target >= region->participants_.size()) {
    fail(Errc::invalid_argument, std::string(what) + " target out of range");
  }
  if (disp > region->extent() || length > region->extent() - disp) {
    fail(Errc::invalid_argument,
         std::string(what) + " [" + std::to_string(disp) + ", +" +
             std::to_string(length) + ") exceeds extent " +
             std::to_string(region->extent()));
  }
  return region;
}

Request Endpoint::put_nb(RegionId id, Rank target, std::uint64_t disp,
                         std::span<const std::byte> src) {
  auto region = checked_rma(id, target, disp, src.size(), "put");
  const Request req{next_request_++, rank_};
  if (src.empty()) return req;
  pending_.emplace(req.id, PendingOp{std::move(region), true, target, disp,
                                     src.data(), nullptr, src.size(), 0,
                                     fabric_->tracing() ? Fabric::now_ns() : 0});
  return req;
}

Request Endpoint::get_nb(RegionId id, Rank target, std::uint64_t disp,
                         std::span<std::byte> dest) {
  auto region = checked_rma(id, target, disp, dest.size(), "get");
  const Request req{next_request_++, rank_};
  if (dest.empty()) return req;
  pending_.emplace(req.id, PendingOp{std::move(region), false, target, disp,
                                     nullptr, dest.data(), dest.size(), 0,
                                     fabric_->tracing() ? Fabric::now_ns() : 0});
  return req;
}

void Endpoint::check_owned(const Request& req) const {
  if (req.origin != rank_ || req.id == 0 || req.id >= next_request_) {
    fail(Errc::invalid_argument, "request does not belong to this unit");
  }
}

void Endpoint::finish(PendingOp& op) {
  if (!fabric_->tracing()) return;
  TraceEvent ev{};
  ev.kind = op.is_put ? OpKind::put : OpKind::get;
  ev.source = rank_;
  ev.target = op.region->participants_[op.target];
  ev.region = static_cast<std::uint32_t>(op.region->id());
  ev.disp = op.disp;
  ev.bytes = op.length;
  ev.start_ns = op.start_ns;
  ev.end_ns = Fabric::now_ns();
  fabric_->emit(ev);
}

// Moves one chunk (or everything) of a pending transfer. The origin drives
// all progress; the target never participates.
bool Endpoint::progress(std::uint64_t id, bool to_completion) {
  auto it = pending_.find(id);
  if (it == pending_.end()) return true;
  PendingOp& op = it->second;
  const std::size_t chunk =
      to_completion ? op.length : std::max<std::size_t>(1, fabric_->options().progress_chunk);
  const std::size_t n = std::min(chunk, op.length - op.done);
  std::byte* remote = op.region->slab(op.target) + op.disp + op.done;
  if (op.is_put) {
    copy_out(remote, op.src + op.done, n);
  } else {
    copy_in(op.dest + op.done, remote, n);
  }
  op.done += n;
  if (op.done < op.length) return false;
  finish(op);
  pending_.erase(it);
  return true;
}

void Endpoint::wait(const Request& req) {
  check_owned(req);
  progress(req.id, true);
}

void Endpoint::wait(std::span<const Request> reqs) {
  for (const auto& r : reqs) check_owned(r);
  for (const auto& r : reqs) progress(r.id, true);
}

bool Endpoint::test(const Request& req) {
  check_owned(req);
  return progress(req.id, false);
}

std::vector<bool> Endpoint::test(std::span<const Request> reqs) {
  for (const auto& r : reqs) check_owned(r);
  std::vector<bool> flags;
  flags.reserve(reqs.size());
  for (const auto& r : reqs) flags.push_back(progress(r.id, false));
  return flags;
}

bool Endpoint::testall(std::span<const Request> reqs) {
  auto flags = test(reqs);
  return std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
}

std::shared_ptr<Region> Endpoint::checked_atomic(RegionId id, Rank target,
                                                 std::uint64_t disp) {
  if (disp % 8 != 0) fail(Errc::invalid_argument, "atomic displacement not 8-byte aligned");
  return checked_rma(id, target, disp, 8, "atomic");
}

std::int64_t Endpoint::fetch_and_store(RegionId id, Rank target,
                                       std::uint64_t disp, std::int64_t value) {
  auto region = checked_atomic(id, target, disp);
  auto* word = reinterpret_cast<std::uint64_t*>(region->slab(target) + disp);
  std::lock_guard lk(region->atomic_mutex_);
  std::atomic_ref<std::uint64_t> ref(*word);
  const auto old = static_cast<std::int64_t>(
      ref.exchange(static_cast<std::uint64_t>(value), std::memory_order_acq_rel));
  if (fabric_->tracing()) {
    TraceEvent ev{};
    ev.kind = OpKind::fetch_and_store;
    ev.source = rank_;
    ev.target = region->participants_[target];
    ev.region = static_cast<std::uint32_t>(id);
    ev.disp = disp;
    ev.bytes = 8;
    ev.start_ns = ev.end_ns = Fabric::now_ns();
    ev.operand = value;
    ev.result = old;
    fabric_->emit(ev);  // under the region's atomic mutex: seq is the swap order
  }
  return old;
}

std::int64_t Endpoint::compare_and_swap(RegionId id, Rank target,
                                        std::uint64_t disp, std::int64_t expected,
                                        std::int64_t desired) {
  auto region = checked_atomic(id, target, disp);
  auto* word = reinterpret_cast<std::uint64_t*>(region->slab(target) + disp);
  std::lock_guard lk(region->atomic_mutex_);
  std::atomic_ref<std::uint64_t> ref(*word);
  auto observed = static_cast<std::uint64_t>(expected);
  ref.compare_exchange_strong(observed, static_cast<std::uint64_t>(desired),
                              std::memory_order_acq_rel);
  if (fabric_->tracing()) {
    TraceEvent ev{};
    ev.kind = OpKind::compare_and_swap;
    ev.source = rank_;
    ev.target = region->participants_[target];
    ev.region = static_cast<std::uint32_t>(id);
    ev.disp = disp;
    ev.bytes = 8;
    ev.start_ns = ev.end_ns = Fabric::now_ns();
    ev.operand = expected;
    ev.result = static_cast<std::int64_t>(observed);
    fabric_->emit(ev);
  }
  return static_cast<std::int64_t>(observed);
}

std::span<std::byte> Endpoint::local_slab(RegionId id) {
  auto region = fabric_->lookup(id);
  if (!region) fail(Errc::invalid_argument, "unknown " + region_name(id));
  auto idx = region->index_of(rank_);
  if (!idx) fail(Errc::invalid_argument, "not a participant of " + region_name(id));
  return {region->slab(*idx), region->extent()};
}

std::int64_t Endpoint::local_load64(RegionId id, std::uint64_t disp) {
  auto slab = local_slab(id);
  if (disp % 8 != 0 || disp + 8 > slab.size()) {
    fail(Errc::invalid_argument, "bad local word displacement");
  }
  return static_cast<std::int64_t>(
      std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(slab.data() + disp))
          .load(std::memory_order_acquire));
}

void Endpoint::local_store64(RegionId id, std::uint64_t disp, std::int64_t value) {
  auto slab = local_slab(id);
  if (disp % 8 != 0 || disp + 8 > slab.size()) {
    fail(Errc::invalid_argument, "bad local word displacement");
  }
  std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(slab.data() + disp))
      .store(static_cast<std::uint64_t>(value), std::memory_order_release);
}

void Endpoint::send(Rank dest, std::uint64_t tag, std::span<const std::byte> payload) {
  if (dest >= fabric_->ranks()) fail(Errc::invalid_argument, "send to unknown rank");
  if (fabric_->aborted()) fail(Errc::aborted, fabric_->abort_reason());
  auto& box = *fabric_->mailboxes_[dest];
  {
    std::lock_guard lk(box.mutex);
    box.queues[{rank_, tag}].emplace_back(payload.begin(), payload.end());
  }
  box.cv.notify_all();
}

std::vector<std::byte> Endpoint::recv(Rank source, std::uint64_t tag) {
  if (source >= fabric_->ranks()) fail(Errc::invalid_argument, "recv from unknown rank");
  auto& box = *fabric_->mailboxes_[rank_];
  const auto deadline =
      std::chrono::steady_clock::now() + fabric_->options().recv_timeout;
  std::unique_lock lk(box.mutex);
  const auto key = std::make_pair(source, tag);
  for (;;) {
    auto it = box.queues.find(key);
    if (it != box.queues.end() && !it->second.empty()) {
      auto msg = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) box.queues.erase(it);
      return msg;
    }
    if (fabric_->aborted()) fail(Errc::aborted, fabric_->abort_reason());
    if (box.cv.wait_until(lk, deadline) == std::cv_status::timeout) {
      fail(Errc::timeout, "rank " + std::to_string(rank_) + " waiting on rank " +
                              std::to_string(source));
    }
  }
}

void Endpoint::notify_send(Rank dest, std::uint64_t tag) {
  send(dest, tag, {});
  if (fabric_->tracing()) {
    TraceEvent ev{};
    ev.kind = OpKind::notify_send;
    ev.source = rank_;
    ev.target = dest;
    ev.start_ns = ev.end_ns = Fabric::now_ns();
    ev.operand = static_cast<std::int64_t>(tag);
    fabric_->emit(ev);
  }
}

void Endpoint::notify_recv(Rank source, std::uint64_t tag) {
  const std::int64_t start = fabric_->tracing() ? Fabric::now_ns() : 0;
  auto msg = recv(source, tag);
  if (!msg.empty()) fail(Errc::invalid_state, "notification carried a payload");
  if (fabric_->tracing()) {
    TraceEvent ev{};
    ev.kind = OpKind::notify_recv;
    ev.source = source;
    ev.target = rank_;
    ev.start_ns = start;
    ev.end_ns = Fabric::now_ns();
    ev.operand = static_cast<std::int64_t>(tag);
    fabric_->emit(ev);
  }
}

}  // namespace dart::transport
