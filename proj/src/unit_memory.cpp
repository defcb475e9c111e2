#include <algorithm>

#include "dart/error.hpp"
#include "dart/runtime.hpp"

namespace dart {

GlobalPtr Unit::memalloc(std::size_t size) {
  require_init("memalloc");
  if (size == 0) fail(Errc::invalid_argument, "memalloc of zero bytes");
  auto off = local_pool_->allocate(size);
  if (!off) {
    fail(Errc::out_of_global_memory,
         "memalloc(" + std::to_string(size) + ") with " +
             std::to_string(local_pool_->capacity() - local_pool_->bytes_in_use()) +
             " bytes free");
  }
  return GlobalPtr::encode(id_, kNonCollectiveSegment, 0, *off);
}

void Unit::memfree(GlobalPtr p) {
  require_init("memfree");
  if (p.is_collective()) fail(Errc::invalid_argument, "memfree of a collective pointer");
  if (p.unit() != id_ || p.segment() != kNonCollectiveSegment) {
    fail(Errc::invalid_argument, "memfree of a pointer not owned by this unit: " +
                                     to_string(p));
  }
  local_pool_->release(p.offset());
}

GlobalPtr Unit::team_memalloc_aligned(TeamId team, std::size_t size) {
  const std::size_t slot = member_slot(team);
  const Communicator& comm = team_states_[slot]->comm;
  auto sizes = comm.allgather_u64(size);
  if (std::any_of(sizes.begin(), sizes.end(),
                  [&](std::uint64_t s) { return s != sizes.front(); })) {
    fail(Errc::invalid_argument, "team_memalloc_aligned sizes differ across members");
  }
  if (size == 0) fail(Errc::invalid_argument, "team_memalloc_aligned of zero bytes");

  // Replicas see the same sequence of allocations, so this agrees everywhere.
  auto& mem = *team_memory_[slot];
  auto off = mem.pool.allocate(size);
  if (!off) {
    fail(Errc::out_of_global_memory, "team " + std::to_string(team) + " pool exhausted");
  }
  const auto tag =
      transport::make_tag(transport::Channel::region, static_cast<std::uint32_t>(team), 0);
  const auto region = endpoint_.region_create(comm.members(), size, tag);
  endpoint_.epoch_open(region);
  mem.table.insert(*off, size, region);
  return GlobalPtr::encode(id_, static_cast<SegmentId>(team), gptr_flags::collective, *off);
}

void Unit::team_memfree(TeamId team, GlobalPtr p) {
  const std::size_t slot = member_slot(team);
  if (!p.is_collective() || p.segment() != static_cast<SegmentId>(team)) {
    fail(Errc::invalid_argument, "team_memfree of a pointer outside team " +
                                     std::to_string(team) + ": " + to_string(p));
  }
  auto& mem = *team_memory_[slot];
  const auto entry = mem.table.find_exact(p.offset());
  if (!entry) {
    fail(Errc::invalid_argument, "no collective allocation at " + to_string(p));
  }
  team_states_[slot]->comm.barrier();
  endpoint_.epoch_close(entry->region);
  endpoint_.region_destroy(entry->region);
  mem.table.erase(entry->offset);
  mem.pool.release(entry->offset);
}

Target Unit::dereference(const GlobalPtr& p, std::optional<TeamId> team_hint) const {
  require_init("dereference");
  return dart::dereference(p, team_hint, view());
}

std::span<std::byte> Unit::local_span(const GlobalPtr& p, std::size_t length) {
  if (p.unit() != id_) {
    fail(Errc::invalid_argument, "local_span of remote pointer " + to_string(p));
  }
  const Target t = dereference(p);
  if (length > t.extent) fail(Errc::invalid_argument, "local_span past the allocation");
  return endpoint_.local_slab(t.region).subspan(t.disp, length);
}

const TeamMemory* Unit::team_memory(TeamId team) const {
  auto slot = registry_.slot_of(team);
  if (!slot || !team_memory_[*slot]) return nullptr;
  return &*team_memory_[*slot];
}

}  // namespace dart
