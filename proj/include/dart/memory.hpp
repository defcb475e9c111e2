#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dart/gptr.hpp"
#include "dart/team.hpp"
#include "dart/transport.hpp"

namespace dart {

inline constexpr std::size_t kAllocAlign = 8;

constexpr std::size_t align_up(std::size_t n, std::size_t a = kAllocAlign) {
  return (n + a - 1) / a * a;
}

/// First-fit free list with coalescing over one unit's partition of the
/// pre-reserved non-collective segment.
class NonCollectivePool {
 public:
  explicit NonCollectivePool(std::size_t capacity);

  /// Offset of a fresh block, or nullopt if no free range fits.
  std::optional<std::uint64_t> allocate(std::size_t size);
  /// Throws Errc::invalid_argument for unknown or already freed offsets.
  void release(std::uint64_t offset);

  bool is_live(std::uint64_t offset) const { return live_.contains(offset); }
  std::optional<std::size_t> block_size(std::uint64_t offset) const;
  std::size_t capacity() const { return capacity_; }
  std::size_t bytes_in_use() const { return in_use_; }
  std::size_t live_blocks() const { return live_.size(); }
  const std::map<std::uint64_t, std::size_t>& free_ranges() const { return free_; }

 private:
  std::size_t capacity_;
  std::size_t in_use_ = 0;
  std::map<std::uint64_t, std::size_t> free_;  // offset -> length
  std::map<std::uint64_t, std::size_t> live_;
};

/// Per-team collective pool: bump placement, reclaimed in stack order.
/// Every member replays the same allocation sequence, so offsets agree.
class TeamPool {
 public:
  explicit TeamPool(std::size_t capacity);

  std::optional<std::uint64_t> allocate(std::size_t size);
  /// Pops the freed block if it is the most recent one (and any tombstones
  /// beneath it); otherwise tombstones it.
  void release(std::uint64_t offset);

  std::size_t capacity() const { return capacity_; }
  std::uint64_t bump_offset() const { return bump_; }
  std::size_t tombstones() const;

 private:
  struct Block {
    std::uint64_t offset;
    std::size_t size;
    bool live;
  };
  std::size_t capacity_;
  std::uint64_t bump_ = 0;
  std::vector<Block> stack_;
};

/// Translation table: pool offset -> the region backing that allocation.
class SegmentTable {
 public:
  struct Entry {
    std::uint64_t offset;
    std::size_t size;
    transport::RegionId region;
  };

  void insert(std::uint64_t offset, std::size_t size, transport::RegionId region);
  void erase(std::uint64_t offset);
  /// Entry whose [offset, offset+size) contains `offset`.
  std::optional<Entry> lookup(std::uint64_t offset) const;
  std::optional<Entry> find_exact(std::uint64_t offset) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<Entry> entries() const;

 private:
  std::map<std::uint64_t, Entry> entries_;
};

struct TeamMemory {
  TeamPool pool;
  SegmentTable table;
};

/// Where a global pointer lands in the transport.
struct Target {
  transport::RegionId region;
  transport::Rank rank;  // index within the region's participants
  std::uint64_t disp;
  std::uint64_t extent;  // bytes addressable from disp
};

/// Everything dereference needs from the calling unit.
struct AddressSpaceView {
  UnitId self;
  std::uint32_t unit_count;
  transport::RegionId global_region;
  std::size_t local_pool_bytes;
  const NonCollectivePool* own_pool;  // liveness of the caller's own blocks
  const TeamRegistry* registry;
  std::span<const std::optional<TeamMemory>> team_memory;  // by teamlist slot
};

/// Resolves a pointer to (region, rank, displacement). Non-collective
/// pointers map straight to the global region at rank = unit; collective
/// pointers go through the team's table and absolute-to-relative
/// translation. Throws Errc::invalid_pointer.
Target dereference(const GlobalPtr& p, std::optional<TeamId> team_hint,
                   const AddressSpaceView& view);

}  // namespace dart
