#include "dart/memory.hpp"

#include <algorithm>
#include <iterator>

#include "dart/error.hpp"

namespace dart {

NonCollectivePool::NonCollectivePool(std::size_t capacity) : capacity_(capacity) {
  if (capacity > 0) free_.emplace(0, capacity);
}

std::optional<std::uint64_t> NonCollectivePool::allocate(std::size_t size) {
  if (size == 0) fail(Errc::invalid_argument, "zero-size allocation");
  const std::size_t need = align_up(size);
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < need) continue;
    const std::uint64_t off = it->first;
    const std::size_t rest = it->second - need;
    free_.erase(it);
    if (rest > 0) free_.emplace(off + need, rest);
    live_.emplace(off, need);
    in_use_ += need;
    return off;
  }
  return std::nullopt;
}

void NonCollectivePool::release(std::uint64_t offset) {
  auto it = live_.find(offset);
  if (it == live_.end()) {
    fail(Errc::invalid_argument,
         "offset " + std::to_string(offset) + " is not a live allocation");
  }
  std::uint64_t off = it->first;
  std::size_t len = it->second;
  in_use_ -= len;
  live_.erase(it);

  auto next = free_.lower_bound(off);
  if (next != free_.end() && off + len == next->first) {
    len += next->second;
    next = free_.erase(next);
  }
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == off) {
      prev->second += len;
      return;
    }
  }
  free_.emplace(off, len);
}

std::optional<std::size_t> NonCollectivePool::block_size(std::uint64_t offset) const {
  auto it = live_.find(offset);
  if (it == live_.end()) return std::nullopt;
  return it->second;
}

TeamPool::TeamPool(std::size_t capacity) : capacity_(capacity) {}

std::optional<std::uint64_t> TeamPool::allocate(std::size_t size) {
  if (size == 0) fail(Errc::invalid_argument, "zero-size allocation");
  const std::size_t need = align_up(size);
  if (need > capacity_ - bump_) return std::nullopt;
  const std::uint64_t off = bump_;
  bump_ += need;
  stack_.push_back({off, need, true});
  return off;
}

void TeamPool::release(std::uint64_t offset) {
  auto it = std::find_if(stack_.begin(), stack_.end(), [&](const Block& b) {
    return b.offset == offset && b.live;
  });
  if (it == stack_.end()) {
    fail(Errc::invalid_argument,
         "offset " + std::to_string(offset) + " is not a live team allocation");
  }
  it->live = false;
  while (!stack_.empty() && !stack_.back().live) {
    bump_ = stack_.back().offset;
    stack_.pop_back();
  }
}

std::size_t TeamPool::tombstones() const {
  return static_cast<std::size_t>(std::count_if(
      stack_.begin(), stack_.end(), [](const Block& b) { return !b.live; }));
}

void SegmentTable::insert(std::uint64_t offset, std::size_t size,
                          transport::RegionId region) {
  if (size == 0) fail(Errc::invalid_argument, "empty segment");
  auto next = entries_.lower_bound(offset);
  if (next != entries_.end() && next->first < offset + size) {
    fail(Errc::invalid_state, "segment overlaps a later entry");
  }
  if (next != entries_.begin()) {
    const auto& prev = std::prev(next)->second;
    if (prev.offset + prev.size > offset) {
      fail(Errc::invalid_state, "segment overlaps an earlier entry");
    }
  }
  entries_.emplace(offset, Entry{offset, size, region});
}

void SegmentTable::erase(std::uint64_t offset) {
  if (entries_.erase(offset) == 0) {
    fail(Errc::invalid_argument, "no segment at offset " + std::to_string(offset));
  }
}

std::optional<SegmentTable::Entry> SegmentTable::lookup(std::uint64_t offset) const {
  auto it = entries_.upper_bound(offset);
  if (it == entries_.begin()) return std::nullopt;
  const Entry& e = std::prev(it)->second;
  if (offset - e.offset >= e.size) return std::nullopt;
  return e;
}

std::optional<SegmentTable::Entry> SegmentTable::find_exact(std::uint64_t offset) const {
  auto it = entries_.find(offset);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<SegmentTable::Entry> SegmentTable::entries() const {
  std::vector<Entry> out;
  out.reserve(entries_.size());
  for (const auto& [off, e] : entries_) out.push_back(e);
  return out;
}

Target dereference(const GlobalPtr& p, std::optional<TeamId> team_hint,
                   const AddressSpaceView& view) {
  if ((p.flags() & ~gptr_flags::defined) != 0) {
    fail(Errc::invalid_pointer, "reserved flag bits set in " + to_string(p));
  }

  if (!p.is_collective()) {
    if (p.segment() != kNonCollectiveSegment) {
      fail(Errc::invalid_pointer, "non-collective pointer with team segment: " +
                                      to_string(p));
    }
    if (p.unit() >= view.unit_count) {
      fail(Errc::invalid_pointer, "unit out of range: " + to_string(p));
    }
    if (p.offset() >= view.local_pool_bytes) {
      fail(Errc::invalid_pointer, "offset outside the global segment: " + to_string(p));
    }
    // Only the owner holds allocation metadata; remote blocks are trusted.
    if (p.unit() == view.self && view.own_pool != nullptr) {
      bool covered = false;
      const auto& free = view.own_pool->free_ranges();
      auto it = free.upper_bound(p.offset());
      if (it != free.begin()) {
        auto prev = std::prev(it);
        covered = p.offset() - prev->first < prev->second;
      }
      if (covered) {
        fail(Errc::invalid_pointer, "pointer into freed memory: " + to_string(p));
      }
    }
    return Target{view.global_region, p.unit(), p.offset(),
                  view.local_pool_bytes - p.offset()};
  }

  const TeamId team = static_cast<TeamId>(p.segment());
  if (team_hint && *team_hint != team) {
    fail(Errc::invalid_pointer, "pointer segment does not match team " +
                                    std::to_string(*team_hint));
  }
  const auto slot = view.registry->slot_of(team);
  if (!slot || *slot >= view.team_memory.size() || !view.team_memory[*slot]) {
    fail(Errc::invalid_pointer, "dead or foreign segment: " + to_string(p));
  }
  const auto& rec = view.registry->at_slot(*slot);
  const auto rel = rec.group.index_of(p.unit());
  if (!rel) {
    fail(Errc::invalid_pointer, "unit not in team " + std::to_string(team) + ": " +
                                    to_string(p));
  }
  const auto entry = view.team_memory[*slot]->table.lookup(p.offset());
  if (!entry) {
    fail(Errc::invalid_pointer, "offset outside any allocation: " + to_string(p));
  }
  const std::uint64_t disp = p.offset() - entry->offset;
  return Target{entry->region, static_cast<transport::Rank>(*rel), disp,
                entry->size - disp};
}

}  // namespace dart
