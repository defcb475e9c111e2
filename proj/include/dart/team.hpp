#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "dart/group.hpp"

namespace dart {

using TeamId = std::int32_t;

inline constexpr TeamId kTeamAll = 0;
inline constexpr TeamId kTeamNull = -1;
/// Team ids double as collective segment ids, so they must fit below the
/// non-collective sentinel.
inline constexpr TeamId kMaxTeamId = kNonCollectiveSegment - 1;

struct TeamRecord {
  TeamId id = kTeamNull;
  TeamId parent = kTeamNull;
  Group group;
};

/// Per-unit team bookkeeping: a fixed-capacity `teamlist` of team ids with -1
/// marking empty slots, and a parallel `teams` array of records. A team's
/// slot index keys every other per-team structure on this unit.
class TeamRegistry {
 public:
  static constexpr std::int64_t kEmptySlot = -1;

  explicit TeamRegistry(std::size_t capacity = 256);

  std::size_t capacity() const { return teamlist_.size(); }
  std::size_t live_count() const;
  bool has_free_slot() const;

  /// First empty slot by linear scan; throws Errc::resource_exhausted when
  /// none is left and Errc::invalid_argument if `id` was ever used before.
  std::size_t insert(TeamId id, TeamId parent, Group group);
  /// Resets the slot to -1. The id stays retired.
  void erase(TeamId id);

  std::optional<std::size_t> slot_of(TeamId id) const;
  const TeamRecord* find(TeamId id) const;
  const TeamRecord& at_slot(std::size_t slot) const;
  std::int64_t slot_value(std::size_t slot) const { return teamlist_.at(slot); }

  /// Ids this unit has seen through team_create, live or not.
  bool was_issued(TeamId id) const { return issued_.contains(id); }
  /// Largest id ever inserted, or -1.
  TeamId max_issued() const { return max_issued_; }

  std::string dump() const;

 private:
  std::vector<std::int64_t> teamlist_;
  std::vector<TeamRecord> teams_;
  std::unordered_set<TeamId> issued_;
  TeamId max_issued_ = kTeamNull;
};

}  // namespace dart
