#pragma once

#include <cstdint>

#include "dart/gptr.hpp"
#include "dart/team.hpp"

namespace dart {

class Unit;

/// Value stored in the tail and in list cells when they point nowhere.
inline constexpr std::int64_t kNoUnit = -1;

/// One unit's handle on a team-wide MCS queuing lock.
///
/// `tail` is a single word allocated with memalloc on the team's relative
/// unit 0 and holds the absolute id of the last queued unit. `list` is a
/// collective allocation of one word per member; a member's word holds the
/// absolute id of its successor in the queue. Both are -1 when idle.
struct LockRecord {
  TeamId team = kTeamNull;
  GlobalPtr tail;
  GlobalPtr list;  // unit field: this unit
  std::uint64_t tag = 0;
  bool held = false;
  bool freed = false;
};

/// Collective over `team`. Several locks per team are independent.
LockRecord team_lock_init(Unit& unit, TeamId team);

/// Swap ourselves into the tail; if someone was there, link into their list
/// cell and wait for their hand-off notification.
void lock_acquire(Unit& unit, LockRecord& lock);

/// Compare-and-swap the tail back to -1 if we are still last; otherwise wait
/// until the successor has linked itself, then notify it.
void lock_release(Unit& unit, LockRecord& lock);

/// Collective; the lock must not be held by the caller.
void lock_free(Unit& unit, LockRecord& lock);

}  // namespace dart
