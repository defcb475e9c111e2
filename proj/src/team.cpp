#include "dart/team.hpp"

#include <algorithm>
#include <sstream>

#include "dart/error.hpp"

namespace dart {

TeamRegistry::TeamRegistry(std::size_t capacity)
    : teamlist_(capacity, kEmptySlot), teams_(capacity) {
  if (capacity == 0) fail(Errc::invalid_config, "teamlist capacity must be > 0");
}

std::size_t TeamRegistry::live_count() const {
  return static_cast<std::size_t>(
      std::count_if(teamlist_.begin(), teamlist_.end(),
                    [](std::int64_t v) { return v != kEmptySlot; }));
}

bool TeamRegistry::has_free_slot() const {
  return std::find(teamlist_.begin(), teamlist_.end(), kEmptySlot) !=
         teamlist_.end();
}

std::size_t TeamRegistry::insert(TeamId id, TeamId parent, Group group) {
  if (id < 0) fail(Errc::invalid_argument, "negative team id");
  if (issued_.contains(id)) {
    fail(Errc::invalid_argument, "team id " + std::to_string(id) + " reused");
  }
  for (std::size_t slot = 0; slot < teamlist_.size(); ++slot) {
    if (teamlist_[slot] != kEmptySlot) continue;
    teamlist_[slot] = id;
    teams_[slot] = TeamRecord{id, parent, std::move(group)};
    issued_.insert(id);
    max_issued_ = std::max(max_issued_, id);
    return slot;
  }
  fail(Errc::resource_exhausted,
       "teamlist full (" + std::to_string(teamlist_.size()) + " slots)");
}

void TeamRegistry::erase(TeamId id) {
  auto slot = slot_of(id);
  if (!slot) fail(Errc::invalid_argument, "unknown team " + std::to_string(id));
  teamlist_[*slot] = kEmptySlot;
  teams_[*slot] = TeamRecord{};
}

std::optional<std::size_t> TeamRegistry::slot_of(TeamId id) const {
  if (id < 0) return std::nullopt;
  auto it = std::find(teamlist_.begin(), teamlist_.end(), std::int64_t{id});
  if (it == teamlist_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - teamlist_.begin());
}

const TeamRecord* TeamRegistry::find(TeamId id) const {
  auto slot = slot_of(id);
  return slot ? &teams_[*slot] : nullptr;
}

const TeamRecord& TeamRegistry::at_slot(std::size_t slot) const {
  if (slot >= teamlist_.size() || teamlist_[slot] == kEmptySlot) {
    fail(Errc::invalid_argument, "empty teamlist slot " + std::to_string(slot));
  }
  return teams_[slot];
}

std::string TeamRegistry::dump() const {
  std::ostringstream os;
  for (std::size_t slot = 0; slot < teamlist_.size(); ++slot) {
    if (teamlist_[slot] == kEmptySlot) continue;
    const auto& t = teams_[slot];
    os << "slot " << slot << ": team " << t.id << " parent " << t.parent
       << " group " << to_string(t.group) << "\n";
  }
  return os.str();
}

}  // namespace dart
