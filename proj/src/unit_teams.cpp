#include <cstring>

#include "dart/error.hpp"
#include "dart/runtime.hpp"

namespace dart {

std::size_t Unit::member_slot(TeamId team) const {
  require_init("team operation");
  if (auto slot = registry_.slot_of(team)) return *slot;
  if (foreign_teams_.contains(team)) {
    fail(Errc::not_a_member, "unit " + std::to_string(id_) + " is not in team " +
                                 std::to_string(team));
  }
  fail(Errc::invalid_argument, "unknown team " + std::to_string(team));
}

Unit::TeamState& Unit::team_state(TeamId team) {
  return *team_states_[member_slot(team)];
}

const Unit::TeamState& Unit::team_state(TeamId team) const {
  return *team_states_[member_slot(team)];
}

const Communicator& Unit::communicator(TeamId team) const {
  return team_state(team).comm;
}

// The parent's root bumps a counter word on unit 0 with compare-and-swap, so
// ids grow monotonically across the whole run and are never handed out twice.
TeamId Unit::draw_team_id(const Communicator& parent) {
  std::int64_t id = 0;
  if (parent.rank() == 0) {
    std::int64_t cur = endpoint_.compare_and_swap(control_region_, 0, 0, 0, 0);
    for (;;) {
      const std::int64_t seen =
          endpoint_.compare_and_swap(control_region_, 0, 0, cur, cur + 1);
      if (seen == cur) break;
      cur = seen;
    }
    id = cur + 1;
  }
  parent.bcast(std::as_writable_bytes(std::span(&id, 1)), 0);
  return static_cast<TeamId>(id);
}

TeamId Unit::team_create(TeamId parent, const Group& group) {
  const std::size_t parent_slot = member_slot(parent);
  const Group parent_group = registry_.at_slot(parent_slot).group;
  const Communicator& pcomm = team_states_[parent_slot]->comm;
  if (group.empty()) fail(Errc::invalid_argument, "team_create with an empty group");
  if (!group.is_subset_of(parent_group)) {
    fail(Errc::invalid_argument,
         "group " + to_string(group) + " is not a subset of team " +
             std::to_string(parent));
  }

  const bool member = group.ismember(id_);
  if (!pcomm.all_agree(!member || registry_.has_free_slot())) {
    fail(Errc::resource_exhausted, "teamlist full at some member");
  }
  const TeamId id = draw_team_id(pcomm);
  if (id > kMaxTeamId) {
    fail(Errc::resource_exhausted, "team id space exhausted");
  }

  if (member) {
    const std::size_t slot = registry_.insert(id, parent, group);
    team_states_[slot].emplace(
        TeamState{Communicator(endpoint_, group.members(), static_cast<std::uint32_t>(id))});
    team_memory_[slot].emplace(TeamMemory{TeamPool(config_.team_pool_bytes), {}});
  } else {
    foreign_teams_.insert(id);
  }
  pcomm.barrier();
  return member ? id : kTeamNull;
}

void Unit::team_destroy(TeamId team) {
  require_init("team_destroy");
  if (team == kTeamAll) fail(Errc::invalid_argument, "the default team cannot be destroyed");
  const std::size_t slot = member_slot(team);
  release_team_regions(slot, true);
  registry_.erase(team);
  team_states_[slot].reset();
  team_memory_[slot].reset();
}

UnitId Unit::team_myid(TeamId team) const { return team_state(team).comm.rank(); }

std::size_t Unit::team_size(TeamId team) const { return team_state(team).comm.size(); }

Group Unit::team_get_group(TeamId team) const {
  return registry_.at_slot(member_slot(team)).group;
}

UnitId Unit::unit_g2l(TeamId team, UnitId absolute) const {
  const auto& g = registry_.at_slot(member_slot(team)).group;
  auto idx = g.index_of(absolute);
  if (!idx) {
    fail(Errc::invalid_argument, "unit " + std::to_string(absolute) +
                                     " is not in team " + std::to_string(team));
  }
  return static_cast<UnitId>(*idx);
}

UnitId Unit::unit_l2g(TeamId team, UnitId relative) const {
  const auto& g = registry_.at_slot(member_slot(team)).group;
  if (relative >= g.size()) {
    fail(Errc::invalid_argument, "relative id " + std::to_string(relative) +
                                     " out of range for team " + std::to_string(team));
  }
  return g.at(relative);
}

std::uint64_t Unit::next_lock_tag(TeamId team) {
  auto& st = team_state(team);
  return transport::make_tag(transport::Channel::lock, static_cast<std::uint32_t>(team),
                             ++st.lock_seq);
}

}  // namespace dart
