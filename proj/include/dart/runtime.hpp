#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dart/collective.hpp"
#include "dart/gptr.hpp"
#include "dart/group.hpp"
#include "dart/memory.hpp"
#include "dart/team.hpp"
#include "dart/transport.hpp"

namespace dart {

struct RuntimeConfig {
  std::uint32_t unit_count = 1;
  std::size_t local_pool_bytes = std::size_t{16} << 20;
  std::size_t team_pool_bytes = std::size_t{16} << 20;
  std::size_t teamlist_capacity = 256;
  bool trace = false;
  std::uint64_t seed = 0;
  /// Bound on any blocking receive; a stuck run fails instead of hanging.
  std::chrono::milliseconds timeout{std::chrono::minutes(5)};

  /// Overrides fields from PGAS_LOCAL_POOL_BYTES, PGAS_TEAM_POOL_BYTES and
  /// PGAS_TEAMLIST_CAP when set.
  static RuntimeConfig from_env();
  static RuntimeConfig from_env(RuntimeConfig base);
  /// Throws Errc::invalid_config.
  void validate() const;
};

/// Non-blocking transfer handle. Single use: a successful wait or test
/// consumes it.
class Handle {
 public:
  Handle() = default;
  bool valid() const { return valid_; }
  const GlobalPtr& gptr() const { return gptr_; }

 private:
  friend class Unit;
  Handle(transport::Request req, GlobalPtr gptr)
      : req_(req), gptr_(gptr), valid_(true) {}

  transport::Request req_{};
  GlobalPtr gptr_{};
  bool valid_ = false;
};

/// One unit's runtime context: its endpoint, team registry replica, memory
/// pools and translation tables. Confined to the unit's own thread.
class Unit {
 public:
  Unit(transport::Fabric& fabric, UnitId id, const RuntimeConfig& config);
  ~Unit();
  Unit(const Unit&) = delete;
  Unit& operator=(const Unit&) = delete;

  // -- initialization and environment --------------------------------------
  void init();
  /// Collective over all units.
  void exit();
  bool initialized() const { return state_ == State::running; }
  UnitId myid() const;
  std::uint32_t size() const;
  const RuntimeConfig& config() const { return config_; }

  // -- teams ----------------------------------------------------------------
  /// Collective over the parent's members. Returns kTeamNull at parent
  /// members outside `group`.
  TeamId team_create(TeamId parent, const Group& group);
  void team_destroy(TeamId team);
  UnitId team_myid(TeamId team) const;
  std::size_t team_size(TeamId team) const;
  Group team_get_group(TeamId team) const;
  UnitId unit_g2l(TeamId team, UnitId absolute) const;
  UnitId unit_l2g(TeamId team, UnitId relative) const;
  const TeamRegistry& registry() const { return registry_; }

  // -- global memory --------------------------------------------------------
  GlobalPtr memalloc(std::size_t size);
  void memfree(GlobalPtr p);
  GlobalPtr team_memalloc_aligned(TeamId team, std::size_t size);
  void team_memfree(TeamId team, GlobalPtr p);
  Target dereference(const GlobalPtr& p, std::optional<TeamId> team_hint = {}) const;
  /// The caller's own bytes behind `p` (p.unit() must be the caller).
  std::span<std::byte> local_span(const GlobalPtr& p, std::size_t length);
  const NonCollectivePool& local_pool() const { return *local_pool_; }
  const TeamMemory* team_memory(TeamId team) const;

  // -- one-sided communication ----------------------------------------------
  Handle put(const GlobalPtr& dest, std::span<const std::byte> src);
  Handle get(std::span<std::byte> dest, const GlobalPtr& src);
  void put_blocking(const GlobalPtr& dest, std::span<const std::byte> src);
  void get_blocking(std::span<std::byte> dest, const GlobalPtr& src);
  void wait(Handle& h);
  void waitall(std::span<Handle> hs);
  bool test(Handle& h);
  bool testall(std::span<Handle> hs);

  std::int64_t fetch_and_store(const GlobalPtr& p, std::int64_t value);
  std::int64_t compare_and_swap(const GlobalPtr& p, std::int64_t expected,
                                std::int64_t desired);
  std::int64_t local_load64(const GlobalPtr& p);
  void local_store64(const GlobalPtr& p, std::int64_t value);

  // -- collectives (roots are team-relative ids) -----------------------------
  void barrier(TeamId team);
  void bcast(std::span<std::byte> buffer, UnitId root, TeamId team);
  void scatter(std::span<const std::byte> send, std::span<std::byte> recv, UnitId root,
               TeamId team);
  void gather(std::span<const std::byte> send, std::span<std::byte> recv, UnitId root,
              TeamId team);

  const Communicator& communicator(TeamId team) const;
  /// Fresh per-team tag for lock notifications; identical at every member
  /// when called collectively.
  std::uint64_t next_lock_tag(TeamId team);

  transport::Endpoint& endpoint() { return endpoint_; }
  transport::Fabric& fabric() { return *fabric_; }

 private:
  enum class State { created, running, finished };

  struct TeamState {
    Communicator comm;
    std::uint32_t lock_seq = 0;
  };

  void require_init(const char* what) const;
  std::size_t member_slot(TeamId team) const;
  TeamState& team_state(TeamId team);
  const TeamState& team_state(TeamId team) const;
  AddressSpaceView view() const;
  void release_team_regions(std::size_t slot, bool collective);
  TeamId draw_team_id(const Communicator& parent);

  transport::Fabric* fabric_;
  transport::Endpoint endpoint_;
  UnitId id_;
  RuntimeConfig config_;
  State state_ = State::created;

  TeamRegistry registry_;
  std::vector<std::optional<TeamState>> team_states_;      // by slot
  std::vector<std::optional<TeamMemory>> team_memory_;     // by slot
  std::unordered_set<TeamId> foreign_teams_;  // created while we were outside

  std::unique_ptr<NonCollectivePool> local_pool_;
  transport::RegionId global_region_{};
  transport::RegionId control_region_{};
};

struct LaunchResult {
  std::vector<int> statuses;
  std::vector<std::string> errors;  // empty string: unit succeeded
  std::size_t leaked_regions = 0;
  std::size_t leaked_messages = 0;

  bool ok() const;
  std::string report() const;
};

using Program = std::function<int(Unit&)>;

/// Runs `program` on config.unit_count concurrent units (SPMD). Unit i gets
/// absolute id i. A failing unit aborts the run so peers blocked in
/// collectives fail fast instead of hanging.
LaunchResult launch(const RuntimeConfig& config, const Program& program,
                    transport::TraceHook trace = {});

}  // namespace dart
