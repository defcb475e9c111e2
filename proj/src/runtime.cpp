#include "dart/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "dart/error.hpp"

namespace dart {

namespace {

template <typename T>
void env_override(const char* key, T& field) {
  const char* raw = std::getenv(key);
  if (raw == nullptr || *raw == '\0') return;
  const std::string_view text(raw);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(Errc::invalid_config, std::string(key) + "=" + raw + " is not a number");
  }
  field = value;
}

std::vector<UnitId> iota_units(std::uint32_t n) {
  std::vector<UnitId> v(n);
  std::iota(v.begin(), v.end(), UnitId{0});
  return v;
}

}  // namespace

RuntimeConfig RuntimeConfig::from_env() { return from_env(RuntimeConfig{}); }

RuntimeConfig RuntimeConfig::from_env(RuntimeConfig base) {
  env_override("PGAS_LOCAL_POOL_BYTES", base.local_pool_bytes);
  env_override("PGAS_TEAM_POOL_BYTES", base.team_pool_bytes);
  env_override("PGAS_TEAMLIST_CAP", base.teamlist_capacity);
  return base;
}

void RuntimeConfig::validate() const {
  if (unit_count < 1) fail(Errc::invalid_config, "unit_count must be >= 1");
  if (local_pool_bytes < kAllocAlign) {
    fail(Errc::invalid_config, "local pool must hold at least one word");
  }
  if (team_pool_bytes < kAllocAlign) {
    fail(Errc::invalid_config, "team pool must hold at least one word");
  }
  if (teamlist_capacity < 1) fail(Errc::invalid_config, "teamlist capacity must be >= 1");
  if (timeout.count() <= 0) fail(Errc::invalid_config, "timeout must be positive");
}

Unit::Unit(transport::Fabric& fabric, UnitId id, const RuntimeConfig& config)
    : fabric_(&fabric),
      endpoint_(fabric, id),
      id_(id),
      config_(config),
      registry_(config.teamlist_capacity) {}

Unit::~Unit() {
  if (state_ != State::running) return;
  // Abnormal teardown: drop our references without synchronizing.
  try {
    for (std::size_t slot = 0; slot < team_memory_.size(); ++slot) {
      if (team_memory_[slot]) release_team_regions(slot, false);
    }
    endpoint_.region_destroy(global_region_);
    endpoint_.region_destroy(control_region_);
  } catch (const std::exception&) {
  }
}

void Unit::require_init(const char* what) const {
  if (state_ != State::running) {
    fail(Errc::not_initialized, std::string(what) + " called outside init/exit");
  }
}

void Unit::init() {
  if (state_ != State::created) fail(Errc::invalid_state, "init called twice");
  const std::uint32_t n = fabric_->ranks();
  registry_ = TeamRegistry(config_.teamlist_capacity);
  team_states_.assign(config_.teamlist_capacity, std::nullopt);
  team_memory_.assign(config_.teamlist_capacity, std::nullopt);

  auto all = iota_units(n);
  const std::size_t slot = registry_.insert(kTeamAll, kTeamNull, Group::from_sorted(all));
  team_states_[slot].emplace(TeamState{Communicator(endpoint_, all, kTeamAll)});
  team_memory_[slot].emplace(TeamMemory{TeamPool(config_.team_pool_bytes), {}});

  local_pool_ = std::make_unique<NonCollectivePool>(config_.local_pool_bytes);
  const auto tag = transport::make_tag(transport::Channel::region, kTeamAll, 0);
  global_region_ = endpoint_.region_create(all, config_.local_pool_bytes, tag);
  endpoint_.epoch_open(global_region_);
  // One word per unit; unit 0's word is the run-wide team id counter.
  control_region_ = endpoint_.region_create(all, 8, tag);
  endpoint_.epoch_open(control_region_);

  state_ = State::running;
  team_states_[slot]->comm.barrier();
}

void Unit::exit() {
  require_init("exit");
  const auto& world = team_state(kTeamAll).comm;
  world.barrier();
  for (std::size_t slot = 0; slot < team_memory_.size(); ++slot) {
    if (team_memory_[slot]) release_team_regions(slot, false);
  }
  endpoint_.region_destroy(global_region_);
  endpoint_.region_destroy(control_region_);
  world.barrier();
  team_states_.clear();
  team_memory_.clear();
  local_pool_.reset();
  state_ = State::finished;
}

UnitId Unit::myid() const {
  require_init("myid");
  return id_;
}

std::uint32_t Unit::size() const {
  require_init("size");
  return fabric_->ranks();
}

AddressSpaceView Unit::view() const {
  return AddressSpaceView{id_,
                          fabric_->ranks(),
                          global_region_,
                          config_.local_pool_bytes,
                          local_pool_.get(),
                          &registry_,
                          std::span<const std::optional<TeamMemory>>(team_memory_)};
}

void Unit::release_team_regions(std::size_t slot, bool collective) {
  auto& mem = *team_memory_[slot];
  if (collective) team_states_[slot]->comm.barrier();
  for (const auto& e : mem.table.entries()) {
    endpoint_.region_destroy(e.region);
  }
  mem = TeamMemory{TeamPool(mem.pool.capacity()), {}};
}

bool LaunchResult::ok() const {
  for (const auto& e : errors) {
    if (!e.empty()) return false;
  }
  return leaked_regions == 0 && leaked_messages == 0;
}

std::string LaunchResult::report() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < statuses.size(); ++i) {
    os << "unit " << i << ": status " << statuses[i];
    if (!errors[i].empty()) os << " error: " << errors[i];
    os << "\n";
  }
  if (leaked_regions) os << "leaked regions: " << leaked_regions << "\n";
  if (leaked_messages) os << "undelivered messages: " << leaked_messages << "\n";
  return os.str();
}

LaunchResult launch(const RuntimeConfig& config, const Program& program,
                    transport::TraceHook trace) {
  config.validate();
  transport::Fabric::Options opts;
  opts.recv_timeout = config.timeout;
  transport::Fabric fabric(config.unit_count, opts);

  std::mutex trace_mutex;
  if (trace) {
    fabric.set_trace(std::move(trace));
  } else if (config.trace) {
    fabric.set_trace([&trace_mutex](const transport::TraceEvent& ev) {
      std::lock_guard lk(trace_mutex);
      std::cerr << "[trace] #" << ev.seq << " " << transport::to_string(ev.kind)
                << " " << ev.source << "->" << ev.target << " region " << ev.region
                << " disp " << ev.disp << " bytes " << ev.bytes << "\n";
    });
  }

  LaunchResult result;
  result.statuses.assign(config.unit_count, -1);
  result.errors.assign(config.unit_count, {});

  std::vector<std::thread> threads;
  threads.reserve(config.unit_count);
  for (std::uint32_t i = 0; i < config.unit_count; ++i) {
    threads.emplace_back([&, i] {
      try {
        Unit unit(fabric, i, config);
        result.statuses[i] = program(unit);
      } catch (const std::exception& e) {
        result.errors[i] = e.what();
        fabric.abort("unit " + std::to_string(i) + " failed: " + e.what());
      } catch (...) {
        result.errors[i] = "unknown exception";
        fabric.abort("unit " + std::to_string(i) + " failed");
      }
    });
  }
  for (auto& t : threads) t.join();

  result.leaked_regions = fabric.live_regions();
  result.leaked_messages = fabric.queued_messages();
  return result;
}

}  // namespace dart
