#include "dart/lock.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "dart/error.hpp"
#include "dart/runtime.hpp"

namespace dart {

namespace {

using transport::OpKind;

void trace_lock(Unit& unit, const LockRecord& lock, OpKind kind, std::int64_t other) {
  auto& fabric = unit.fabric();
  if (!fabric.tracing()) return;
  transport::TraceEvent ev{};
  ev.kind = kind;
  ev.source = unit.myid();
  ev.target = lock.tail.unit();
  ev.start_ns = ev.end_ns = transport::Fabric::now_ns();
  ev.operand = static_cast<std::int64_t>(lock.tag);
  ev.result = other;
  fabric.emit(ev);
}

void check_usable(const LockRecord& lock) {
  if (lock.freed) fail(Errc::invalid_pointer, "lock has been freed");
  if (lock.team == kTeamNull) fail(Errc::invalid_argument, "uninitialized lock");
}

// Exponential backoff from 1us, capped; yields instead of sleeping while the
// delay is below the scheduler's sleep granularity.
class Backoff {
 public:
  void pause() {
    if (delay_ < std::chrono::microseconds(50)) {
      const auto until = std::chrono::steady_clock::now() + delay_;
      do {
        std::this_thread::yield();
      } while (std::chrono::steady_clock::now() < until);
    } else {
      std::this_thread::sleep_for(delay_);
    }
    delay_ = std::min(delay_ * 2, std::chrono::microseconds(1000));
  }

 private:
  std::chrono::microseconds delay_{1};
};

}  // namespace

LockRecord team_lock_init(Unit& unit, TeamId team) {
  if (!unit.initialized()) fail(Errc::not_initialized, "team_lock_init");
  const Communicator& comm = unit.communicator(team);

  LockRecord lock;
  lock.team = team;
  lock.tag = unit.next_lock_tag(team);

  auto tail_bytes = GlobalPtr{}.to_bytes();
  if (comm.rank() == 0) {
    lock.tail = unit.memalloc(sizeof(std::int64_t));
    unit.local_store64(lock.tail, kNoUnit);
    tail_bytes = lock.tail.to_bytes();
  }
  comm.bcast(tail_bytes, 0);
  lock.tail = GlobalPtr::from_bytes(tail_bytes);

  lock.list = unit.team_memalloc_aligned(team, sizeof(std::int64_t));
  unit.local_store64(lock.list, kNoUnit);
  comm.barrier();
  return lock;
}

void lock_acquire(Unit& unit, LockRecord& lock) {
  check_usable(lock);
  // Both pointers must still resolve before we touch the queue.
  unit.dereference(lock.tail);
  unit.dereference(lock.list, lock.team);
  if (lock.held) fail(Errc::invalid_state, "lock is already held by this unit");

  const auto me = static_cast<std::int64_t>(unit.myid());
  trace_lock(unit, lock, OpKind::lock_acquire_start, kNoUnit);
  const std::int64_t prev = unit.fetch_and_store(lock.tail, me);
  if (prev != kNoUnit) {
    trace_lock(unit, lock, OpKind::lock_queued, prev);
    const auto pred_cell = lock.list.with_unit(static_cast<UnitId>(prev));
    unit.put_blocking(pred_cell, std::as_bytes(std::span(&me, 1)));
    unit.endpoint().notify_recv(static_cast<transport::Rank>(prev), lock.tag);
  }
  lock.held = true;
  trace_lock(unit, lock, OpKind::lock_acquired, prev);
}

void lock_release(Unit& unit, LockRecord& lock) {
  check_usable(lock);
  if (!lock.held) fail(Errc::invalid_state, "release of a lock this unit does not hold");

  const auto me = static_cast<std::int64_t>(unit.myid());
  const std::int64_t observed = unit.compare_and_swap(lock.tail, me, kNoUnit);
  std::int64_t successor = kNoUnit;
  if (observed != me) {
    // Someone swapped in behind us; wait for them to link into our cell.
    Backoff backoff;
    while ((successor = unit.local_load64(lock.list)) == kNoUnit) {
      if (unit.fabric().aborted()) fail(Errc::aborted, unit.fabric().abort_reason());
      backoff.pause();
    }
    unit.local_store64(lock.list, kNoUnit);
    unit.endpoint().notify_send(static_cast<transport::Rank>(successor), lock.tag);
  }
  lock.held = false;
  trace_lock(unit, lock, OpKind::lock_released, successor);
}

void lock_free(Unit& unit, LockRecord& lock) {
  check_usable(lock);
  if (lock.held) fail(Errc::invalid_state, "lock_free while holding the lock");
  const Communicator& comm = unit.communicator(lock.team);
  unit.team_memfree(lock.team, lock.list);
  if (comm.rank() == 0) unit.memfree(lock.tail);
  comm.barrier();
  lock.freed = true;
}

}  // namespace dart
