#include "programs.hpp"

#include <cstring>
#include <iostream>
#include <mutex>
#include <vector>

#include "dart/lock.hpp"

namespace pgas {

namespace {

std::mutex io_mutex;

void say(const std::string& line) {
  std::lock_guard lk(io_mutex);
  std::cout << line << std::endl;
}

int hello(dart::Unit& unit) {
  unit.init();
  say("unit " + std::to_string(unit.myid()) + " of " + std::to_string(unit.size()));
  const int id = static_cast<int>(unit.myid());
  unit.exit();
  return id;
}

// Every unit writes its id into its right neighbour's slot of a collective
// allocation and checks what arrived from the left.
int ring(dart::Unit& unit) {
  unit.init();
  const auto n = unit.size();
  const auto me = unit.myid();
  auto mem = unit.team_memalloc_aligned(dart::kTeamAll, sizeof(std::int64_t));
  const std::int64_t value = me;
  unit.put_blocking(mem.with_unit((me + 1) % n), std::as_bytes(std::span(&value, 1)));
  unit.barrier(dart::kTeamAll);
  const std::int64_t got = unit.local_load64(mem);
  const std::int64_t want = (me + n - 1) % n;
  say("unit " + std::to_string(me) + " received " + std::to_string(got) + " from " +
      to_string(mem.with_unit(static_cast<dart::UnitId>(want))));
  unit.team_memfree(dart::kTeamAll, mem);
  unit.exit();
  return got == want ? 0 : 1;
}

// Non-atomic read-modify-write of a counter on unit 0, guarded by the lock.
int lock_counter(dart::Unit& unit) {
  constexpr int kRounds = 100;
  unit.init();
  auto lock = dart::team_lock_init(unit, dart::kTeamAll);
  auto counter = unit.team_memalloc_aligned(dart::kTeamAll, sizeof(std::int64_t));
  unit.local_store64(counter, 0);
  unit.barrier(dart::kTeamAll);
  const auto home = counter.with_unit(0);
  for (int r = 0; r < kRounds; ++r) {
    dart::lock_acquire(unit, lock);
    std::int64_t v = 0;
    unit.get_blocking(std::as_writable_bytes(std::span(&v, 1)), home);
    ++v;
    unit.put_blocking(home, std::as_bytes(std::span(&v, 1)));
    dart::lock_release(unit, lock);
  }
  unit.barrier(dart::kTeamAll);
  int status = 0;
  if (unit.myid() == 0) {
    const std::int64_t total = unit.local_load64(counter);
    const std::int64_t want = std::int64_t{kRounds} * unit.size();
    say("counter = " + std::to_string(total) + " (expected " + std::to_string(want) + ")");
    status = total == want ? 0 : 1;
  }
  unit.team_memfree(dart::kTeamAll, counter);
  dart::lock_free(unit, lock);
  unit.exit();
  return status;
}

int collectives(dart::Unit& unit) {
  unit.init();
  const auto n = unit.size();
  const auto me = unit.myid();
  std::vector<std::int32_t> all(n);
  for (std::uint32_t i = 0; i < n; ++i) all[i] = static_cast<std::int32_t>(i * 10);
  std::int32_t mine = -1;
  unit.scatter(std::as_bytes(std::span(all)), std::as_writable_bytes(std::span(&mine, 1)),
               0, dart::kTeamAll);
  std::vector<std::int32_t> back(n, -1);
  unit.gather(std::as_bytes(std::span(&mine, 1)), std::as_writable_bytes(std::span(back)),
              0, dart::kTeamAll);
  std::int32_t token = me == 0 ? 42 : 0;
  unit.bcast(std::as_writable_bytes(std::span(&token, 1)), 0, dart::kTeamAll);
  int status = (mine == static_cast<std::int32_t>(me * 10) && token == 42) ? 0 : 1;
  if (me == 0 && back != all) status = 1;
  say("unit " + std::to_string(me) + " scatter=" + std::to_string(mine) +
      " bcast=" + std::to_string(token));
  unit.exit();
  return status;
}

}  // namespace

const std::map<std::string, Builtin>& builtin_programs() {
  static const std::map<std::string, Builtin> programs = {
      {"hello", {"print each unit's id; status = id", hello}},
      {"ring", {"put to the right neighbour and verify", ring}},
      {"lock", {"lock-protected shared counter, 100 rounds per unit", lock_counter}},
      {"collectives", {"scatter, gather and bcast round trip", collectives}},
  };
  return programs;
}

}  // namespace pgas
