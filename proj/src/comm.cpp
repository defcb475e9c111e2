#include <algorithm>

#include "dart/error.hpp"
#include "dart/runtime.hpp"

namespace dart {

// Dereference first; collective pointers pick up their unit translation
// there. Then hand the transfer to the transport as a request.
Handle Unit::put(const GlobalPtr& dest, std::span<const std::byte> src) {
  const Target t = dereference(dest);
  if (src.size() > t.extent) {
    fail(Errc::invalid_argument, "put of " + std::to_string(src.size()) +
                                     " bytes past the end of " + to_string(dest));
  }
  return Handle(endpoint_.put_nb(t.region, t.rank, t.disp, src), dest);
}

Handle Unit::get(std::span<std::byte> dest, const GlobalPtr& src) {
  const Target t = dereference(src);
  if (dest.size() > t.extent) {
    fail(Errc::invalid_argument, "get of " + std::to_string(dest.size()) +
                                     " bytes past the end of " + to_string(src));
  }
  return Handle(endpoint_.get_nb(t.region, t.rank, t.disp, dest), src);
}

void Unit::put_blocking(const GlobalPtr& dest, std::span<const std::byte> src) {
  Handle h = put(dest, src);
  wait(h);
}

void Unit::get_blocking(std::span<std::byte> dest, const GlobalPtr& src) {
  Handle h = get(dest, src);
  wait(h);
}

void Unit::wait(Handle& h) {
  if (!h.valid_) fail(Errc::invalid_argument, "wait on a consumed or empty handle");
  endpoint_.wait(h.req_);
  h.valid_ = false;
}

void Unit::waitall(std::span<Handle> hs) {
  for (const auto& h : hs) {
    if (!h.valid_) fail(Errc::invalid_argument, "waitall on a consumed or empty handle");
  }
  for (auto& h : hs) {
    endpoint_.wait(h.req_);
    h.valid_ = false;
  }
}

bool Unit::test(Handle& h) {
  if (!h.valid_) fail(Errc::invalid_argument, "test on a consumed or empty handle");
  if (!endpoint_.test(h.req_)) return false;
  h.valid_ = false;
  return true;
}

bool Unit::testall(std::span<Handle> hs) {
  bool all = true;
  for (const auto& h : hs) {
    if (!h.valid_) fail(Errc::invalid_argument, "testall on a consumed or empty handle");
  }
  for (auto& h : hs) all = endpoint_.test(h.req_) && all;
  if (all) {
    for (auto& h : hs) h.valid_ = false;
  }
  return all;
}

std::int64_t Unit::fetch_and_store(const GlobalPtr& p, std::int64_t value) {
  const Target t = dereference(p);
  return endpoint_.fetch_and_store(t.region, t.rank, t.disp, value);
}

std::int64_t Unit::compare_and_swap(const GlobalPtr& p, std::int64_t expected,
                                    std::int64_t desired) {
  const Target t = dereference(p);
  return endpoint_.compare_and_swap(t.region, t.rank, t.disp, expected, desired);
}

std::int64_t Unit::local_load64(const GlobalPtr& p) {
  if (p.unit() != id_) fail(Errc::invalid_argument, "local load of a remote pointer");
  const Target t = dereference(p);
  return endpoint_.local_load64(t.region, t.disp);
}

void Unit::local_store64(const GlobalPtr& p, std::int64_t value) {
  if (p.unit() != id_) fail(Errc::invalid_argument, "local store to a remote pointer");
  const Target t = dereference(p);
  endpoint_.local_store64(t.region, t.disp, value);
}

void Unit::barrier(TeamId team) { communicator(team).barrier(); }

void Unit::bcast(std::span<std::byte> buffer, UnitId root, TeamId team) {
  communicator(team).bcast(buffer, root);
}

void Unit::scatter(std::span<const std::byte> send, std::span<std::byte> recv,
                   UnitId root, TeamId team) {
  communicator(team).scatter(send, recv, root);
}

void Unit::gather(std::span<const std::byte> send, std::span<std::byte> recv,
                  UnitId root, TeamId team) {
  communicator(team).gather(send, recv, root);
}

}  // namespace dart
