#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "dart/transport.hpp"
#include "support.hpp"

using namespace dart;
using namespace dart::transport;
using support::throws_errc;

namespace {

constexpr std::uint64_t kTag = make_tag(Channel::user, 0, 1);
constexpr std::uint64_t kRegionTag = make_tag(Channel::region, 0, 0);

// One thread per rank; any exception is reported and aborts the fabric.
template <typename F>
std::string on_ranks(Fabric& fabric, F&& fn) {
  std::vector<std::thread> threads;
  std::vector<std::string> errors(fabric.ranks());
  for (Rank r = 0; r < fabric.ranks(); ++r) {
    threads.emplace_back([&, r] {
      try {
        Endpoint ep(fabric, r);
        fn(ep);
      } catch (const std::exception& e) {
        errors[r] = e.what();
        fabric.abort(e.what());
      } catch (...) {
        errors[r] = "assertion failed";
        fabric.abort("assertion failed");
      }
    });
  }
  for (auto& t : threads) t.join();
  std::string all;
  for (Rank r = 0; r < errors.size(); ++r) {
    if (!errors[r].empty()) all += "rank " + std::to_string(r) + ": " + errors[r] + "\n";
  }
  return all;
}

std::vector<Rank> all_ranks(Rank n) {
  std::vector<Rank> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

std::span<const std::byte> bytes_of(const std::int64_t& v) { return std::as_bytes(std::span(&v, 1)); }

}  // namespace

TEST_CASE("make_tag packs channel, context and sub-tag") {
  CHECK(make_tag(Channel::lock, 0, 0) == 0x0300000000000000ull);
  CHECK(make_tag(Channel::user, 7, 0x1234567) == ((4ull << 56) | (7ull << 24) | 0x234567));
}

TEST_CASE("epoch rules") {
  Fabric fabric(1);
  Endpoint ep(fabric, 0);
  const Rank me = 0;
  const auto r = ep.region_create(std::span(&me, 1), 64, kRegionTag);
  const std::int64_t v = 42;
  CHECK(throws_errc(Errc::epoch_violation, [&] { ep.put_nb(r, 0, 0, bytes_of(v)); }));
  ep.epoch_open(r);
  CHECK(ep.epoch_is_open(r));
  ep.wait(ep.put_nb(r, 0, 0, bytes_of(v)));
  ep.epoch_close(r);
  CHECK(throws_errc(Errc::epoch_violation, [&] { ep.put_nb(r, 0, 0, bytes_of(v)); }));
  CHECK(throws_errc(Errc::epoch_violation, [&] { ep.fetch_and_store(r, 0, 0, 1); }));
  CHECK(ep.local_load64(r, 0) == 42);
  ep.region_destroy(r);
  CHECK(fabric.live_regions() == 0);
  CHECK(throws_errc(Errc::invalid_argument, [&] { ep.epoch_open(r); }));
}

TEST_CASE("range, alignment and ownership errors") {
  Fabric fabric(2);
  auto err = on_ranks(fabric, [](Endpoint& ep) {
    const auto parts = all_ranks(2);
    const auto r = ep.region_create(parts, 64, kRegionTag);
    ep.epoch_open(r);
    std::vector<std::byte> buf(65);
    REQUIRE(throws_errc(Errc::invalid_argument, [&] { ep.put_nb(r, 1, 0, buf); }));
    REQUIRE(throws_errc(Errc::invalid_argument,
                        [&] { ep.get_nb(r, 1, 60, std::span(buf).first(8)); }));
    REQUIRE(throws_errc(Errc::invalid_argument,
                        [&] { ep.put_nb(r, 2, 0, std::span(buf).first(8)); }));
    REQUIRE(throws_errc(Errc::invalid_argument, [&] { ep.fetch_and_store(r, 0, 4, 1); }));
    REQUIRE(throws_errc(Errc::invalid_argument, [&] { ep.compare_and_swap(r, 0, 12, 0, 1); }));
    REQUIRE(throws_errc(Errc::invalid_argument, [&] { ep.compare_and_swap(r, 0, 64, 0, 1); }));
    REQUIRE(throws_errc(Errc::invalid_argument,
                        [&] { ep.wait(Request{12345, 1 - ep.rank()}); }));
    // Zero-length transfers are complete on issue.
    const auto z = ep.put_nb(r, 1, 64, std::span(buf).first(0));
    REQUIRE(ep.test(z));
    ep.wait(z);
    ep.epoch_close(r);
    ep.region_destroy(r);
  });
  CHECK_MESSAGE(err.empty(), err);
  CHECK(fabric.live_regions() == 0);
}

TEST_CASE("put, wait, remote get round trip and request semantics") {
  Fabric fabric(2, Fabric::Options{std::chrono::seconds(30), 4096});
  auto err = on_ranks(fabric, [&](Endpoint& ep) {
    const auto parts = all_ranks(2);
    const auto r = ep.region_create(parts, 1 << 16, kRegionTag);
    ep.epoch_open(r);
    if (ep.rank() == 0) {
      std::vector<std::byte> src(1 << 16);
      for (std::size_t i = 0; i < src.size(); ++i) src[i] = std::byte(i * 31 + 7);
      const auto req = ep.put_nb(r, 1, 0, src);
      // 64 KiB moves in 4 KiB steps: test is false until the last chunk lands.
      int polls = 1;
      while (!ep.test(req)) ++polls;
      CHECK(polls == 16);
      CHECK(ep.test(req));  // sticky
      ep.wait(req);         // already complete
      CHECK(ep.pending() == 0);
      ep.notify_send(1, kTag);
    } else {
      ep.notify_recv(0, kTag);
      std::vector<std::byte> back(1 << 16);
      ep.wait(ep.get_nb(r, 1, 0, back));
      bool same = true;
      for (std::size_t i = 0; i < back.size(); ++i) same &= back[i] == std::byte(i * 31 + 7);
      CHECK(same);
      auto slab = ep.local_slab(r);
      CHECK(std::memcmp(slab.data(), back.data(), back.size()) == 0);
    }
    ep.epoch_close(r);
    ep.region_destroy(r);
  });
  CHECK_MESSAGE(err.empty(), err);
}

TEST_CASE("waitall equals individual waits in any order") {
  Fabric fabric(1, Fabric::Options{std::chrono::seconds(30), 64});
  Endpoint ep(fabric, 0);
  const Rank me = 0;
  const auto r = ep.region_create(std::span(&me, 1), 4096, kRegionTag);
  ep.epoch_open(r);
  std::vector<std::byte> src(4096);
  std::mt19937 rng(3);
  for (auto& b : src) b = std::byte(rng());
  std::vector<Request> reqs;
  for (std::size_t i = 0; i < 16; ++i) {
    reqs.push_back(ep.put_nb(r, 0, i * 256, std::span(src).subspan(i * 256, 256)));
  }
  std::vector<Request> half(reqs.begin(), reqs.begin() + 8);
  std::shuffle(half.begin(), half.end(), rng);
  for (const auto& q : half) ep.wait(q);
  ep.wait(std::span(reqs).subspan(8));
  CHECK(ep.pending() == 0);
  CHECK(std::memcmp(ep.local_slab(r).data(), src.data(), src.size()) == 0);
  CHECK(ep.testall(reqs));
  ep.epoch_close(r);
  ep.region_destroy(r);
}

TEST_CASE("two regions interleave independently") {
  constexpr Rank kN = 3;
  Fabric fabric(kN);
  struct Write {
    int region;
    Rank target;
    std::uint64_t disp;
    std::int64_t value;
  };
  std::vector<std::vector<Write>> log(kN);
  std::vector<int> mismatches(kN, 0);
  auto err = on_ranks(fabric, [&](Endpoint& ep) {
    const auto parts = all_ranks(kN);
    const RegionId ids[] = {ep.region_create(parts, 2048, kRegionTag),
                            ep.region_create(parts, 2048, kRegionTag)};
    for (auto id : ids) ep.epoch_open(id);
    std::mt19937 rng(ep.rank() + 17);
    std::vector<Request> reqs;
    std::vector<std::int64_t> vals(64);
    for (int i = 0; i < 64; ++i) {
      vals[i] = ep.rank() * 1000 + i;
      const int which = static_cast<int>(rng() & 1);
      const Rank target = rng() % kN;
      // Distinct word per (rank, i): single writer everywhere.
      const std::uint64_t disp = (std::uint64_t(i) * kN + ep.rank()) * 8;
      log[ep.rank()].push_back({which, target, disp, vals[i]});
      reqs.push_back(ep.put_nb(ids[which], target, disp, bytes_of(vals[i])));
    }
    ep.wait(reqs);
    for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
    for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
    for (const auto& per_rank : log) {
      for (const auto& w : per_rank) {
        if (w.target != ep.rank()) continue;
        if (ep.local_load64(ids[w.region], w.disp) != w.value) ++mismatches[ep.rank()];
        if (ep.local_load64(ids[1 - w.region], w.disp) != 0) ++mismatches[ep.rank()];
      }
    }
    for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
    for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
    for (auto id : ids) {
      ep.epoch_close(id);
      ep.region_destroy(id);
    }
  });
  CHECK_MESSAGE(err.empty(), err);
  CHECK(std::accumulate(mismatches.begin(), mismatches.end(), 0) == 0);
  CHECK(fabric.live_regions() == 0);
  CHECK(fabric.queued_messages() == 0);
}

TEST_CASE("fetch_and_store and compare_and_swap examples") {
  Fabric fabric(1);
  Endpoint ep(fabric, 0);
  const Rank me = 0;
  const auto r = ep.region_create(std::span(&me, 1), 16, kRegionTag);
  ep.epoch_open(r);
  ep.local_store64(r, 0, -1);
  CHECK(ep.fetch_and_store(r, 0, 0, 5) == -1);
  CHECK(ep.local_load64(r, 0) == 5);
  CHECK(ep.fetch_and_store(r, 0, 0, -1) == 5);
  CHECK(ep.local_load64(r, 0) == -1);
  CHECK(ep.compare_and_swap(r, 0, 0, -1, 7) == -1);
  CHECK(ep.local_load64(r, 0) == 7);
  ep.local_store64(r, 8, 3);
  CHECK(ep.compare_and_swap(r, 0, 8, -1, 7) == 3);
  CHECK(ep.local_load64(r, 8) == 3);
  ep.epoch_close(r);
  ep.region_destroy(r);
}

TEST_CASE("concurrent FAS forms one swap chain") {
  constexpr Rank kN = 8;
  constexpr int kPer = 200;
  Fabric fabric(kN);
  std::vector<std::vector<std::int64_t>> seen(kN);
  std::int64_t final_value = 0;
  auto err = on_ranks(fabric, [&](Endpoint& ep) {
    const auto parts = all_ranks(kN);
    const auto r = ep.region_create(parts, 8, kRegionTag);
    ep.epoch_open(r);
    if (ep.rank() == 0) ep.local_store64(r, 0, -1);
    for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
    for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
    for (int i = 0; i < kPer; ++i) {
      seen[ep.rank()].push_back(ep.fetch_and_store(r, 0, 0, ep.rank() * kPer + i));
    }
    for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
    for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
    if (ep.rank() == 0) final_value = ep.local_load64(r, 0);
    ep.epoch_close(r);
    ep.region_destroy(r);
  });
  REQUIRE_MESSAGE(err.empty(), err);
  std::multiset<std::int64_t> returned;
  for (const auto& v : seen) returned.insert(v.begin(), v.end());
  returned.insert(final_value);
  std::multiset<std::int64_t> expected{-1};
  for (std::int64_t i = 0; i < kN * kPer; ++i) expected.insert(i);
  CHECK(returned == expected);
}

TEST_CASE("concurrent CAS from -1: exactly one winner") {
  constexpr Rank kN = 8;
  for (int trial = 0; trial < 20; ++trial) {
    Fabric fabric(kN);
    std::atomic<int> winners{0};
    auto err = on_ranks(fabric, [&](Endpoint& ep) {
      const auto parts = all_ranks(kN);
      const auto r = ep.region_create(parts, 8, kRegionTag);
      ep.epoch_open(r);
      if (ep.rank() == 3) ep.local_store64(r, 0, -1);
      for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
      for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
      if (ep.compare_and_swap(r, 3, 0, -1, ep.rank()) == -1) ++winners;
      for (Rank t = 0; t < kN; ++t) ep.notify_send(t, kTag);
      for (Rank t = 0; t < kN; ++t) ep.notify_recv(t, kTag);
      ep.epoch_close(r);
      ep.region_destroy(r);
    });
    REQUIRE_MESSAGE(err.empty(), err);
    REQUIRE(winners == 1);
  }
}

TEST_CASE("notifications: blocking receive and FIFO per channel") {
  Fabric fabric(2);
  std::atomic<bool> sent{false};
  std::vector<std::byte> first, second;
  auto err = on_ranks(fabric, [&](Endpoint& ep) {
    if (ep.rank() == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      sent = true;
      ep.notify_send(1, kTag);
      const std::byte a[] = {std::byte{1}}, b[] = {std::byte{2}, std::byte{3}};
      ep.send(1, kTag + 1, a);
      ep.send(1, kTag + 1, b);
    } else {
      ep.notify_recv(0, kTag);
      REQUIRE(sent.load());
      first = ep.recv(0, kTag + 1);
      second = ep.recv(0, kTag + 1);
    }
  });
  CHECK_MESSAGE(err.empty(), err);
  CHECK(first.size() == 1);
  CHECK(second.size() == 2);
  CHECK(fabric.queued_messages() == 0);
}

TEST_CASE("receive timeout and abort") {
  Fabric fabric(2, Fabric::Options{std::chrono::milliseconds(50), 65536});
  Endpoint ep(fabric, 0);
  CHECK(throws_errc(Errc::timeout, [&] { ep.notify_recv(1, kTag); }));
  std::thread waker([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    fabric.abort("stop");
  });
  CHECK(throws_errc(Errc::aborted, [&] { ep.recv(1, kTag); }));
  waker.join();
  CHECK(fabric.aborted());
  CHECK(fabric.abort_reason() == "stop");
  CHECK(throws_errc(Errc::aborted, [&] { ep.notify_send(1, kTag); }));
}

TEST_CASE("trace hook sees every operation with ordered sequence numbers") {
  Fabric fabric(1);
  std::vector<TraceEvent> events;
  fabric.set_trace([&](const TraceEvent& ev) { events.push_back(ev); });
  Endpoint ep(fabric, 0);
  const Rank me = 0;
  const auto r = ep.region_create(std::span(&me, 1), 16, kRegionTag);
  ep.epoch_open(r);
  const std::int64_t v = 9;
  ep.wait(ep.put_nb(r, 0, 0, bytes_of(v)));
  ep.fetch_and_store(r, 0, 8, 4);
  ep.compare_and_swap(r, 0, 8, 4, 5);
  ep.epoch_close(r);
  ep.region_destroy(r);
  REQUIRE(events.size() == 3);
  CHECK(events[0].kind == OpKind::put);
  CHECK(events[0].bytes == 8);
  CHECK(events[1].kind == OpKind::fetch_and_store);
  CHECK(events[1].operand == 4);
  CHECK(events[2].kind == OpKind::compare_and_swap);
  CHECK(events[2].result == 4);
  CHECK(events[0].seq < events[1].seq);
  CHECK(events[1].seq < events[2].seq);
  CHECK(std::string(to_string(OpKind::lock_acquired)) == "lock_acquired");
}
