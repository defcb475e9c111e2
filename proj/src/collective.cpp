#include "dart/collective.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "dart/error.hpp"

namespace dart {

namespace {

enum Sub : std::uint32_t {
  kBcast = 1,
  kScatter = 2,
  kGather = 3,
  kBarrierBase = 0x100,
};

std::uint32_t lowbit(std::uint32_t v) { return v & (~v + 1); }

std::uint32_t pow2_ceil(std::uint32_t n) {
  std::uint32_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Communicator::Communicator(transport::Endpoint& ep,
                           std::vector<transport::Rank> members,
                           std::uint32_t context)
    : ep_(&ep), members_(std::move(members)), context_(context) {
  auto it = std::lower_bound(members_.begin(), members_.end(), ep.rank());
  if (it == members_.end() || *it != ep.rank()) {
    fail(Errc::not_a_member, "endpoint is not in the communicator");
  }
  my_rank_ = static_cast<std::uint32_t>(it - members_.begin());
}

std::uint64_t Communicator::tag(std::uint32_t sub) const {
  return transport::make_tag(transport::Channel::collective, context_, sub);
}

void Communicator::barrier() const {
  const std::uint32_t n = size();
  std::uint32_t round = 0;
  for (std::uint32_t dist = 1; dist < n; dist <<= 1, ++round) {
    const auto to = members_[(my_rank_ + dist) % n];
    const auto from = members_[(my_rank_ + n - dist) % n];
    ep_->send(to, tag(kBarrierBase + round), {});
    ep_->recv(from, tag(kBarrierBase + round));
  }
}

void Communicator::bcast(std::span<std::byte> buffer, std::uint32_t root) const {
  const std::uint32_t n = size();
  if (root >= n) fail(Errc::invalid_argument, "bcast root out of range");
  const std::uint32_t v = (my_rank_ + n - root) % n;
  auto real = [&](std::uint32_t vr) { return members_[(vr + root) % n]; };

  std::uint32_t mask = 1;
  while (mask < n) {
    if (v & mask) {
      auto msg = ep_->recv(real(v - mask), tag(kBcast));
      if (msg.size() != buffer.size()) {
        fail(Errc::invalid_argument,
             "bcast length mismatch: " + std::to_string(buffer.size()) + " vs " +
                 std::to_string(msg.size()));
      }
      std::copy(msg.begin(), msg.end(), buffer.begin());
      break;
    }
    mask <<= 1;
  }
  for (mask >>= 1; mask > 0; mask >>= 1) {
    if (v + mask < n) ep_->send(real(v + mask), tag(kBcast), buffer);
  }
}

void Communicator::scatter(std::span<const std::byte> send, std::span<std::byte> recv,
                           std::uint32_t root) const {
  const std::uint32_t n = size();
  if (root >= n) fail(Errc::invalid_argument, "scatter root out of range");
  const std::size_t chunk = recv.size();
  const std::uint32_t v = (my_rank_ + n - root) % n;
  auto real = [&](std::uint32_t vr) { return members_[(vr + root) % n]; };

  // tmp holds the blocks of my subtree, in virtual-rank order.
  std::vector<std::byte> tmp;
  std::uint32_t span_top;  // first mask to hand out
  if (v == 0) {
    if (send.size() != chunk * n) {
      fail(Errc::invalid_argument, "scatter send buffer must hold size()*chunk bytes");
    }
    tmp.resize(chunk * n);
    for (std::uint32_t vr = 0; vr < n; ++vr) {
      const std::size_t src = static_cast<std::size_t>((vr + root) % n) * chunk;
      std::memcpy(tmp.data() + vr * chunk, send.data() + src, chunk);
    }
    span_top = pow2_ceil(n) >> 1;
  } else {
    const std::uint32_t lb = lowbit(v);
    const std::size_t blocks = std::min(lb, n - v);
    tmp = ep_->recv(real(v - lb), tag(kScatter));
    if (tmp.size() != blocks * chunk) {
      fail(Errc::invalid_argument, "scatter length mismatch");
    }
    span_top = lb >> 1;
  }
  for (std::uint32_t mask = span_top; mask > 0; mask >>= 1) {
    if (v + mask >= n) continue;
    const std::size_t blocks = std::min(mask, n - (v + mask));
    ep_->send(real(v + mask), tag(kScatter),
              std::span<const std::byte>(tmp.data() + mask * chunk, blocks * chunk));
  }
  if (chunk > 0) std::memcpy(recv.data(), tmp.data(), chunk);
}

void Communicator::gather(std::span<const std::byte> send, std::span<std::byte> recv,
                          std::uint32_t root) const {
  const std::uint32_t n = size();
  if (root >= n) fail(Errc::invalid_argument, "gather root out of range");
  const std::size_t chunk = send.size();
  const std::uint32_t v = (my_rank_ + n - root) % n;
  auto real = [&](std::uint32_t vr) { return members_[(vr + root) % n]; };
  if (v == 0 && recv.size() != chunk * n) {
    fail(Errc::invalid_argument, "gather recv buffer must hold size()*chunk bytes");
  }

  const std::uint32_t limit = v == 0 ? n : lowbit(v);
  const std::size_t blocks = std::min<std::size_t>(limit, n - v);
  std::vector<std::byte> tmp(blocks * chunk);
  std::copy(send.begin(), send.end(), tmp.begin());
  for (std::uint32_t mask = 1; mask < limit; mask <<= 1) {
    if (v + mask >= n) break;
    const std::size_t child_blocks = std::min(mask, n - (v + mask));
    auto msg = ep_->recv(real(v + mask), tag(kGather));
    if (msg.size() != child_blocks * chunk) {
      fail(Errc::invalid_argument, "gather length mismatch");
    }
    std::copy(msg.begin(), msg.end(), tmp.begin() + static_cast<std::ptrdiff_t>(mask * chunk));
  }
  if (v != 0) {
    ep_->send(real(v - lowbit(v)), tag(kGather), tmp);
    return;
  }
  for (std::uint32_t vr = 0; vr < n; ++vr) {
    const std::size_t dst = static_cast<std::size_t>((vr + root) % n) * chunk;
    std::memcpy(recv.data() + dst, tmp.data() + vr * chunk, chunk);
  }
}

bool Communicator::all_agree(bool ok) const {
  auto flags = allgather_u64(ok ? 1 : 0);
  return std::all_of(flags.begin(), flags.end(), [](std::uint64_t f) { return f == 1; });
}

std::vector<std::uint64_t> Communicator::allgather_u64(std::uint64_t value) const {
  std::vector<std::uint64_t> all(size());
  auto bytes = std::as_writable_bytes(std::span(all));
  gather(std::as_bytes(std::span(&value, 1)), my_rank_ == 0 ? bytes : std::span<std::byte>{},
         0);
  bcast(bytes, 0);
  return all;
}

}  // namespace dart
