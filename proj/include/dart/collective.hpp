#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dart/transport.hpp"

namespace dart {

/// Communication context of one team as seen by one member: the ordered
/// member ranks, the caller's position and the tag space of the team.
/// Collectives on one communicator must be called in the same order by
/// every member.
class Communicator {
 public:
  Communicator(transport::Endpoint& ep, std::vector<transport::Rank> members,
               std::uint32_t context);

  transport::Endpoint& endpoint() const { return *ep_; }
  const std::vector<transport::Rank>& members() const { return members_; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(members_.size()); }
  std::uint32_t rank() const { return my_rank_; }
  std::uint32_t context() const { return context_; }
  std::uint64_t tag(std::uint32_t sub) const;

  /// Dissemination barrier: ceil(log2 n) rounds of zero-byte messages.
  void barrier() const;
  /// Binomial-tree broadcast; every member's buffer must have the same size.
  void bcast(std::span<std::byte> buffer, std::uint32_t root) const;
  /// `send` (root only) holds size() blocks of recv.size() bytes in rank order.
  void scatter(std::span<const std::byte> send, std::span<std::byte> recv,
               std::uint32_t root) const;
  /// `recv` (root only) receives size() blocks of send.size() bytes in rank
  /// order.
  void gather(std::span<const std::byte> send, std::span<std::byte> recv,
              std::uint32_t root) const;

  /// True at every member iff `ok` was true at every member.
  bool all_agree(bool ok) const;
  /// Every member's 64-bit value, in rank order, at every member.
  std::vector<std::uint64_t> allgather_u64(std::uint64_t value) const;

 private:
  transport::Endpoint* ep_;
  std::vector<transport::Rank> members_;
  std::uint32_t my_rank_;
  std::uint32_t context_;
};

}  // namespace dart
