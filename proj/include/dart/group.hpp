#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dart/gptr.hpp"

namespace dart {

/// Locally manipulated ordered set of absolute unit ids. Members are kept
/// strictly ascending at all times.
class Group {
 public:
  Group() = default;
  /// Builds from arbitrary ids (sorted and deduplicated).
  Group(std::initializer_list<UnitId> units);
  static Group from_units(std::span<const UnitId> units);
  /// Takes ownership of an already strictly ascending sequence.
  static Group from_sorted(std::vector<UnitId> units);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool ismember(UnitId unit) const;
  /// Position of `unit` in the ascending member list.
  std::optional<std::size_t> index_of(UnitId unit) const;
  UnitId at(std::size_t index) const { return members_.at(index); }
  const std::vector<UnitId>& members() const { return members_; }
  bool is_subset_of(const Group& other) const;

  friend bool operator==(const Group&, const Group&) = default;

 private:
  std::vector<UnitId> members_;
};

Group group_init();

/// Merge of two ascending sequences; duplicates collapse.
Group group_union(const Group& a, const Group& b);

/// Singleton group of `unit` merged into `g`. `unit_count` bounds the id.
Group group_addmember(const Group& g, UnitId unit, std::size_t unit_count);

// Splitting and removal are not supported; these throw Errc::unimplemented.
Group group_split(const Group& g, std::size_t parts, std::size_t which);
Group group_delmember(const Group& g, UnitId unit);

std::string to_string(const Group& g);

}  // namespace dart
