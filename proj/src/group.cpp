#include "dart/group.hpp"

#include <algorithm>
#include <cassert>
#include <functional>

#include "dart/error.hpp"

namespace dart {

Group::Group(std::initializer_list<UnitId> units)
    : Group(from_units(std::span<const UnitId>(units.begin(), units.size()))) {}

Group Group::from_units(std::span<const UnitId> units) {
  Group g;
  g.members_.assign(units.begin(), units.end());
  std::sort(g.members_.begin(), g.members_.end());
  g.members_.erase(std::unique(g.members_.begin(), g.members_.end()),
                   g.members_.end());
  return g;
}

Group Group::from_sorted(std::vector<UnitId> units) {
  assert(std::adjacent_find(units.begin(), units.end(),
                            std::greater_equal<>()) == units.end());
  Group g;
  g.members_ = std::move(units);
  return g;
}

bool Group::ismember(UnitId unit) const {
  return std::binary_search(members_.begin(), members_.end(), unit);
}

std::optional<std::size_t> Group::index_of(UnitId unit) const {
  auto it = std::lower_bound(members_.begin(), members_.end(), unit);
  if (it == members_.end() || *it != unit) return std::nullopt;
  return static_cast<std::size_t>(it - members_.begin());
}

bool Group::is_subset_of(const Group& other) const {
  return std::includes(other.members_.begin(), other.members_.end(),
                       members_.begin(), members_.end());
}

Group group_init() { return Group{}; }

Group group_union(const Group& a, const Group& b) {
  const auto& x = a.members();
  const auto& y = b.members();
  std::vector<UnitId> merged;
  merged.reserve(x.size() + y.size());
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] < y[j]) {
      merged.push_back(x[i++]);
    } else if (y[j] < x[i]) {
      merged.push_back(y[j++]);
    } else {
      merged.push_back(x[i]);
      ++i;
      ++j;
    }
  }
  merged.insert(merged.end(), x.begin() + static_cast<std::ptrdiff_t>(i), x.end());
  merged.insert(merged.end(), y.begin() + static_cast<std::ptrdiff_t>(j), y.end());
  return Group::from_sorted(std::move(merged));
}

Group group_addmember(const Group& g, UnitId unit, std::size_t unit_count) {
  if (unit >= unit_count) {
    fail(Errc::invalid_argument, "unit " + std::to_string(unit) +
                                     " out of range for " +
                                     std::to_string(unit_count) + " units");
  }
  const UnitId single[] = {unit};
  return group_union(g, Group::from_units(single));
}

Group group_split(const Group&, std::size_t, std::size_t) {
  fail(Errc::unimplemented, "group_split");
}

Group group_delmember(const Group&, UnitId) {
  fail(Errc::unimplemented, "group_delmember");
}

std::string to_string(const Group& g) {
  std::string out = "{";
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(g.at(i));
  }
  return out + "}";
}

}  // namespace dart
