#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace dart {

using UnitId = std::uint32_t;
using SegmentId = std::uint16_t;

/// Segment id carried by every non-collective pointer.
inline constexpr SegmentId kNonCollectiveSegment = 0xFFFF;

namespace gptr_flags {
inline constexpr std::uint16_t collective = 0x0001;
inline constexpr std::uint16_t defined = collective;
}  // namespace gptr_flags

struct GptrFields {
  UnitId unit = 0;
  SegmentId segment = 0;
  std::uint16_t flags = 0;
  std::uint64_t offset = 0;

  friend bool operator==(const GptrFields&, const GptrFields&) = default;
};

/// 128-bit global pointer.
///
/// Canonical layout, low word first:
///   lo bits [0,32)  unit id (absolute)
///   lo bits [32,48) segment id
///   lo bits [48,64) flags
///   hi bits [0,64)  offset
/// Serialized form is the two words in little-endian byte order, lo first.
class GlobalPtr {
 public:
  constexpr GlobalPtr() = default;

  /// Throws Errc::invalid_argument if a reserved flag bit is set.
  static GlobalPtr encode(UnitId unit, SegmentId segment, std::uint16_t flags,
                          std::uint64_t offset);
  static constexpr GlobalPtr from_words(std::uint64_t lo, std::uint64_t hi) {
    GlobalPtr p;
    p.lo_ = lo;
    p.hi_ = hi;
    return p;
  }
  static GlobalPtr from_bytes(const std::array<std::byte, 16>& bytes);

  constexpr UnitId unit() const { return static_cast<UnitId>(lo_ & 0xFFFFFFFFu); }
  constexpr SegmentId segment() const {
    return static_cast<SegmentId>((lo_ >> 32) & 0xFFFFu);
  }
  constexpr std::uint16_t flags() const {
    return static_cast<std::uint16_t>((lo_ >> 48) & 0xFFFFu);
  }
  constexpr std::uint64_t offset() const { return hi_; }
  constexpr bool is_collective() const {
    return (flags() & gptr_flags::collective) != 0;
  }

  GptrFields decode() const { return {unit(), segment(), flags(), offset()}; }

  constexpr std::uint64_t lo() const { return lo_; }
  constexpr std::uint64_t hi() const { return hi_; }
  std::array<std::byte, 16> to_bytes() const;

  /// Same pointer aimed at another unit (used to address any member's
  /// portion of a collective allocation).
  GlobalPtr with_unit(UnitId unit) const {
    return from_words((lo_ & ~std::uint64_t{0xFFFFFFFFu}) | unit, hi_);
  }

  friend constexpr bool operator==(const GlobalPtr&, const GlobalPtr&) = default;

 private:
  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
};

inline GlobalPtr encode(UnitId unit, SegmentId segment, std::uint16_t flags,
                        std::uint64_t offset) {
  return GlobalPtr::encode(unit, segment, flags, offset);
}

inline GptrFields decode(const GlobalPtr& p) { return p.decode(); }

/// offset += delta; throws Errc::invalid_argument on underflow or overflow.
GlobalPtr gptr_advance(const GlobalPtr& p, std::int64_t delta);

/// "u:<unit>/s:<segment>/f:<flags>/o:<offset>"
std::string to_string(const GlobalPtr& p);
std::optional<GlobalPtr> parse_gptr(std::string_view text);
std::ostream& operator<<(std::ostream& os, const GlobalPtr& p);

}  // namespace dart

template <>
struct std::hash<dart::GlobalPtr> {
  std::size_t operator()(const dart::GlobalPtr& p) const noexcept {
    std::uint64_t h = p.lo() * 0x9E3779B97F4A7C15ull;
    h ^= p.hi() + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};
