#include "dart/gptr.hpp"

#include <charconv>
#include <limits>
#include <ostream>

#include "dart/error.hpp"

namespace dart {

GlobalPtr GlobalPtr::encode(UnitId unit, SegmentId segment, std::uint16_t flags,
                            std::uint64_t offset) {
  if ((flags & ~gptr_flags::defined) != 0) {
    fail(Errc::invalid_argument, "reserved global pointer flag bits set");
  }
  const std::uint64_t lo = std::uint64_t{unit} | (std::uint64_t{segment} << 32) |
                           (std::uint64_t{flags} << 48);
  return from_words(lo, offset);
}

GlobalPtr GlobalPtr::from_bytes(const std::array<std::byte, 16>& bytes) {
  std::uint64_t words[2] = {0, 0};
  for (int w = 0; w < 2; ++w) {
    for (int i = 7; i >= 0; --i) {
      words[w] = (words[w] << 8) | std::to_integer<std::uint64_t>(bytes[w * 8 + i]);
    }
  }
  return from_words(words[0], words[1]);
}

std::array<std::byte, 16> GlobalPtr::to_bytes() const {
  std::array<std::byte, 16> out{};
  const std::uint64_t words[2] = {lo_, hi_};
  for (int w = 0; w < 2; ++w) {
    for (int i = 0; i < 8; ++i) {
      out[w * 8 + i] = static_cast<std::byte>((words[w] >> (8 * i)) & 0xFF);
    }
  }
  return out;
}

GlobalPtr gptr_advance(const GlobalPtr& p, std::int64_t delta) {
  const std::uint64_t off = p.offset();
  if (delta >= 0) {
    const auto d = static_cast<std::uint64_t>(delta);
    if (off > std::numeric_limits<std::uint64_t>::max() - d) {
      fail(Errc::invalid_argument, "global pointer offset overflow");
    }
    return GlobalPtr::from_words(p.lo(), off + d);
  }
  // -(INT64_MIN) is not representable; go through unsigned negation.
  const std::uint64_t d = ~static_cast<std::uint64_t>(delta) + 1;
  if (d > off) {
    fail(Errc::invalid_argument, "global pointer offset underflow");
  }
  return GlobalPtr::from_words(p.lo(), off - d);
}

std::string to_string(const GlobalPtr& p) {
  return "u:" + std::to_string(p.unit()) + "/s:" + std::to_string(p.segment()) +
         "/f:" + std::to_string(p.flags()) + "/o:" + std::to_string(p.offset());
}

namespace {

template <typename T>
bool take_field(std::string_view& text, std::string_view prefix, T& out) {
  if (text.substr(0, prefix.size()) != prefix) return false;
  text.remove_prefix(prefix.size());
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr == first) return false;
  text.remove_prefix(static_cast<std::size_t>(ptr - first));
  return true;
}

}  // namespace

std::optional<GlobalPtr> parse_gptr(std::string_view text) {
  UnitId unit = 0;
  SegmentId segment = 0;
  std::uint16_t flags = 0;
  std::uint64_t offset = 0;
  if (!take_field(text, "u:", unit) || !take_field(text, "/s:", segment) ||
      !take_field(text, "/f:", flags) || !take_field(text, "/o:", offset) ||
      !text.empty()) {
    return std::nullopt;
  }
  if ((flags & ~gptr_flags::defined) != 0) return std::nullopt;
  return GlobalPtr::encode(unit, segment, flags, offset);
}

std::ostream& operator<<(std::ostream& os, const GlobalPtr& p) {
  return os << to_string(p);
}

}  // namespace dart
