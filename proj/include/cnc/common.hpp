#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace cnc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CompatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense integer identifier tagged by what it names.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}
  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(Id, Id) = default;
};

struct NodeTag {};
struct LinkTag {};
struct PathTag {};
using NodeId = Id<NodeTag>;
using LinkId = Id<LinkTag>;
using PathId = Id<PathTag>;

using Slot = std::int64_t;

// FNV-1a, used for topology and task-stream fingerprints.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ULL;
    }
  }
  void add(std::string_view s) {
    add_bytes(s.data(), s.size());
    add_bytes("\x1f", 1);
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void add(T v) {
    add_bytes(&v, sizeof v);
  }
  std::uint64_t value() const { return hash_; }
  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    auto h = hash_;
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
  }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("expected a number for " + std::string(what) + ", got '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("expected an integer for " + std::string(what) + ", got '" + std::string(s) + "'");
  return v;
}

}  // namespace cnc

template <typename Tag>
struct std::hash<cnc::Id<Tag>> {
  std::size_t operator()(cnc::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
