#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace grandjury {

// A UTC instant with microsecond resolution. The canonical text form is
// ISO-8601 with a "T" separator and a "Z" suffix; fractional seconds are
// printed only when non-zero, with trailing zeros trimmed.
class Timestamp {
 public:
  using Duration = std::chrono::microseconds;
  using TimePoint = std::chrono::sys_time<Duration>;

  Timestamp() = default;
  explicit Timestamp(TimePoint tp) : tp_(tp) {}

  static Timestamp from_micros(std::int64_t us) { return Timestamp(TimePoint(Duration(us))); }
  static Timestamp now();

  std::int64_t micros() const { return tp_.time_since_epoch().count(); }
  TimePoint time_point() const { return tp_; }

  std::string to_iso8601() const;

  auto operator<=>(const Timestamp&) const = default;

 private:
  TimePoint tp_{};
};

enum class TimestampPolicy {
  // Requires an explicit "Z" or numeric offset.
  RequireDesignator,
  // Also accepts a space separator and a missing designator (read as UTC),
  // the form used by exported inference tables.
  AssumeUtc,
};

// Returns nullopt when `text` is not a valid ISO-8601 date-time under `policy`.
std::optional<Timestamp> parse_iso8601(std::string_view text,
                                       TimestampPolicy policy = TimestampPolicy::RequireDesignator);

// Throws Error(BadTimestamp) on failure.
Timestamp parse_iso8601_or_throw(std::string_view text, std::string_view field,
                                 TimestampPolicy policy = TimestampPolicy::RequireDesignator);

}  // namespace grandjury
