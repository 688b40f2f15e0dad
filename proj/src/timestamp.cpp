#include "grandjury/timestamp.hpp"

#include <cstdio>

#include "grandjury/error.hpp"

namespace grandjury {
namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

Timestamp Timestamp::now() {
  return Timestamp(std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()));
}

std::string Timestamp::to_iso8601() const {
  using namespace std::chrono;
  auto day = floor<days>(tp_);
  year_month_day ymd{day};
  auto tod = tp_ - day;
  auto h = duration_cast<hours>(tod);
  auto m = duration_cast<minutes>(tod - h);
  auto s = duration_cast<seconds>(tod - h - m);
  auto us = (tod - h - m - s).count();

  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(h.count()), static_cast<int>(m.count()),
                static_cast<int>(s.count()));
  std::string out(buf);
  if (us != 0) {
    char frac[16];
    std::snprintf(frac, sizeof frac, ".%06lld", static_cast<long long>(us));
    std::string f(frac);
    while (f.back() == '0') f.pop_back();
    out += f;
  }
  out += 'Z';
  return out;
}

std::optional<Timestamp> parse_iso8601(std::string_view s, TimestampPolicy policy) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS
  int year, month, day, hour, minute, second;
  if (!read_digits(s, 0, 4, year) || s.size() < 19 || s[4] != '-' ||
      !read_digits(s, 5, 2, month) || s[7] != '-' || !read_digits(s, 8, 2, day)) {
    return std::nullopt;
  }
  char sep = s[10];
  if (!(sep == 'T' || sep == 't' || (sep == ' ' && policy == TimestampPolicy::AssumeUtc))) {
    return std::nullopt;
  }
  if (!read_digits(s, 11, 2, hour) || s[13] != ':' || !read_digits(s, 14, 2, minute) ||
      s[16] != ':' || !read_digits(s, 17, 2, second)) {
    return std::nullopt;
  }
  if (hour > 23 || minute > 59 || second > 59) return std::nullopt;

  year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                     std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;

  std::size_t pos = 19;
  std::int64_t frac_us = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    std::size_t digits = 0;
    std::int64_t scale = 100000;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 6) {
        frac_us += (s[pos] - '0') * scale;
        scale /= 10;
      }
      ++digits;
      ++pos;
    }
    if (digits == 0 || digits > 9) return std::nullopt;
  }

  std::int64_t offset_minutes = 0;
  if (pos == s.size()) {
    if (policy != TimestampPolicy::AssumeUtc) return std::nullopt;
  } else if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int sign = s[pos] == '+' ? 1 : -1;
    ++pos;
    int oh, om;
    if (!read_digits(s, pos, 2, oh)) return std::nullopt;
    pos += 2;
    if (pos < s.size() && s[pos] == ':') ++pos;
    if (!read_digits(s, pos, 2, om)) return std::nullopt;
    pos += 2;
    if (oh > 23 || om > 59) return std::nullopt;
    offset_minutes = sign * (oh * 60 + om);
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  auto tp = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second} +
            microseconds{frac_us} - minutes{offset_minutes};
  return Timestamp(time_point_cast<microseconds>(tp));
}

Timestamp parse_iso8601_or_throw(std::string_view text, std::string_view field,
                                 TimestampPolicy policy) {
  auto ts = parse_iso8601(text, policy);
  if (!ts) {
    throw Error(ErrorCode::BadTimestamp,
                std::string(field) + " is not an ISO-8601 UTC timestamp", std::string(text));
  }
  return *ts;
}

}  // namespace grandjury
