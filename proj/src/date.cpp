#include "triage/date.hpp"

#include <charconv>
#include <cstdio>

#include "triage/errors.hpp"

namespace triage {

using namespace std::chrono;

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) {
    throw ArgumentError("invalid calendar date");
  }
  return Date(static_cast<int>(sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = iso.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc() || ptr != first + len) {
      throw FormatError("invalid ISO date: '" + std::string(iso) + "'");
    }
    return value;
  };
  if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-' ||
      (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ')) {
    throw FormatError("invalid ISO date: '" + std::string(iso) + "'");
  }
  try {
    return from_ymd(field(0, 4), static_cast<unsigned>(field(5, 2)),
                    static_cast<unsigned>(field(8, 2)));
  } catch (const ArgumentError&) {
    throw FormatError("invalid ISO date: '" + std::string(iso) + "'");
  }
}

std::string Date::iso() const {
  const year_month_day ymd{sys_days{std::chrono::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string Date::iso_timestamp() const { return iso() + "T00:00:00Z"; }

}  // namespace triage
