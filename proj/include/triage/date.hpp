#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace triage {

// Calendar date at day granularity, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Accepts "YYYY-MM-DD" optionally followed by a time part ("T..." or " ...")
  // which is ignored.
  static Date parse(std::string_view iso);

  constexpr int days() const { return days_; }
  std::string iso() const;           // YYYY-MM-DD
  std::string iso_timestamp() const; // YYYY-MM-DDT00:00:00Z

  constexpr Date operator+(int d) const { return Date(days_ + d); }
  constexpr Date operator-(int d) const { return Date(days_ - d); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

}  // namespace triage
