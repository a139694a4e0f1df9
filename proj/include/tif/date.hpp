#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace tif {

/// Calendar date at day resolution.
using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD". Throws std::invalid_argument on malformed or
/// non-existent dates.
Date parse_date(std::string_view text);

std::string format_date(const Date& date);

/// Whole calendar months from `from` to `to`, ignoring the day of month.
/// 2014-01-31 -> 2014-02-01 is one month.
int months_between(const Date& from, const Date& to);

/// First day of the month `months` after the month containing `date`.
Date add_months(const Date& date, int months);

inline Date first_of_month(const Date& date) {
  return Date{date.year(), date.month(), std::chrono::day{1}};
}

inline int days_in_month(const Date& date) {
  using namespace std::chrono;
  return static_cast<int>(
      static_cast<unsigned>((date.year() / date.month() / last).day()));
}

}  // namespace tif
