#include "tif/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace tif {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw std::invalid_argument("bad date: " + std::string(text));
  return value;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw std::invalid_argument("bad date: " + std::string(text));
  const int y = parse_field(text, 0, 4);
  const int m = parse_field(text, 5, 2);
  const int d = parse_field(text, 8, 2);
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw std::invalid_argument("bad date: " + std::string(text));
  return date;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()));
  return buf;
}

int months_between(const Date& from, const Date& to) {
  const int years = static_cast<int>(to.year()) - static_cast<int>(from.year());
  return years * 12 + static_cast<int>(static_cast<unsigned>(to.month())) -
         static_cast<int>(static_cast<unsigned>(from.month()));
}

Date add_months(const Date& date, int months) {
  using namespace std::chrono;
  const year_month ym = year_month{date.year(), date.month()} + std::chrono::months{months};
  return Date{ym.year(), ym.month(), day{1}};
}

}  // namespace tif
