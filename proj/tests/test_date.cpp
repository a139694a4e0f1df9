#include <gtest/gtest.h>

#include <stdexcept>

#include "tif/date.hpp"

using namespace tif;

TEST(Date, ParseFormatRoundTrip) {
  EXPECT_EQ(format_date(parse_date("2014-03-15")), "2014-03-15");
  EXPECT_EQ(format_date(parse_date("2016-02-29")), "2016-02-29");
}

TEST(Date, RejectsMalformed) {
  for (const char* s : {"2014-3-15", "2014-02-30", "abcd-ef-gh", "2014-13-01", "", "2014-01-01x"})
    EXPECT_THROW(parse_date(s), std::invalid_argument) << s;
}

TEST(Date, CalendarMonthArithmetic) {
  EXPECT_EQ(months_between(parse_date("2014-01-31"), parse_date("2014-02-01")), 1);
  EXPECT_EQ(months_between(parse_date("2014-01-01"), parse_date("2015-03-31")), 14);
  EXPECT_EQ(format_date(add_months(parse_date("2014-11-20"), 3)), "2015-02-01");
  EXPECT_EQ(days_in_month(parse_date("2016-02-10")), 29);
  EXPECT_EQ(days_in_month(parse_date("2015-02-10")), 28);
}
