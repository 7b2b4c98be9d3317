#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graphfolio {

// Serial day number relative to 1970-01-01. Plain int keeps panels compact and
// makes calendar arithmetic trivial; conversion helpers below do the rest.
using Date = int32_t;

Date make_date(int year, int month, int day);
Date parse_date(const std::string& text);  // strict YYYY-MM-DD
std::string format_date(Date d);

bool is_weekday(Date d);
int year_of(Date d);
int quarter_of(Date d);  // 1..4

// year*4 + (quarter-1): consecutive values mean consecutive calendar quarters.
int quarter_index(Date d);

// n_days weekdays starting at the first weekday >= first.
std::vector<Date> weekday_calendar(Date first, int n_days);

}  // namespace graphfolio
