#include "graphfolio/date.hpp"

#include <chrono>
#include <cstdio>

#include "graphfolio/errors.hpp"

namespace graphfolio {

namespace {

std::chrono::year_month_day to_ymd(Date d) {
  return std::chrono::year_month_day(
      std::chrono::sys_days(std::chrono::days(d)));
}

}  // namespace

Date make_date(int year, int month, int day) {
  std::chrono::year_month_day ymd{std::chrono::year(year),
                                  std::chrono::month(unsigned(month)),
                                  std::chrono::day(unsigned(day))};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                    std::to_string(month) + "-" + std::to_string(day));
  }
  return Date(std::chrono::sys_days(ymd).time_since_epoch().count());
}

Date parse_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("expected YYYY-MM-DD date, got '" + text + "'");
  }
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (text[i] < '0' || text[i] > '9') {
      throw DataError("expected YYYY-MM-DD date, got '" + text + "'");
    }
  }
  int year = std::stoi(text.substr(0, 4));
  int month = std::stoi(text.substr(5, 2));
  int day = std::stoi(text.substr(8, 2));
  return make_date(year, month, day);
}

std::string format_date(Date d) {
  auto ymd = to_ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

bool is_weekday(Date d) {
  std::chrono::weekday wd{std::chrono::sys_days(std::chrono::days(d))};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

int year_of(Date d) { return int(to_ymd(d).year()); }

int quarter_of(Date d) { return (int(unsigned(to_ymd(d).month())) - 1) / 3 + 1; }

int quarter_index(Date d) { return year_of(d) * 4 + (quarter_of(d) - 1); }

std::vector<Date> weekday_calendar(Date first, int n_days) {
  std::vector<Date> out;
  out.reserve(size_t(n_days));
  Date d = first;
  while (int(out.size()) < n_days) {
    if (is_weekday(d)) out.push_back(d);
    ++d;
  }
  return out;
}

}  // namespace graphfolio
