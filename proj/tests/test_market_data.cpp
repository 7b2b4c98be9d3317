#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "graphfolio/date.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/market_data.hpp"
#include "graphfolio/synthetic.hpp"

using namespace graphfolio;

namespace {

// 2015-01-01 (Thu) onward; A rises then falls, B is flat, C defaults after
// its 2015-01-02 close (default row on the next trading day, 2015-01-05).
const char* kPanelCsv =
    "date,firm_id,close,sector,default_flag\n"
    "2015-01-01,A,100,S1,0\n"
    "2015-01-01,B,50,S2,0\n"
    "2015-01-01,C,10,S1,0\n"
    "2015-01-02,A,110,S1,0\n"
    "2015-01-02,B,50,S2,0\n"
    "2015-01-02,C,8,S1,0\n"
    "2015-01-05,A,99,S1,0\n"
    "2015-01-05,B,50,S2,0\n"
    "2015-01-05,C,8,S1,1\n"
    "2015-01-06,A,99,S1,0\n"
    "2015-01-06,B,50,S2,0\n";

}  // namespace

TEST_SUITE("market_data") {
  TEST_CASE("parses the long-format schema") {
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    REQUIRE(p.firms == std::vector<std::string>{"A", "B", "C"});
    REQUIRE(p.calendar.size() == 4);
    CHECK(format_date(p.calendar[2]) == "2015-01-05");
    CHECK(p.meta[0].sector == "S1");
    CHECK(p.meta[1].sector == "S2");
    CHECK_FALSE(p.meta[0].default_date.has_value());
    REQUIRE(p.meta[2].default_date.has_value());
    CHECK(format_date(*p.meta[2].default_date) == "2015-01-05");
    // C's default row is a marker, not an observation.
    const Series& c = p.series[2];
    CHECK(c.values.size() == 2);
    CHECK(c.at(p.calendar_pos(parse_date("2015-01-02"))) == 8.0);
    CHECK(p.calendar_pos(parse_date("2015-01-03")) == -1);
    CHECK(p.firm_index.at("B") == 1);
  }

  TEST_CASE("round trips through csv text") {
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    std::string text = price_panel_to_csv(p);
    PricePanel q = parse_price_csv(text, "round");
    CHECK(price_panel_to_csv(q) == text);
    CHECK(q.firms == p.firms);
    CHECK(q.calendar == p.calendar);
  }

  TEST_CASE("rejects malformed rows") {
    CHECK_THROWS_AS(parse_price_csv("date,firm_id,close\n", "x"), DataError);
    CHECK_THROWS_AS(
        parse_price_csv("date,firm_id,close,sector,default_flag\n"
                        "2015-01-01,A,-5,S1,0\n",
                        "x"),
        DataError);
    CHECK_THROWS_AS(
        parse_price_csv("date,firm_id,close,sector,default_flag\n"
                        "2015-01-03,A,5,S1,0\n",
                        "x"),
        DataError);  // Saturday
  }

  TEST_CASE("returns are simple daily ratios with a terminal default") {
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    ReturnPanel r = compute_returns(p);
    int pos1 = 1, pos2 = 2;
    const Series& a = r.series[0];
    CHECK(a.at(pos1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(a.at(pos2) == doctest::Approx(-0.1).epsilon(1e-12));
    const Series& b = r.series[1];
    CHECK(b.at(pos1) == 0.0);
    // C: one real return (8/10 - 1), then the -1 default return on 01-05.
    const Series& c = r.series[2];
    CHECK(c.at(pos1) == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(c.at(pos2) == -1.0);
    CHECK(c.end() == 3);
  }

  TEST_CASE("volatility is the trailing population std") {
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    ReturnPanel r = compute_returns(p);
    VolPanel v = compute_volatility_series(r, 2);
    // A's returns: 0.1 then -0.1; window of 2 at pos 2 has mean 0, std 0.1.
    const Series& a = v.series[0];
    CHECK(a.at(2) == doctest::Approx(0.1).epsilon(1e-12));
    const Series& b = v.series[1];
    CHECK(b.at(2) == 0.0);
  }

  TEST_CASE("active_universe filters and orients features") {
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    ReturnPanel r = compute_returns(p);
    // as_of 2015-01-06: C defaulted on 01-05, so only A and B qualify.
    UniverseSnapshot snap =
        active_universe(r, parse_date("2015-01-06"), 3, 1);
    CHECK(snap.firms == std::vector<std::string>{"A", "B"});
    REQUIRE(snap.features.rows() == 2);
    REQUIRE(snap.features.cols() == 3);
    // Row A reversed: col 0 = most recent return before as_of (pos 2).
    CHECK(snap.features(0, 0) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(snap.features(0, 1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(snap.features(0, 2) == 0.0);  // before A's first return
    // min_history filter: need at least 2 returns in the window.
    UniverseSnapshot strict =
        active_universe(r, parse_date("2015-01-06"), 3, 2);
    CHECK(strict.firms == std::vector<std::string>{"A", "B"});
  }

  TEST_CASE("file round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gf_md_test";
    fs::create_directories(dir);
    fs::path file = dir / "panel.csv";
    PricePanel p = parse_price_csv(kPanelCsv, "inline");
    write_price_panel(p, file.string());
    PricePanel q = load_price_panel(file.string());
    CHECK(price_panel_to_csv(q) == price_panel_to_csv(p));
    CHECK_THROWS_AS(load_price_panel((dir / "absent.csv").string()), DataError);
    fs::remove_all(dir);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("generator is deterministic and well-formed") {
    GeneratorConfig gc;
    gc.n_firms = 25;
    gc.n_years = 1.0;
    gc.n_sectors = 3;
    PricePanel a = generate_synthetic_market(gc, 42);
    PricePanel b = generate_synthetic_market(gc, 42);
    CHECK(price_panel_to_csv(a) == price_panel_to_csv(b));
    PricePanel c = generate_synthetic_market(gc, 43);
    CHECK(price_panel_to_csv(a) != price_panel_to_csv(c));

    CHECK(a.firms.size() == 25);
    CHECK(a.calendar.size() == size_t(252));
    for (Date d : a.calendar) CHECK(is_weekday(d));
    std::set<std::string> sectors;
    for (const auto& m : a.meta) sectors.insert(m.sector);
    CHECK(sectors.size() <= 3);
    for (const auto& s : a.series) {
      for (double px : s.values) CHECK(px > 0.0);
    }
  }

  TEST_CASE("hazards produce defaults at roughly the configured rate") {
    GeneratorConfig gc;
    gc.n_firms = 400;
    gc.n_years = 2.0;
    gc.default_hazard = 0.10;
    PricePanel p = generate_synthetic_market(gc, 7);
    int defaults = 0;
    for (const auto& m : p.meta) defaults += m.default_date.has_value();
    CHECK(defaults > 0);
    double rate = realized_default_rate(p);
    CHECK(rate > 0.03);
    CHECK(rate < 0.25);
  }

  TEST_CASE("zero hazards mean no defaults and full histories") {
    GeneratorConfig gc;
    gc.n_firms = 10;
    gc.n_years = 0.5;
    gc.default_hazard = 0.0;
    PricePanel p = generate_synthetic_market(gc, 5);
    for (const auto& m : p.meta) CHECK_FALSE(m.default_date.has_value());
    for (const auto& s : p.series) {
      CHECK(s.start == 0);
      CHECK(s.values.size() == p.calendar.size());
    }
    CHECK(realized_default_rate(p) == 0.0);
  }

  TEST_CASE("config validation") {
    GeneratorConfig gc;
    gc.n_firms = 0;
    CHECK_THROWS_AS(gc.validate(), ConfigError);
    GeneratorConfig gc2;
    gc2.default_hazard = 1.5;
    CHECK_THROWS_AS(gc2.validate(), ConfigError);
  }
}
