#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "exhaz/error.hpp"
#include "exhaz/lifetable.hpp"
#include "oracles.hpp"

using namespace exhaz;

namespace {

LifeTable constant_table(double rate, int a0 = 0, int a1 = 100, int y0 = 2000, int y1 = 2030) {
  std::vector<LifeTable::Cell> cells;
  for (int a = a0; a <= a1; ++a)
    for (int y = y0; y <= y1; ++y) cells.push_back({a, y, {"0"}, rate});
  return LifeTable({"sex"}, cells);
}

// Cells (70..71) x (2012..2013) for the hand-integrated path.
LifeTable small_table() {
  return LifeTable({"sex"}, {{70, 2012, {"0"}, 0.02},
                             {71, 2012, {"0"}, 0.03},
                             {70, 2013, {"0"}, 0.05},
                             {71, 2013, {"0"}, 0.04}});
}

LifeTable random_table(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::vector<LifeTable::Cell> cells;
  for (const char* s : {"a", "b"})
    for (int a = 40; a <= 60; ++a)
      for (int y = 2000; y <= 2015; ++y) cells.push_back({a, y, {s}, u(rng)});
  return LifeTable({"grp"}, cells);
}

// Reference: quadrature of rate_at along the diagonal, split at every
// integer crossing so each piece is smooth.
double quad_increment(const LifeTable& t, StratumId s, LexisPosition p, double len) {
  std::vector<double> cuts{0.0, len};
  for (double k = std::ceil(p.age); k - p.age < len; k += 1.0) cuts.push_back(k - p.age);
  for (double k = std::ceil(p.year); k - p.year < len; k += 1.0) cuts.push_back(k - p.year);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    total += t.rate_at(s, {p.age + mid, p.year + mid}) * (cuts[i + 1] - cuts[i]);
  }
  return total;
}

}  // namespace

TEST_CASE("load: two-row table infers the age range") {
  std::istringstream in("age,year,sex,rate\n70,2012,0,0.02\n71,2012,0,0.03\n");
  // Only one year column value (2012), so both rows form a complete grid.
  const auto t = LifeTable::load(in);
  CHECK(t.age_min() == 70);
  CHECK(t.age_max() == 71);
  CHECK(t.year_min() == 2012);
}

TEST_CASE("load: a table with gaps -> MissingCell") {
  std::istringstream in("age,year,sex,rate\n70,2012,0,0.02\n71,2013,0,0.03\n");
  try {
    LifeTable::load(in);
    FAIL("expected MissingCell");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCell);
  }
}

TEST_CASE("load: validation errors") {
  auto code_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      LifeTable::load(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;  // sentinel: no error
  };
  CHECK(code_of("age,year,sex,rate\n70,2012,0,-0.1\n71,2012,0,0.03\n") == ErrorCode::NegativeRate);
  CHECK(code_of("age,year,sex,rate\n70,2012,0,0.1\n70,2012,0,0.2\n") == ErrorCode::DuplicateCell);
  CHECK(code_of("age,year,sex,rate\n70,2012,0\n") == ErrorCode::MalformedRow);
  CHECK(code_of("age,year,sex,rate\n70,2012,0,abc\n") == ErrorCode::MalformedRow);
  CHECK(code_of("# comment\nage,year,sex,rate\n\n70,2012,0,0.1\n") == ErrorCode::Io);
}

TEST_CASE("load: UK-style table has 1400 queryable cells") {
  std::ostringstream text;
  text << "age,year,sex,rate\n";
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a <= 99; ++a)
      for (int y = 2010; y <= 2016; ++y) text << a << ',' << y << ',' << s << ',' << 0.001 * (a + 1) << '\n';
  std::istringstream in(text.str());
  const auto t = LifeTable::load(in);
  CHECK(t.cell_count() == 1400);
  for (int s = 0; s < 2; ++s) {
    const auto id = t.stratum({std::to_string(s)});
    for (int a = 0; a <= 99; ++a)
      for (int y = 2010; y <= 2016; ++y)
        CHECK(t.rate_at(id, {a + 0.5, y + 0.5}) == doctest::Approx(0.001 * (a + 1)).epsilon(1e-15));
  }
}

TEST_CASE("save/load round trip") {
  const auto t = small_table();
  std::stringstream buf;
  t.save(buf);
  const auto u = LifeTable::load(buf);
  const auto s = t.stratum({"0"});
  for (double a : {70.2, 71.7})
    for (double y : {2012.1, 2013.9}) CHECK(u.rate_at(u.stratum({"0"}), {a, y}) == t.rate_at(s, {a, y}));
}

TEST_CASE("rate_at: within-cell constancy, clamping, unknown stratum") {
  std::vector<LifeTable::Cell> cells;
  for (int a = 0; a <= 99; ++a)
    for (int y = 2012; y <= 2013; ++y)
      for (const char* s : {"0", "1"}) cells.push_back({a, y, {s}, a == 99 ? 0.3 : 0.02});
  const LifeTable t({"sex"}, cells);
  const auto s0 = t.stratum({"0"});
  CHECK(t.rate_at(s0, {70.4, 2012.4}) == 0.02);
  CHECK(t.rate_at(s0, {105.0, 2012.0}) == t.rate_at(s0, {99.0, 2012.0}));
  CHECK(t.rate_at(s0, {105.0, 2050.0}) == 0.3);
  CHECK(t.rate_at(s0, {-3.0, 1990.0}) == 0.02);
  CHECK_THROWS_AS(t.stratum({"2"}), Error);
  try {
    t.stratum({"2"});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownStratum);
  }
  // Strata values are trimmed when loading but matched exactly.
  CHECK_THROWS_AS(t.stratum({"0 "}), Error);
}

TEST_CASE("cum_hazard_increment: worked examples") {
  const auto c = constant_table(0.02);
  const auto s = c.stratum({"0"});
  CHECK(c.cum_hazard_increment(s, {50.3, 2010.6}, 3.0) == doctest::Approx(0.06).epsilon(1e-14));
  CHECK(c.cum_hazard_increment(s, {50.3, 2010.6}, 0.0) == 0.0);

  const auto t = small_table();
  const auto s0 = t.stratum({"0"});
  const double v = t.cum_hazard_increment(s0, {70.5, 2012.0}, 1.2);
  CHECK(v == doctest::Approx(0.033).epsilon(1e-14));
  CHECK(v == doctest::Approx(quad_increment(t, s0, {70.5, 2012.0}, 1.2)).epsilon(1e-14));
}

TEST_CASE("cum_hazard_increment: frozen calendar year") {
  const auto t = small_table();
  const auto s0 = t.stratum({"0"});
  // Year fixed at 2012: 0.02 * 0.5 + 0.03 * 0.7.
  CHECK(t.cum_hazard_increment(s0, {70.5, 2012.0}, 1.2, false) ==
        doctest::Approx(0.02 * 0.5 + 0.03 * 0.7).epsilon(1e-14));
}

TEST_CASE("other_cause_time_inverse: worked examples") {
  const auto c = constant_table(0.02);
  const auto s = c.stratum({"0"});
  CHECK(c.other_cause_time_inverse(s, {50.0, 2010.0}, std::exp(-0.06)) ==
        doctest::Approx(3.0).epsilon(1e-12));
  const double tiny = c.other_cause_time_inverse(s, {50.0, 2010.0}, 1.0 - 1e-12);
  CHECK(tiny > 0.0);
  CHECK(tiny < 1e-9);

  const auto t = small_table();
  CHECK(t.other_cause_time_inverse(t.stratum({"0"}), {70.5, 2012.0}, std::exp(-0.033)) ==
        doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("other_cause_time_inverse: extrapolates past the table, zero path errors") {
  const auto t = small_table();
  const auto s0 = t.stratum({"0"});
  // Beyond (71, 2013) the last cell's 0.04 applies.
  const double target = 2.0;
  const double time = t.cum_hazard_inverse(s0, {70.5, 2012.0}, target);
  CHECK(t.cum_hazard_increment(s0, {70.5, 2012.0}, time) == doctest::Approx(target).epsilon(1e-12));

  const auto z = constant_table(0.0, 0, 5, 2000, 2001);
  try {
    z.other_cause_time_inverse(z.stratum({"0"}), {1.0, 2000.0}, 0.5);
    FAIL("expected ZeroHazardPath");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroHazardPath);
  }
}

TEST_CASE("property: quadrature agreement, additivity, monotonicity, exact inverse") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> age(38.0, 62.0), year(1998.0, 2016.0), len(0.0, 15.0),
      unif(0.01, 0.99);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = random_table(rng);
    for (const char* g : {"a", "b"}) {
      const auto s = t.stratum({g});
      for (int k = 0; k < 25; ++k) {
        const LexisPosition p{age(rng), year(rng)};
        const double a = len(rng), b = len(rng);
        const double h = t.cum_hazard_increment(s, p, a);
        const double q = quad_increment(t, s, p, a);
        CHECK(std::abs(h - q) <= 1e-10 * std::max(1.0, q));

        const double whole = t.cum_hazard_increment(s, p, a + b);
        const double split = h + t.cum_hazard_increment(s, {p.age + a, p.year + a}, b);
        CHECK(whole == doctest::Approx(split).epsilon(1e-12));
        CHECK(whole >= h);

        const double u = unif(rng);
        const double tt = t.other_cause_time_inverse(s, p, u);
        CHECK(t.cum_hazard_increment(s, p, tt) == doctest::Approx(-std::log(u)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("property: continuity at cell boundaries") {
  const auto t = small_table();
  const auto s0 = t.stratum({"0"});
  const LexisPosition p{70.5, 2012.0};
  for (double edge : {0.5, 1.0}) {
    const double below = t.cum_hazard_increment(s0, p, edge - 1e-12);
    const double above = t.cum_hazard_increment(s0, p, edge + 1e-12);
    CHECK(std::abs(above - below) < 1e-12);
  }
}
