#include "exhaz/lifetable.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"

namespace exhaz {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LifeTable::LifeTable(std::vector<std::string> strata_columns,
                     const std::vector<Cell>& cells)
    : strata_columns_(std::move(strata_columns)) {
  if (cells.empty()) throw Error(ErrorCode::MissingCell, "life table has no cells");

  age_min_ = year_min_ = std::numeric_limits<int>::max();
  age_max_ = year_max_ = std::numeric_limits<int>::min();
  for (const auto& c : cells) {
    if (c.strata.size() != strata_columns_.size()) {
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("cell (age {}, year {}) has {} strata values, expected {}",
                              c.age, c.year, c.strata.size(), strata_columns_.size()));
    }
    if (!std::isfinite(c.rate)) {
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("non-finite rate at age {}, year {}", c.age, c.year));
    }
    if (c.rate < 0.0) {
      throw Error(ErrorCode::NegativeRate,
                  fmt::format("negative rate {} at age {}, year {}, strata [{}]", c.rate,
                              c.age, c.year, fmt::join(c.strata, ",")));
    }
    age_min_ = std::min(age_min_, c.age);
    age_max_ = std::max(age_max_, c.age);
    year_min_ = std::min(year_min_, c.year);
    year_max_ = std::max(year_max_, c.year);
    if (strata_index_.emplace(c.strata, strata_.size()).second) strata_.push_back(c.strata);
  }

  const std::size_t n_age = static_cast<std::size_t>(age_max_ - age_min_ + 1);
  const std::size_t n_year = static_cast<std::size_t>(year_max_ - year_min_ + 1);
  rates_.assign(strata_.size() * n_age * n_year, -1.0);
  for (const auto& c : cells) {
    const std::size_t idx = (strata_index_.at(c.strata) * n_age +
                             static_cast<std::size_t>(c.age - age_min_)) * n_year +
                            static_cast<std::size_t>(c.year - year_min_);
    if (rates_[idx] >= 0.0) {
      throw Error(ErrorCode::DuplicateCell,
                  fmt::format("duplicate cell age {}, year {}, strata [{}]", c.age, c.year,
                              fmt::join(c.strata, ",")));
    }
    rates_[idx] = c.rate;
  }
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    for (std::size_t a = 0; a < n_age; ++a) {
      for (std::size_t y = 0; y < n_year; ++y) {
        if (rates_[(s * n_age + a) * n_year + y] < 0.0) {
          throw Error(ErrorCode::MissingCell,
                      fmt::format("missing cell age {}, year {}, strata [{}]",
                                  age_min_ + static_cast<int>(a),
                                  year_min_ + static_cast<int>(y),
                                  fmt::join(strata_[s], ",")));
        }
      }
    }
  }
}

LifeTable LifeTable::load(std::istream& in, const std::string& source) {
  const auto t = csv::read(in, source);
  const auto age_col = t.require_column("age");
  const auto year_col = t.require_column("year");
  const auto rate_col = t.require_column("rate");

  std::vector<std::string> strata_columns;
  std::vector<std::size_t> strata_idx;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i == age_col || i == year_col || i == rate_col) continue;
    strata_columns.push_back(t.header[i]);
    strata_idx.push_back(i);
  }

  std::vector<Cell> cells;
  cells.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Cell c;
    c.age = static_cast<int>(csv::parse_int(row[age_col], t, r));
    c.year = static_cast<int>(csv::parse_int(row[year_col], t, r));
    c.rate = csv::parse_double(row[rate_col], t, r);
    for (auto i : strata_idx) c.strata.push_back(row[i]);
    cells.push_back(std::move(c));
  }
  return LifeTable(std::move(strata_columns), cells);
}

LifeTable LifeTable::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return load(in, path.string());
}

StratumId LifeTable::stratum(const std::vector<std::string>& values) const {
  auto it = strata_index_.find(values);
  if (it == strata_index_.end()) {
    throw Error(ErrorCode::UnknownStratum,
                fmt::format("stratum [{}] not present in life table (columns [{}])",
                            fmt::join(values, ","), fmt::join(strata_columns_, ",")));
  }
  return StratumId{it->second};
}

const std::vector<std::string>& LifeTable::stratum_values(StratumId id) const {
  return strata_.at(id.value);
}

void LifeTable::save(std::ostream& out) const {
  out << "age,year";
  for (const auto& c : strata_columns_) out << ',' << c;
  out << ",rate\n";
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    for (int a = age_min_; a <= age_max_; ++a) {
      for (int y = year_min_; y <= year_max_; ++y) {
        out << a << ',' << y;
        for (const auto& v : strata_[s]) out << ',' << v;
        out << ',' << csv::format_double(cell_rate(StratumId{s}, a, y)) << '\n';
      }
    }
  }
}

double LifeTable::cell_rate(StratumId s, int age, int year) const {
  age = std::clamp(age, age_min_, age_max_);
  year = std::clamp(year, year_min_, year_max_);
  const std::size_t n_age = static_cast<std::size_t>(age_max_ - age_min_ + 1);
  const std::size_t n_year = static_cast<std::size_t>(year_max_ - year_min_ + 1);
  return rates_[(s.value * n_age + static_cast<std::size_t>(age - age_min_)) * n_year +
                static_cast<std::size_t>(year - year_min_)];
}

double LifeTable::rate_at(StratumId s, LexisPosition pos) const {
  if (s.value >= strata_.size())
    throw Error(ErrorCode::UnknownStratum, "stratum id out of range");
  return cell_rate(s, static_cast<int>(std::floor(pos.age)),
                   static_cast<int>(std::floor(pos.year)));
}

// Visits constant-rate segments [s0, s1) of the diagonal starting at `start`.
// Only crossings that change the clamped cell produce a new segment; the last
// segment is unbounded. The visitor returns false to stop.
template <typename Visitor>
void LifeTable::walk_diagonal(StratumId s, LexisPosition start, bool advance_year,
                              Visitor&& visit) const {
  if (s.value >= strata_.size())
    throw Error(ErrorCode::UnknownStratum, "stratum id out of range");

  long ia = static_cast<long>(std::floor(start.age));
  long iy = static_cast<long>(std::floor(start.year));
  auto next_break = [](long idx, long lo, long hi, double origin) {
    if (idx >= hi) return kInf;
    const long k = std::max(idx + 1, lo + 1);
    return static_cast<double>(k) - origin;
  };

  double s0 = 0.0;
  while (true) {
    const double sa = next_break(ia, age_min_, age_max_, start.age);
    const double sy =
        advance_year ? next_break(iy, year_min_, year_max_, start.year) : kInf;
    const double s1 = std::min(sa, sy);
    const double rate = cell_rate(s, static_cast<int>(std::clamp<long>(ia, age_min_, age_max_)),
                                  static_cast<int>(std::clamp<long>(iy, year_min_, year_max_)));
    if (!visit(s0, s1, rate) || s1 == kInf) return;
    if (sa == s1) ia = std::max(ia + 1, static_cast<long>(age_min_) + 1);
    if (sy == s1) iy = std::max(iy + 1, static_cast<long>(year_min_) + 1);
    s0 = s1;
  }
}

double LifeTable::cum_hazard_increment(StratumId s, LexisPosition start, double t,
                                       bool advance_year) const {
  if (!(t >= 0.0)) throw Error(ErrorCode::Config, "cum_hazard_increment: t must be >= 0");
  double total = 0.0;
  walk_diagonal(s, start, advance_year, [&](double s0, double s1, double rate) {
    const double end = std::min(s1, t);
    if (end > s0) total += rate * (end - s0);
    return s1 < t;
  });
  return total;
}

double LifeTable::cum_hazard_inverse(StratumId s, LexisPosition start, double target,
                                     bool advance_year) const {
  if (!(target >= 0.0)) throw Error(ErrorCode::Config, "cum_hazard_inverse: negative target");
  if (target == 0.0) return 0.0;
  double acc = 0.0;
  double result = kInf;
  walk_diagonal(s, start, advance_year, [&](double s0, double s1, double rate) {
    if (rate > 0.0) {
      const double need = (target - acc) / rate;
      if (s0 + need <= s1) {
        result = s0 + need;
        return false;
      }
      acc += rate * (s1 - s0);
    }
    return true;
  });
  if (result == kInf) {
    throw Error(ErrorCode::ZeroHazardPath,
                "cumulative background hazard never reaches the target on this path");
  }
  return result;
}

}  // namespace exhaz
