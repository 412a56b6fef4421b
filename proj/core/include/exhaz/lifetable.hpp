#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace exhaz {

// Index of one strata combination inside a LifeTable.
struct StratumId {
  std::size_t value = 0;
  friend bool operator==(StratumId, StratumId) = default;
};

// Point on the Lexis plane: age and calendar year move together during follow-up.
struct LexisPosition {
  double age = 0.0;
  double year = 0.0;
};

// Background mortality rates on 1-year age x 1-year calendar cells, one grid
// per strata combination. Rates are piecewise constant; queries outside the
// declared ranges clamp to the nearest boundary cell. Immutable after load.
class LifeTable {
 public:
  struct Cell {
    int age;
    int year;
    std::vector<std::string> strata;
    double rate;
  };

  // Validates completeness and uniqueness; ranges are inferred from the cells.
  LifeTable(std::vector<std::string> strata_columns, const std::vector<Cell>& cells);

  // CSV with header `age,year,<strata...>,rate`; `#` lines ignored.
  static LifeTable load(std::istream& in, const std::string& source = "<stream>");
  static LifeTable load_file(const std::filesystem::path& path);
  void save(std::ostream& out) const;

  const std::vector<std::string>& strata_columns() const { return strata_columns_; }
  int age_min() const { return age_min_; }
  int age_max() const { return age_max_; }
  int year_min() const { return year_min_; }
  int year_max() const { return year_max_; }
  std::size_t stratum_count() const { return strata_.size(); }
  std::size_t cell_count() const { return rates_.size(); }

  // Throws UnknownStratum when the value vector is not in the table.
  StratumId stratum(const std::vector<std::string>& values) const;
  const std::vector<std::string>& stratum_values(StratumId id) const;

  double rate_at(StratumId s, LexisPosition pos) const;

  // Exact integral of the rate along the path from `start` to start + (t, t).
  // With advance_year == false the calendar year stays at start.year.
  double cum_hazard_increment(StratumId s, LexisPosition start, double t,
                              bool advance_year = true) const;

  // Smallest t with cum_hazard_increment(s, start, t) == target (target >= 0).
  double cum_hazard_inverse(StratumId s, LexisPosition start, double target,
                            bool advance_year = true) const;

  // Inverse-transform draw of the other-cause time for a uniform u in (0, 1).
  double other_cause_time_inverse(StratumId s, LexisPosition start, double u,
                                  bool advance_year = true) const {
    return cum_hazard_inverse(s, start, -std::log(u), advance_year);
  }

 private:
  double cell_rate(StratumId s, int age, int year) const;

  template <typename Visitor>
  void walk_diagonal(StratumId s, LexisPosition start, bool advance_year,
                     Visitor&& visit) const;

  std::vector<std::string> strata_columns_;
  std::vector<std::vector<std::string>> strata_;
  std::map<std::vector<std::string>, std::size_t> strata_index_;
  int age_min_ = 0, age_max_ = 0, year_min_ = 0, year_max_ = 0;
  std::vector<double> rates_;  // [stratum][age - age_min][year - year_min]
};

}  // namespace exhaz
