#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exhaz/lifetable.hpp"

namespace exhaz {

struct PatientRecord {
  double time = 0.0;       // follow-up, years
  int status = 0;          // 1 = death, 0 = censored
  double age_diag = 0.0;   // years
  double year_diag = 0.0;  // calendar time
  std::vector<double> x;   // excess-hazard covariates
  std::vector<std::string> z;  // life-table strata values
};

struct Cohort {
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<PatientRecord> patients;

  void validate() const;
};

// A model covariate derived from one cohort column as (value - center) / scale.
struct CovariateSpec {
  std::string name;
  std::string column;
  double center = 0.0;
  double scale = 1.0;
};

// Column roles for reading a cohort CSV.
struct CohortSchema {
  std::string time = "time";
  std::string status = "status";
  std::string age_diag = "age_diag";
  std::string year_diag = "year_diag";
  std::vector<CovariateSpec> x;
  std::vector<std::string> z;
};

Cohort read_cohort(std::istream& in, const CohortSchema& schema,
                   const std::string& source = "<stream>");
Cohort read_cohort_file(const std::filesystem::path& path, const CohortSchema& schema);

// Writes `time,status,age_diag,year_diag,<x...>,<z...>`.
void write_cohort(std::ostream& out, const Cohort& cohort);

// Per-patient life-table quantities, computed once:
//   dhp = H_P(A+t, y+t) - H_P(A, y) and hp = h_P(A+t, y+t).
// Immutable after construction; the likelihood never touches the table.
class PreparedCohort {
 public:
  PreparedCohort(const Cohort& cohort, const LifeTable& table, bool advance_year = true);

  // Direct construction, mainly for tests and synthetic inputs.
  PreparedCohort(Eigen::MatrixXd x, Eigen::VectorXd time, Eigen::VectorXi status,
                 Eigen::VectorXd hp, Eigen::VectorXd dhp);

  std::size_t size() const { return static_cast<std::size_t>(time_.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t events() const { return events_; }

  std::span<const double> x(std::size_t i) const {
    return {x_.data() + i * dim(), dim()};
  }
  double time(std::size_t i) const { return time_[static_cast<Eigen::Index>(i)]; }
  int status(std::size_t i) const { return status_[static_cast<Eigen::Index>(i)]; }
  double hp(std::size_t i) const { return hp_[static_cast<Eigen::Index>(i)]; }
  double dhp(std::size_t i) const { return dhp_[static_cast<Eigen::Index>(i)]; }
  // Compensated sum of dhp over patients.
  double sum_dhp() const { return sum_dhp_; }

  // Same patients in a different order (used by permutation checks).
  PreparedCohort permuted(std::span<const std::size_t> order) const;

 private:
  void finish();

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix x_;
  Eigen::VectorXd time_;
  Eigen::VectorXi status_;
  Eigen::VectorXd hp_;
  Eigen::VectorXd dhp_;
  std::size_t events_ = 0;
  double sum_dhp_ = 0.0;
};

// Neumaier-compensated accumulator; order-sensitive only at the last ulp.
class KahanSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace exhaz
