#include "exhaz/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"

namespace exhaz {

void Cohort::validate() const {
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const auto& p = patients[i];
    if (!(p.time > 0.0) || !std::isfinite(p.time))
      throw Error(ErrorCode::MalformedRow, fmt::format("patient {}: time must be > 0", i));
    if (p.status != 0 && p.status != 1)
      throw Error(ErrorCode::MalformedRow, fmt::format("patient {}: status must be 0 or 1", i));
    if (p.x.size() != x_names.size() || p.z.size() != z_names.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("patient {}: covariate/strata count does not match names", i));
    }
  }
}

Cohort read_cohort(std::istream& in, const CohortSchema& schema, const std::string& source) {
  const auto t = csv::read(in, source);
  const auto c_time = t.require_column(schema.time);
  const auto c_status = t.require_column(schema.status);
  const auto c_age = t.require_column(schema.age_diag);
  const auto c_year = t.require_column(schema.year_diag);
  std::vector<std::size_t> c_x, c_z;
  for (const auto& spec : schema.x) {
    if (!(spec.scale != 0.0) || !std::isfinite(spec.scale) || !std::isfinite(spec.center)) {
      throw Error(ErrorCode::Config,
                  fmt::format("covariate '{}': transform needs finite center and nonzero scale",
                              spec.name));
    }
    c_x.push_back(t.require_column(spec.column));
  }
  for (const auto& name : schema.z) c_z.push_back(t.require_column(name));

  Cohort cohort;
  for (const auto& spec : schema.x) cohort.x_names.push_back(spec.name);
  cohort.z_names = schema.z;
  cohort.patients.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    PatientRecord p;
    p.time = csv::parse_double(row[c_time], t, r);
    p.status = static_cast<int>(csv::parse_int(row[c_status], t, r));
    p.age_diag = csv::parse_double(row[c_age], t, r);
    p.year_diag = csv::parse_double(row[c_year], t, r);
    if (!(p.time > 0.0) || !std::isfinite(p.time)) {
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("{}:{}: follow-up time must be > 0", source, t.line_numbers[r]));
    }
    if (p.status != 0 && p.status != 1) {
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("{}:{}: status must be 0 or 1", source, t.line_numbers[r]));
    }
    for (std::size_t j = 0; j < c_x.size(); ++j) {
      const auto& spec = schema.x[j];
      p.x.push_back((csv::parse_double(row[c_x[j]], t, r) - spec.center) / spec.scale);
    }
    for (auto c : c_z) p.z.push_back(row[c]);
    cohort.patients.push_back(std::move(p));
  }
  return cohort;
}

Cohort read_cohort_file(const std::filesystem::path& path, const CohortSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return read_cohort(in, schema, path.string());
}

void write_cohort(std::ostream& out, const Cohort& cohort) {
  // A strata column that is also a covariate (e.g. sex) is written once.
  std::vector<bool> z_written(cohort.z_names.size(), true);
  for (std::size_t k = 0; k < cohort.z_names.size(); ++k)
    z_written[k] = std::find(cohort.x_names.begin(), cohort.x_names.end(), cohort.z_names[k]) ==
                   cohort.x_names.end();
  out << "time,status,age_diag,year_diag";
  for (const auto& n : cohort.x_names) out << ',' << n;
  for (std::size_t k = 0; k < cohort.z_names.size(); ++k)
    if (z_written[k]) out << ',' << cohort.z_names[k];
  out << '\n';
  for (const auto& p : cohort.patients) {
    out << csv::format_double(p.time) << ',' << p.status << ','
        << csv::format_double(p.age_diag) << ',' << csv::format_double(p.year_diag);
    for (double v : p.x) out << ',' << csv::format_double(v);
    for (std::size_t k = 0; k < p.z.size(); ++k)
      if (z_written[k]) out << ',' << p.z[k];
    out << '\n';
  }
}

PreparedCohort::PreparedCohort(const Cohort& cohort, const LifeTable& table,
                               bool advance_year) {
  cohort.validate();
  const auto n = static_cast<Eigen::Index>(cohort.patients.size());
  const auto p = static_cast<Eigen::Index>(cohort.x_names.size());
  x_.resize(n, p);
  time_.resize(n);
  status_.resize(n);
  hp_.resize(n);
  dhp_.resize(n);

  // Map cohort strata columns onto the table's column order.
  std::vector<std::size_t> order;
  for (const auto& col : table.strata_columns()) {
    std::size_t k = 0;
    while (k < cohort.z_names.size() && cohort.z_names[k] != col) ++k;
    if (k == cohort.z_names.size()) {
      throw Error(ErrorCode::Config,
                  fmt::format("cohort has no strata column '{}' required by the life table", col));
    }
    order.push_back(k);
  }

  std::vector<std::string> key(order.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = cohort.patients[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < order.size(); ++k) key[k] = rec.z[order[k]];
    StratumId s;
    try {
      s = table.stratum(key);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("patient row {}: {}", i + 1, e.what()));
    }
    const LexisPosition start{rec.age_diag, rec.year_diag};
    const LexisPosition end{rec.age_diag + rec.time,
                            advance_year ? rec.year_diag + rec.time : rec.year_diag};
    for (Eigen::Index j = 0; j < p; ++j) x_(i, j) = rec.x[static_cast<std::size_t>(j)];
    time_[i] = rec.time;
    status_[i] = rec.status;
    hp_[i] = table.rate_at(s, end);
    dhp_[i] = table.cum_hazard_increment(s, start, rec.time, advance_year);
  }
  finish();
}

PreparedCohort::PreparedCohort(Eigen::MatrixXd x, Eigen::VectorXd time, Eigen::VectorXi status,
                               Eigen::VectorXd hp, Eigen::VectorXd dhp)
    : x_(std::move(x)),
      time_(std::move(time)),
      status_(std::move(status)),
      hp_(std::move(hp)),
      dhp_(std::move(dhp)) {
  const auto n = time_.size();
  if (x_.rows() != n || status_.size() != n || hp_.size() != n || dhp_.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "prepared cohort columns differ in length");
  finish();
}

void PreparedCohort::finish() {
  events_ = 0;
  KahanSum acc;
  for (Eigen::Index i = 0; i < time_.size(); ++i) {
    if (!(time_[i] > 0.0)) throw Error(ErrorCode::MalformedRow, "follow-up time must be > 0");
    if (!(hp_[i] >= 0.0) || !(dhp_[i] >= 0.0))
      throw Error(ErrorCode::NegativeRate, "background hazard quantities must be >= 0");
    events_ += status_[i] == 1 ? 1 : 0;
    acc.add(dhp_[i]);
  }
  sum_dhp_ = acc.value();
}

PreparedCohort PreparedCohort::permuted(std::span<const std::size_t> order) const {
  const auto n = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXd x(n, x_.cols());
  Eigen::VectorXd time(n), hp(n), dhp(n);
  Eigen::VectorXi status(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
    x.row(i) = x_.row(k);
    time[i] = time_[k];
    status[i] = status_[k];
    hp[i] = hp_[k];
    dhp[i] = dhp_[k];
  }
  return PreparedCohort(std::move(x), std::move(time), std::move(status), std::move(hp),
                        std::move(dhp));
}

}  // namespace exhaz
