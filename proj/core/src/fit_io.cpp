#include "exhaz/fit_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"

namespace exhaz {

using csv::format_double;

void write_fit(std::ostream& out, const FitResult& fit, double level) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Interval> ci;
  if (fit.se_available) ci = confidence_intervals(fit, level);
  out << "name,estimate,std_error,ci_lo,ci_hi\n";
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double se = fit.se_available ? fit.std_errors[jj] : nan;
    const double lo = ci.empty() ? nan : ci[j].lo;
    const double hi = ci.empty() ? nan : ci[j].hi;
    out << fit.names[j] << ',' << format_double(fit.estimates[jj]) << ',' << format_double(se)
        << ',' << format_double(lo) << ',' << format_double(hi) << '\n';
  }
  out << "loglik," << format_double(fit.loglik) << ",nan,nan,nan\n"
      << "loglik_comparable," << format_double(fit.loglik_comparable) << ",nan,nan,nan\n"
      << "aic," << format_double(fit.aic) << ",nan,nan,nan\n"
      << "converged," << (fit.converged ? 1 : 0) << ",nan,nan,nan\n"
      << "model," << to_string(fit.model) << ",nan,nan,nan\n";
}

FitResult read_fit(std::istream& in, const std::string& source) {
  const auto t = csv::read(in, source);
  const auto c_name = t.require_column("name");
  const auto c_est = t.require_column("estimate");
  const auto c_se = t.require_column("std_error");
  FitResult f;
  std::vector<double> est, se;
  std::optional<Model> footer_model;
  bool converged = true;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& name = t.rows[r][c_name];
    const auto& value = t.rows[r][c_est];
    if (name == "model") {
      try {
        footer_model = parse_model(value);
      } catch (const Error&) {
        throw Error(ErrorCode::MalformedRow,
                    fmt::format("{}:{}: unknown model '{}'", source, t.line_numbers[r], value));
      }
    } else if (name == "loglik") {
      f.loglik = csv::parse_double(value, t, r);
    } else if (name == "loglik_comparable") {
      f.loglik_comparable = csv::parse_double(value, t, r);
    } else if (name == "aic") {
      f.aic = csv::parse_double(value, t, r);
    } else if (name == "converged") {
      converged = csv::parse_int(value, t, r) != 0;
    } else {
      f.names.push_back(name);
      est.push_back(csv::parse_double(value, t, r));
      se.push_back(csv::parse_double(t.rows[r][c_se], t, r));
    }
  }
  const bool has_gamma = std::find(f.names.begin(), f.names.end(), "gamma") != f.names.end();
  const bool has_mu = std::find(f.names.begin(), f.names.end(), "mu") != f.names.end();
  f.model = has_mu ? Model::M3 : has_gamma ? Model::M2 : Model::M1;
  if (footer_model && *footer_model != f.model)
    throw Error(ErrorCode::MalformedRow,
                fmt::format("{}: model row says {} but the parameters are those of {}", source,
                            to_string(*footer_model), to_string(f.model)));
  const std::size_t extra = f.model == Model::M3 ? 2 : f.model == Model::M2 ? 1 : 0;
  if (f.names.size() < 3 + extra || (f.names.size() - 3 - extra) % 2 != 0) {
    throw Error(ErrorCode::MalformedRow,
                fmt::format("{}: {} parameters do not form a {} fit", source, f.names.size(),
                            to_string(f.model)));
  }
  const std::size_t dim = (f.names.size() - 3 - extra) / 2;
  const auto expected = ParamLayout(f.model, dim).names({});
  for (std::size_t j = 0; j < 3; ++j) {
    if (f.names[j] != expected[j])
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("{}:{}: expected parameter '{}', found '{}'", source,
                              t.line_numbers[j], expected[j], f.names[j]));
  }
  f.estimates = Eigen::Map<Eigen::VectorXd>(est.data(), static_cast<Eigen::Index>(est.size()));
  f.std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
  f.se_available = std::all_of(se.begin(), se.end(), [](double v) { return std::isfinite(v); });
  f.converged = converged;
  return f;
}

FitResult read_fit_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open fit file '{}'", path.string()));
  return read_fit(in, path.string());
}

void write_comparison(std::ostream& out, std::span<const FitResult> fits,
                      const std::optional<M4Selection>& m4) {
  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fits[a].aic < fits[b].aic; });
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : fits)
    if (f.converged) best = std::min(best, f.aic);
  out << "model,k,loglik,aic,delta_aic,converged,choice,c_hat\n";
  for (std::size_t i : order) {
    const auto& f = fits[i];
    out << to_string(f.model) << ',' << f.parameter_count() << ','
        << format_double(f.loglik_comparable) << ',' << format_double(f.aic) << ','
        << format_double(f.aic - best) << ',' << (f.converged ? 1 : 0) << ",-,nan\n";
  }
  if (m4) {
    const auto& f = fits[m4->index];
    out << "m4," << f.parameter_count() << ',' << format_double(f.loglik_comparable) << ','
        << format_double(f.aic) << ',' << format_double(f.aic - best) << ','
        << (f.converged ? 1 : 0) << ',' << to_string(m4->chosen) << ','
        << format_double(m4->c_hat) << '\n';
  }
}

}  // namespace exhaz
