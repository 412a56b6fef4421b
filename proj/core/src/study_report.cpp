#include "exhaz/study_report.hpp"

#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"

namespace exhaz::sim {

using csv::format_double;

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", p.string()));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

void write_metrics(std::ostream& out, const ModelMetrics& mm) {
  out << "param,truth,mmle,mmedian,esd,mean_se,rmse,coverage\n";
  for (const auto& p : mm.parameters) {
    out << p.name << ',' << format_double(p.truth) << ',' << format_double(p.mmle) << ','
        << format_double(p.mmedian) << ',' << format_double(p.esd) << ','
        << format_double(p.mean_se) << ',' << format_double(p.rmse) << ','
        << format_double(p.coverage) << '\n';
  }
}

std::vector<ParameterMetrics> read_metrics(std::istream& in, const std::string& source) {
  const auto t = csv::read(in, source);
  const char* cols[] = {"truth", "mmle", "mmedian", "esd", "mean_se", "rmse", "coverage"};
  std::size_t idx[7];
  for (int k = 0; k < 7; ++k) idx[k] = t.require_column(cols[k]);
  const auto c_param = t.require_column("param");
  std::vector<ParameterMetrics> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ParameterMetrics p;
    p.name = t.rows[r][c_param];
    double* dst[] = {&p.truth, &p.mmle, &p.mmedian, &p.esd, &p.mean_se, &p.rmse, &p.coverage};
    for (int k = 0; k < 7; ++k) *dst[k] = csv::parse_double(t.rows[r][idx[k]], t, r);
    out.push_back(std::move(p));
  }
  return out;
}

void write_selection(std::ostream& out, const StudyMetrics& sm) {
  out << "model,selected,proportion,included,failures\n";
  for (const auto& m : sm.models) {
    out << m.model << ',' << m.selected << ',' << format_double(m.selection_proportion) << ','
        << m.included << ',' << m.failures << '\n';
  }
}

void write_manifest(std::ostream& out, const ScenarioConfig& sc, const StudyMetrics& sm) {
  const auto& b = sc.truth.baseline;
  out << "scenario = " << sc.name << '\n'
      << "n = " << sc.n << '\n'
      << "N = " << sc.replicates << '\n'
      << "seed = " << sc.seed << '\n'
      << "frailty = " << describe(sc.frailty) << '\n'
      << "truth.kappa = " << format_double(b.kappa) << '\n'
      << "truth.theta = " << format_double(b.theta) << '\n'
      << "truth.alpha = " << format_double(b.alpha) << '\n'
      << "truth.beta1 = " << join(sc.truth.beta1) << '\n'
      << "truth.beta2 = " << join(sc.truth.beta2) << '\n'
      << "age_center = " << format_double(sc.covariates.age_center) << '\n'
      << "age_scale = " << format_double(sc.covariates.age_scale) << '\n'
      << "diagnosis_year = " << format_double(sc.diagnosis_year) << '\n'
      << "advance_year = " << (sc.advance_year ? "true" : "false") << '\n'
      << "admin_time = " << format_double(sc.censoring.admin_time) << '\n';
  if (sc.censoring.target_censoring)
    out << "target_censoring = " << format_double(*sc.censoring.target_censoring) << '\n';
  if (sm.calibration) {
    out << "dropout_rate = " << format_double(sm.calibration->rate) << '\n'
        << "pilot_censoring = " << format_double(sm.calibration->achieved) << '\n'
        << "pilot_admin_only_censoring = " << format_double(sm.calibration->admin_only) << '\n'
        << "pilot_size = " << sm.calibration->pilot_size << '\n';
  } else {
    out << "dropout_rate = " << format_double(sc.censoring.dropout_rate.value_or(0.0)) << '\n';
  }
  std::size_t failed = 0;
  for (const auto& o : sm.outcomes) failed += o.ok ? 0 : 1;
  out << "mean_censoring = " << format_double(sm.mean_censoring) << '\n'
      << "replicate_errors = " << failed << '\n'
      << "fit.gradient_tol = " << format_double(sc.fit.gradient_tol) << '\n'
      << "fit.warm_start = " << (sc.fit.warm_start ? "true" : "false") << '\n'
      << "fit.multistarts = " << sc.fit.multistarts << '\n'
      << "fit.level = " << format_double(sc.fit.level) << '\n';
}

void write_study_report(const std::filesystem::path& dir, const ScenarioConfig& sc,
                        const StudyMetrics& sm) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  for (const auto& m : sm.models) {
    auto out = open_out(dir / (m.model + ".csv"));
    write_metrics(out, m);
  }
  {
    auto out = open_out(dir / "selection.csv");
    write_selection(out, sm);
  }
  auto out = open_out(dir / "manifest.txt");
  write_manifest(out, sc, sm);
}

}  // namespace exhaz::sim
