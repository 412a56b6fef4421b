#include "exhaz/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "exhaz/error.hpp"

namespace exhaz::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& design_x_names() {
  static const std::vector<std::string> names{"age", "sex", "W"};
  return names;
}

double draw_frailty(const FrailtyLaw& law, Rng& rng) {
  switch (law.index()) {
    case 0: return 1.0;
    case 1: return sample_gamma_frailty(std::get<GammaFrailtyParams>(law), rng);
    case 2: return sample_lognormal_frailty(std::get<LogNormalFrailtyParams>(law), rng);
    default: return std::get<FixedFrailty>(law).value;
  }
}

// Seed for the calibration pilot, kept apart from the replicate streams.
std::uint64_t pilot_seed(std::uint64_t base) { return base ^ 0x9e3779b97f4a7c15ULL; }

struct LatentTimes {
  double event;    // min(T_P, T_E)
  double admin;    // T_C
  double dropout_unit;  // Exp(1) draw; T_D = dropout_unit / r
};

// Draws the patient-level latent quantities in a fixed order so that cohorts
// and the calibration pilot share the same stream layout.
struct PatientDraw {
  double age;
  int sex;
  int w;
  double event_time;
  double dropout_unit;
};

PatientDraw draw_patient(const ScenarioConfig& sc, const LifeTable& table,
                         const std::vector<StratumId>& sex_strata, Rng& rng) {
  const auto& cs = sc.covariates;
  PatientDraw d{};
  // Age from the uniform mixture.
  const double u_mix = uniform01(rng);
  const double u_age = uniform01(rng);
  std::size_t comp = 0;
  double acc = cs.age_weights[0];
  while (comp + 1 < cs.age_weights.size() && u_mix >= acc) acc += cs.age_weights[++comp];
  d.age = cs.age_breaks[comp] + u_age * (cs.age_breaks[comp + 1] - cs.age_breaks[comp]);
  d.sex = uniform01(rng) < cs.sex_probability ? 1 : 0;
  d.w = uniform01(rng) < cs.w_probability ? 1 : 0;

  const double frailty = draw_frailty(sc.frailty, rng);
  const double u_p = uniform01(rng);
  const double u_e = uniform01(rng);
  d.dropout_unit = -std::log(uniform01(rng));

  const double x[3] = {(d.age - cs.age_center) / cs.age_scale, static_cast<double>(d.sex),
                       static_cast<double>(d.w)};
  const double t_e = inverse_excess_survival(u_e, x, sc.truth);
  // Other-cause time under gamma_i * h_P: solve dH_P(t) = -log(u) / gamma_i.
  const LexisPosition start{d.age, sc.diagnosis_year};
  const StratumId s = sex_strata[static_cast<std::size_t>(d.sex)];
  double t_p = std::numeric_limits<double>::infinity();
  const double target = -std::log(u_p) / frailty;
  // Anything past the administrative horizon is censored; skip the walk.
  if (table.cum_hazard_increment(s, start, sc.censoring.admin_time, sc.advance_year) >= target)
    t_p = table.cum_hazard_inverse(s, start, target, sc.advance_year);
  d.event_time = std::min(t_e, t_p);
  return d;
}

std::vector<StratumId> sex_strata(const LifeTable& table) {
  if (table.strata_columns() != std::vector<std::string>{"sex"}) {
    throw Error(ErrorCode::Config,
                "simulation needs a life table stratified by a single `sex` column");
  }
  return {table.stratum({"0"}), table.stratum({"1"})};
}

}  // namespace

std::string describe(const FrailtyLaw& law) {
  switch (law.index()) {
    case 0: return "none";
    case 1: {
      const auto& g = std::get<GammaFrailtyParams>(law);
      return fmt::format("gamma(mu={},b={})", g.mu, g.b);
    }
    case 2: {
      const auto& l = std::get<LogNormalFrailtyParams>(law);
      return fmt::format("lognormal(m={},s={})", l.m, l.s);
    }
    default: return fmt::format("fixed({})", std::get<FixedFrailty>(law).value);
  }
}

double frailty_mean(const FrailtyLaw& law) {
  switch (law.index()) {
    case 0: return 1.0;
    case 1: return std::get<GammaFrailtyParams>(law).mu;
    case 2: {
      const auto& l = std::get<LogNormalFrailtyParams>(law);
      return std::exp(l.m + 0.5 * l.s * l.s);
    }
    default: return std::get<FixedFrailty>(law).value;
  }
}

double frailty_variance(const FrailtyLaw& law) {
  switch (law.index()) {
    case 0: return 0.0;
    case 1: {
      const auto& g = std::get<GammaFrailtyParams>(law);
      return g.mu * g.b;
    }
    case 2: {
      const auto& l = std::get<LogNormalFrailtyParams>(law);
      return std::expm1(l.s * l.s) * std::exp(2.0 * l.m + l.s * l.s);
    }
    default: return 0.0;
  }
}

void ScenarioConfig::validate() const {
  if (n < 1 || replicates < 1) throw Error(ErrorCode::Config, "n and N must be >= 1");
  if (!(censoring.admin_time > 0.0))
    throw Error(ErrorCode::Config, "administrative censoring time must be > 0");
  if (censoring.dropout_rate && !(*censoring.dropout_rate >= 0.0))
    throw Error(ErrorCode::Config, "drop-out rate must be >= 0");
  if (censoring.target_censoring &&
      !(*censoring.target_censoring > 0.0 && *censoring.target_censoring < 1.0))
    throw Error(ErrorCode::Config, "target censoring must be in (0,1)");
  truth.validate();
  if (truth.dim() != 3)
    throw Error(ErrorCode::Config, "the simulation truth needs three coefficients (age, sex, W)");
  const auto& cs = covariates;
  if (cs.age_breaks.size() != cs.age_weights.size() + 1 || cs.age_weights.empty())
    throw Error(ErrorCode::Config, "age mixture needs k weights and k+1 breaks");
  if (!(cs.age_scale != 0.0)) throw Error(ErrorCode::Config, "age scale must be nonzero");
  std::visit(
      [](const auto& law) {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, GammaFrailtyParams> ||
                      std::is_same_v<T, LogNormalFrailtyParams>) {
          law.validate();
        } else if constexpr (std::is_same_v<T, FixedFrailty>) {
          if (!(law.value > 0.0)) throw Error(ErrorCode::Config, "fixed frailty must be > 0");
        }
      },
      frailty);
  fit.validate();
}

GhParams default_truth() {
  GhParams p;
  p.baseline = {0.6, 1.75, 2.5};
  p.beta1 = {0.1, 0.1, 0.1};
  p.beta2 = {0.05, 0.2, 0.25};
  return p;
}

std::vector<ScenarioConfig> builtin_scenarios() {
  struct Law {
    const char* name;
    FrailtyLaw law;
  };
  const std::vector<Law> laws{
      {"none", std::monostate{}},
      {"moderate", GammaFrailtyParams{1.2, 0.02}},
      {"severe", GammaFrailtyParams{1.875, 0.075}},
      {"wide", GammaFrailtyParams{6.5, 10.0}},
  };
  std::vector<ScenarioConfig> out;
  for (const bool dropout : {true, false}) {
    for (const auto& l : laws) {
      ScenarioConfig sc;
      sc.name = dropout ? l.name : fmt::format("{}-admin", l.name);
      sc.truth = default_truth();
      sc.frailty = l.law;
      if (dropout) sc.censoring.target_censoring = 0.30;
      out.push_back(std::move(sc));
    }
  }
  // Moment-matched to the wide Gamma law by default; (m, s) are user-settable.
  ScenarioConfig ln;
  ln.name = "lognormal";
  ln.truth = default_truth();
  const double mean = 6.5, var = 65.0;
  const double s2 = std::log1p(var / (mean * mean));
  ln.frailty = LogNormalFrailtyParams{std::log(mean) - 0.5 * s2, std::sqrt(s2)};
  ln.censoring.target_censoring = 0.30;
  out.push_back(std::move(ln));
  return out;
}

std::optional<ScenarioConfig> find_scenario(const std::string& name) {
  for (auto& sc : builtin_scenarios())
    if (sc.name == name) return sc;
  return std::nullopt;
}

LifeTable reference_life_table() {
  // Central death rates: Makeham constant + Gompertz term anchored at age 70,
  // plus an infant term; 1.5% annual improvement around 2012.
  struct SexCurve {
    double m70, slope, makeham, infant;
  };
  // The level sits above a current national table on purpose: at a plain
  // national level background deaths are too rare to give ~25% administrative
  // censoring in the default design.
  const SexCurve curves[2] = {{0.028, 0.100, 1.5e-4, 3.7e-3},   // sex 0: female
                              {0.044, 0.095, 2.5e-4, 4.5e-3}};  // sex 1: male
  std::vector<LifeTable::Cell> cells;
  for (int sex = 0; sex < 2; ++sex) {
    const auto& c = curves[sex];
    for (int age = 0; age <= 100; ++age) {
      for (int year = 2000; year <= 2030; ++year) {
        double m = c.makeham + c.m70 * std::exp(c.slope * (age + 0.5 - 70.0));
        if (age == 0) m += c.infant;
        m *= std::exp(-0.015 * (year - 2012));
        m = std::min(m, 1.0);
        cells.push_back({age, year, {std::to_string(sex)}, m});
      }
    }
  }
  return LifeTable({"sex"}, cells);
}

Covariates generate_covariates(std::size_t n, Rng& rng, const CovariateScheme& scheme) {
  Covariates cov;
  cov.x.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double u_mix = uniform01(rng);
    const double u_age = uniform01(rng);
    std::size_t comp = 0;
    double acc = scheme.age_weights[0];
    while (comp + 1 < scheme.age_weights.size() && u_mix >= acc) acc += scheme.age_weights[++comp];
    const double age =
        scheme.age_breaks[comp] + u_age * (scheme.age_breaks[comp + 1] - scheme.age_breaks[comp]);
    const int sex = uniform01(rng) < scheme.sex_probability ? 1 : 0;
    const int w = uniform01(rng) < scheme.w_probability ? 1 : 0;
    cov.age.push_back(age);
    cov.sex.push_back(sex);
    cov.w.push_back(w);
    const auto r = static_cast<Eigen::Index>(i);
    cov.x(r, 0) = (age - scheme.age_center) / scheme.age_scale;
    cov.x(r, 1) = sex;
    cov.x(r, 2) = w;
  }
  return cov;
}

Cohort generate_cohort(const ScenarioConfig& sc, std::size_t replicate_index,
                       const LifeTable& table, std::optional<double> dropout_rate) {
  const auto strata = sex_strata(table);
  if (!dropout_rate) dropout_rate = sc.censoring.dropout_rate;
  Rng rng(sc.seed + replicate_index);
  Cohort cohort;
  cohort.x_names = design_x_names();
  cohort.z_names = {"sex"};
  cohort.patients.reserve(sc.n);
  const double t_c = sc.censoring.admin_time;
  for (std::size_t i = 0; i < sc.n; ++i) {
    const auto d = draw_patient(sc, table, strata, rng);
    double censor = t_c;
    if (dropout_rate && *dropout_rate > 0.0) censor = std::min(censor, d.dropout_unit / *dropout_rate);
    PatientRecord rec;
    rec.status = d.event_time <= censor ? 1 : 0;
    rec.time = std::min(d.event_time, censor);
    rec.age_diag = d.age;
    rec.year_diag = sc.diagnosis_year;
    rec.x = {(d.age - sc.covariates.age_center) / sc.covariates.age_scale,
             static_cast<double>(d.sex), static_cast<double>(d.w)};
    rec.z = {std::to_string(d.sex)};
    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

double censoring_proportion(const Cohort& cohort) {
  if (cohort.patients.empty()) return 0.0;
  std::size_t censored = 0;
  for (const auto& p : cohort.patients) censored += p.status == 0 ? 1 : 0;
  return static_cast<double>(censored) / static_cast<double>(cohort.patients.size());
}

DropoutCalibration calibrate_dropout_rate(const ScenarioConfig& sc, double target,
                                          const LifeTable& table, std::size_t pilot_size) {
  if (!(target > 0.0 && target < 1.0))
    throw Error(ErrorCode::Config, "target censoring must be in (0,1)");
  const auto strata = sex_strata(table);
  Rng rng(pilot_seed(sc.seed));
  std::vector<double> event(pilot_size), unit(pilot_size);
  for (std::size_t i = 0; i < pilot_size; ++i) {
    const auto d = draw_patient(sc, table, strata, rng);
    event[i] = d.event_time;
    unit[i] = d.dropout_unit;
  }
  const double t_c = sc.censoring.admin_time;
  auto censoring_at = [&](double r) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < pilot_size; ++i) {
      const double censor = r > 0.0 ? std::min(t_c, unit[i] / r) : t_c;
      c += event[i] <= censor ? 0 : 1;
    }
    return static_cast<double>(c) / static_cast<double>(pilot_size);
  };

  DropoutCalibration out;
  out.pilot_size = pilot_size;
  out.admin_only = censoring_at(0.0);
  if (out.admin_only > target) {
    throw Error(ErrorCode::TargetUnreachable,
                fmt::format("administrative censoring alone gives {:.4f} > target {:.4f}",
                            out.admin_only, target));
  }
  double lo = std::log(1e-6), hi = std::log(10.0);
  if (censoring_at(std::exp(hi)) < target) {
    throw Error(ErrorCode::TargetUnreachable,
                fmt::format("drop-out rate 10 still censors less than {:.4f}", target));
  }
  double r = std::exp(0.5 * (lo + hi));
  double achieved = censoring_at(r);
  for (int it = 0; it < 200 && std::abs(achieved - target) > 0.005; ++it) {
    if (achieved < target)
      lo = std::log(r);
    else
      hi = std::log(r);
    r = std::exp(0.5 * (lo + hi));
    achieved = censoring_at(r);
  }
  out.rate = r;
  out.achieved = achieved;
  return out;
}

std::vector<double> truth_vector(const ScenarioConfig& sc, Model model) {
  std::vector<double> t{sc.truth.baseline.kappa, sc.truth.baseline.theta, sc.truth.baseline.alpha};
  t.insert(t.end(), sc.truth.beta1.begin(), sc.truth.beta1.end());
  t.insert(t.end(), sc.truth.beta2.begin(), sc.truth.beta2.end());
  const double mean = frailty_mean(sc.frailty);
  if (model == Model::M2) t.push_back(mean);
  if (model == Model::M3) {
    t.push_back(mean);
    t.push_back(frailty_variance(sc.frailty) / mean);
  }
  return t;
}

ReplicateOutcome run_replicate(const ScenarioConfig& sc, std::size_t index,
                               const LifeTable& table, std::optional<double> dropout_rate) {
  ReplicateOutcome out;
  try {
    const Cohort cohort = generate_cohort(sc, index, table, dropout_rate);
    out.censoring = censoring_proportion(cohort);
    const PreparedCohort prepared(cohort, table, sc.advance_year);

    FitConfig cfg = sc.fit;
    cfg.seed = sc.seed + index;
    cfg.model = Model::M1;
    out.fits.push_back(fit(prepared, cfg, cohort.x_names));
    cfg.initial_gh = out.fits[0].params(prepared.dim()).gh;
    cfg.model = Model::M2;
    out.fits.push_back(fit(prepared, cfg, cohort.x_names));
    cfg.model = Model::M3;
    out.fits.push_back(fit(prepared, cfg, cohort.x_names));
    try {
      out.m4 = select_m4(out.fits);
    } catch (const Error&) {
      out.m4.reset();
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

namespace {

ParameterMetrics accumulate(const std::string& name, double truth, std::vector<double> est,
                            const std::vector<double>& se, const std::vector<char>& covered) {
  ParameterMetrics m;
  m.name = name;
  m.truth = truth;
  m.count = est.size();
  if (est.empty()) {
    m.mmle = m.mmedian = m.esd = m.mean_se = m.rmse = m.coverage = kNaN;
    return m;
  }
  const double n = static_cast<double>(est.size());
  KahanSum sum, sq, sq_err;
  for (double v : est) sum.add(v);
  m.mmle = sum.value() / n;
  for (double v : est) {
    sq.add((v - m.mmle) * (v - m.mmle));
    sq_err.add((v - truth) * (v - truth));
  }
  m.esd = est.size() > 1 ? std::sqrt(sq.value() / (n - 1.0)) : 0.0;
  m.rmse = std::sqrt(sq_err.value() / n);
  std::sort(est.begin(), est.end());
  const std::size_t mid = est.size() / 2;
  m.mmedian = est.size() % 2 ? est[mid] : 0.5 * (est[mid - 1] + est[mid]);

  m.se_count = se.size();
  if (se.empty()) {
    m.mean_se = m.coverage = kNaN;
  } else {
    KahanSum se_sum;
    for (double v : se) se_sum.add(v);
    m.mean_se = se_sum.value() / static_cast<double>(se.size());
    const auto hits = std::count(covered.begin(), covered.end(), 1);
    m.coverage = static_cast<double>(hits) / static_cast<double>(covered.size());
  }
  return m;
}

}  // namespace

const ModelMetrics& StudyMetrics::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.model == name) return m;
  throw Error(ErrorCode::Config, fmt::format("no metrics for model '{}'", name));
}

const ParameterMetrics& StudyMetrics::parameter(std::string_view model_name,
                                                std::string_view param) const {
  for (const auto& p : model(model_name).parameters)
    if (p.name == param) return p;
  throw Error(ErrorCode::Config, fmt::format("no parameter '{}' in {}", param, model_name));
}

StudyMetrics summarize(const ScenarioConfig& sc, std::vector<ReplicateOutcome> outcomes) {
  StudyMetrics sm;
  sm.scenario = sc.name;
  sm.replicates = outcomes.size();
  const double zq = normal_quantile(0.5 * (1.0 + sc.fit.level));

  KahanSum cens;
  std::size_t ok_count = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    cens.add(o.censoring);
    ++ok_count;
  }
  sm.mean_censoring = ok_count ? cens.value() / static_cast<double>(ok_count) : kNaN;

  const std::vector<std::string>& x_names = design_x_names();
  std::size_t m4_total = 0;
  std::array<std::size_t, 3> selections{};
  for (const auto& o : outcomes)
    if (o.ok && o.m4) {
      ++m4_total;
      ++selections[static_cast<std::size_t>(o.m4->chosen)];
    }

  for (Model model : {Model::M1, Model::M2, Model::M3}) {
    const auto k = static_cast<std::size_t>(model);
    const ParamLayout layout(model, sc.truth.dim());
    const auto names = layout.names(x_names);
    const auto truth = truth_vector(sc, model);
    ModelMetrics mm;
    mm.model = std::string(to_string(model));
    std::vector<std::vector<double>> est(names.size()), se(names.size());
    std::vector<std::vector<char>> cov(names.size());
    for (const auto& o : outcomes) {
      if (!o.ok || !o.fits[k].converged) {
        ++mm.failures;
        continue;
      }
      ++mm.included;
      const auto& f = o.fits[k];
      for (std::size_t j = 0; j < names.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        est[j].push_back(f.estimates[jj]);
        if (f.se_available) {
          se[j].push_back(f.std_errors[jj]);
          cov[j].push_back(std::abs(f.estimates[jj] - truth[j]) <= zq * f.std_errors[jj] ? 1 : 0);
        }
      }
    }
    for (std::size_t j = 0; j < names.size(); ++j)
      mm.parameters.push_back(accumulate(names[j], truth[j], est[j], se[j], cov[j]));
    mm.selected = selections[k];
    mm.selection_proportion =
        m4_total ? static_cast<double>(mm.selected) / static_cast<double>(m4_total) : kNaN;
    sm.models.push_back(std::move(mm));
  }

  // M4: GH parameters of the selected fit, plus the correction summary c.
  {
    const ParamLayout layout(Model::M1, sc.truth.dim());
    auto names = layout.names(x_names);
    auto truth = truth_vector(sc, Model::M1);
    names.emplace_back("c");
    truth.push_back(frailty_mean(sc.frailty));
    ModelMetrics mm;
    mm.model = "M4";
    std::vector<std::vector<double>> est(names.size()), se(names.size());
    std::vector<std::vector<char>> cov(names.size());
    for (const auto& o : outcomes) {
      if (!o.ok || !o.m4) {
        ++mm.failures;
        continue;
      }
      ++mm.included;
      const auto& f = o.fits[o.m4->index];
      for (std::size_t j = 0; j + 1 < names.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        est[j].push_back(f.estimates[jj]);
        if (f.se_available) {
          se[j].push_back(f.std_errors[jj]);
          cov[j].push_back(std::abs(f.estimates[jj] - truth[j]) <= zq * f.std_errors[jj] ? 1 : 0);
        }
      }
      est.back().push_back(o.m4->c_hat);
    }
    for (std::size_t j = 0; j < names.size(); ++j)
      mm.parameters.push_back(accumulate(names[j], truth[j], est[j], se[j], cov[j]));
    mm.selected = m4_total;
    mm.selection_proportion = kNaN;
    sm.models.push_back(std::move(mm));
  }
  sm.outcomes = std::move(outcomes);
  return sm;
}

StudyMetrics run_study(const ScenarioConfig& sc, const LifeTable& table, unsigned jobs,
                       const ProgressFn& progress) {
  sc.validate();
  std::optional<DropoutCalibration> calibration;
  std::optional<double> rate = sc.censoring.dropout_rate;
  if (!rate && sc.censoring.target_censoring) {
    calibration = calibrate_dropout_rate(sc, *sc.censoring.target_censoring, table);
    rate = calibration->rate;
    spdlog::info("{}: calibrated drop-out rate {:.6g} (pilot censoring {:.4f})", sc.name,
                 calibration->rate, calibration->achieved);
  }

  const std::size_t total = sc.replicates;
  std::vector<ReplicateOutcome> outcomes(total);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      outcomes[i] = run_replicate(sc, i, table, rate);
      if (!outcomes[i].ok)
        spdlog::warn("{}: replicate {} failed: {}", sc.name, i, outcomes[i].error);
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, total);
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(total)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  auto sm = summarize(sc, std::move(outcomes));
  sm.calibration = calibration;
  return sm;
}

}  // namespace exhaz::sim
