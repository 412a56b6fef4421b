// exhaz: fit, predict and simulate excess-hazard models with life-table
// mismatch corrections.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "exhaz/cohort.hpp"
#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"
#include "exhaz/estimation.hpp"
#include "exhaz/fit_io.hpp"
#include "exhaz/gh_model.hpp"
#include "exhaz/lifetable.hpp"
#include "exhaz/log.hpp"
#include "exhaz/run_config.hpp"
#include "exhaz/simulation.hpp"
#include "exhaz/study_report.hpp"

namespace fs = std::filesystem;
using namespace exhaz;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonPositive:
    case ErrorCode::TargetUnreachable:
      return kConfigError;
    case ErrorCode::MalformedRow:
    case ErrorCode::MissingCell:
    case ErrorCode::NegativeRate:
    case ErrorCode::DuplicateCell:
    case ErrorCode::UnknownStratum:
    case ErrorCode::Io:
      return kDataError;
    default:
      return kNumericError;
  }
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", p.string()));
  return out;
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig load_or_default(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!c.out.empty()) rc.out_dir = c.out;
  if (c.seed) {
    rc.seed = *c.seed;
    rc.fit.seed = *c.seed;
  }
  return rc;
}

LifeTable load_table(const RunConfig& rc) {
  if (!rc.life_table) throw Error(ErrorCode::Config, "no life table given ([input] life_table)");
  return LifeTable::load_file(*rc.life_table);
}

Cohort load_cohort(const RunConfig& rc) {
  if (!rc.cohort) throw Error(ErrorCode::Config, "no cohort given ([input] cohort)");
  const auto raw = csv::read_file(*rc.cohort);
  rc.validate_columns(raw.header);
  return read_cohort_file(*rc.cohort, rc.schema);
}

std::vector<std::string> x_names_of(const RunConfig& rc) {
  std::vector<std::string> names;
  for (const auto& x : rc.schema.x) names.push_back(x.name);
  return names;
}

int cmd_fit(const Common& common) {
  const RunConfig rc = load_or_default(common);
  const LifeTable table = load_table(rc);
  const Cohort cohort = load_cohort(rc);
  const PreparedCohort prepared(cohort, table, rc.advance_year);
  spdlog::info("{} patients, {} events", prepared.size(), prepared.events());

  auto models = rc.models;
  std::sort(models.begin(), models.end());
  models.erase(std::unique(models.begin(), models.end()), models.end());

  const auto names = x_names_of(rc);
  std::vector<FitResult> fits;
  std::optional<GhParams> m1_start;
  for (Model m : models) {
    FitConfig cfg = rc.fit;
    cfg.model = m;
    if (m != Model::M1 && m1_start) cfg.initial_gh = m1_start;
    auto f = fit(prepared, cfg, names);
    if (m == Model::M1 && f.converged) m1_start = f.params(prepared.dim()).gh;
    for (const auto& w : f.warnings) spdlog::warn("{}: {}", to_string(m), w);
    fits.push_back(std::move(f));
  }

  fs::create_directories(rc.out_dir);
  for (const auto& f : fits) {
    auto out = open_out(rc.out_dir / fmt::format("fit_{}.csv", to_string(f.model)));
    write_fit(out, f, rc.fit.level);
  }
  std::optional<M4Selection> m4;
  try {
    m4 = select_m4(fits);
  } catch (const Error& e) {
    spdlog::warn("no model selected: {}", e.what());
  }
  {
    auto out = open_out(rc.out_dir / "comparison.csv");
    write_comparison(out, fits, m4);
  }

  for (const auto& f : fits) {
    fmt::print("{}: loglik {:.4f}  AIC {:.4f}  converged={}{}\n", to_string(f.model),
               f.loglik_comparable, f.aic, f.converged ? "true" : "false",
               f.se_available ? "" : "  (no standard errors)");
  }
  if (m4) fmt::print("m4: {} (c = {:.4g})\n", to_string(m4->chosen), m4->c_hat);
  fmt::print("wrote {}\n", rc.out_dir.string());
  return kOk;
}

struct PredictArgs {
  std::string fit;
  std::string times;
  std::vector<std::string> profiles;
  std::string output;
};

int cmd_predict(const Common& common, const PredictArgs& args) {
  const RunConfig rc = load_or_default(common);
  fs::path fit_path;
  if (!args.fit.empty())
    fit_path = args.fit;
  else if (rc.fit_file)
    fit_path = *rc.fit_file;
  else
    throw Error(ErrorCode::Config, "no fit file given (--fit or [predict] fit)");

  std::vector<double> times = rc.times;
  if (!args.times.empty()) times = parse_time_grid(args.times);
  if (times.empty()) times = parse_time_grid("0:5:0.1");

  const FitResult f = read_fit_file(fit_path);
  const std::size_t extra = f.model == Model::M3 ? 2 : f.model == Model::M2 ? 1 : 0;
  const std::size_t dim = (f.parameter_count() - 3 - extra) / 2;
  const GhParams gh = f.params(dim).gh;

  std::vector<PredictProfile> profiles = rc.profiles;
  for (const auto& spec : args.profiles) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, fmt::format("profile '{}' must look like id=v1,v2,...", spec));
    PredictProfile p{spec.substr(0, eq), {}};
    for (const auto& v : csv::split(spec.substr(eq + 1))) {
      char* end = nullptr;
      const std::string s(csv::trim(v));
      p.x.push_back(std::strtod(s.c_str(), &end));
      if (s.empty() || end != s.c_str() + s.size())
        throw Error(ErrorCode::Config, fmt::format("bad profile value '{}'", s));
    }
    profiles.push_back(std::move(p));
  }
  if (profiles.empty()) profiles.push_back({"0", std::vector<double>(dim, 0.0)});
  for (const auto& p : profiles) {
    if (p.x.size() != dim)
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("profile '{}' has {} values, the fit has {} covariates", p.id,
                              p.x.size(), dim));
  }

  const fs::path out_path = args.output.empty() ? rc.out_dir / "predict.csv" : fs::path(args.output);
  auto out = open_out(out_path);
  out << "t,profile_id,excess_hazard,net_survival\n";
  for (const auto& p : profiles) {
    for (double t : times) {
      out << csv::format_double(t) << ',' << p.id << ','
          << csv::format_double(excess_hazard(t, p.x, gh)) << ','
          << csv::format_double(net_survival(t, p.x, gh)) << '\n';
    }
  }
  fmt::print("wrote {}\n", out_path.string());
  return kOk;
}

struct SimulateArgs {
  std::string scenario;
  std::optional<std::size_t> n;
  std::optional<std::size_t> N;
  unsigned jobs = 0;
  std::string life_table;
};

sim::ScenarioConfig resolve_scenario(const RunConfig& rc, const SimulateArgs& args,
                                     const Common& common) {
  sim::ScenarioConfig sc;
  if (!args.scenario.empty()) {
    auto found = sim::find_scenario(args.scenario);
    if (!found) {
      throw Error(ErrorCode::Config,
                  fmt::format("unknown scenario '{}' (see `exhaz scenarios`)", args.scenario));
    }
    sc = std::move(*found);
    if (rc.scenario) spdlog::warn("scenario '{}' given; ignoring [simulate] in the config", sc.name);
  } else if (rc.scenario) {
    sc = *rc.scenario;
  } else {
    throw Error(ErrorCode::Config, "no scenario given (positional name or [simulate] in --config)");
  }
  if (args.n) sc.n = *args.n;
  if (args.N) sc.replicates = *args.N;
  if (common.seed) sc.seed = *common.seed;
  sc.fit.seed = sc.seed;
  sc.validate();
  return sc;
}

int cmd_simulate(const Common& common, const SimulateArgs& args) {
  RunConfig rc = load_or_default(common);
  if (common.out.empty() && common.config.empty()) rc.out_dir = "exhaz-out";
  const auto sc = resolve_scenario(rc, args, common);
  const LifeTable table = !args.life_table.empty() ? LifeTable::load_file(args.life_table)
                          : rc.life_table           ? LifeTable::load_file(*rc.life_table)
                                                    : sim::reference_life_table();
  unsigned jobs = args.jobs ? args.jobs : std::max(1u, std::thread::hardware_concurrency());

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t last = 0;
  auto progress = [&](std::size_t done, std::size_t total) {
    const std::size_t pct = 100 * done / total;
    if (pct / 10 != last / 10 || done == total) {
      spdlog::info("{}: {}/{} replicates", sc.name, done, total);
      last = pct;
    }
  };
  const auto sm = sim::run_study(sc, table, jobs, progress);
  sim::write_study_report(rc.out_dir, sc, sm);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (const auto& m : sm.models) {
    fmt::print("{}: {} included, {} failed", m.model, m.included, m.failures);
    if (m.model != "M4") fmt::print(", AIC-selected {:.3f}", m.selection_proportion);
    fmt::print("\n");
  }
  fmt::print("mean censoring {:.4f}\n", sm.mean_censoring);
  fmt::print("wrote {}\n", rc.out_dir.string());
  std::cerr << fmt::format("wall time {:.1f}s with {} job(s)\n", wall, jobs);
  return kOk;
}

int cmd_scenarios() {
  for (const auto& sc : sim::builtin_scenarios()) {
    std::string censoring = fmt::format("administrative at {}y", sc.censoring.admin_time);
    if (sc.censoring.target_censoring)
      censoring += fmt::format(" + drop-out to {:.0f}%", 100 * *sc.censoring.target_censoring);
    fmt::print("{:<16} frailty {:<28} {}\n", sc.name, sim::describe(sc.frailty), censoring);
  }
  return kOk;
}

struct GenerateArgs {
  std::string scenario = "none";
  std::size_t n = 1000;
  std::size_t replicate = 0;
  std::optional<double> dropout_rate;
  std::string output = "cohort.csv";
};

int cmd_generate(const Common& common, const GenerateArgs& args) {
  auto sc = sim::find_scenario(args.scenario);
  if (!sc) throw Error(ErrorCode::Config, fmt::format("unknown scenario '{}'", args.scenario));
  sc->n = args.n;
  if (common.seed) sc->seed = *common.seed;
  sc->validate();
  const auto table = sim::reference_life_table();
  std::optional<double> rate = args.dropout_rate;
  if (!rate && sc->censoring.target_censoring)
    rate = sim::calibrate_dropout_rate(*sc, *sc->censoring.target_censoring, table).rate;
  const auto cohort = sim::generate_cohort(*sc, args.replicate, table, rate);
  auto out = open_out(args.output);
  write_cohort(out, cohort);
  fmt::print("wrote {} ({} patients, censoring {:.3f})\n", args.output, cohort.patients.size(),
             sim::censoring_proportion(cohort));
  return kOk;
}

int cmd_lifetable(const std::string& output) {
  auto out = open_out(output);
  sim::reference_life_table().save(out);
  fmt::print("wrote {}\n", output);
  return kOk;
}

int cmd_validate(const Common& common) {
  const RunConfig rc = load_or_default(common);
  if (rc.life_table) {
    const LifeTable table = load_table(rc);
    fmt::print("life table: ages {}-{}, years {}-{}, {} strata\n", table.age_min(),
               table.age_max(), table.year_min(), table.year_max(), table.stratum_count());
    if (rc.cohort) {
      const Cohort cohort = load_cohort(rc);
      const PreparedCohort prepared(cohort, table, rc.advance_year);
      fmt::print("cohort: {} patients, {} events, {} covariates\n", prepared.size(),
                 prepared.events(), prepared.dim());
    }
  } else if (rc.cohort) {
    const Cohort cohort = load_cohort(rc);
    fmt::print("cohort: {} patients (no life table to check strata against)\n",
               cohort.patients.size());
  }
  if (rc.scenario) {
    rc.scenario->validate();
    fmt::print("scenario '{}': n={}, N={}\n", rc.scenario->name, rc.scenario->n,
               rc.scenario->replicates);
  }
  fmt::print("ok\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Excess hazard regression with life-table mismatch corrections"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", common.config, "Run configuration file");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--seed", common.seed, "Base RNG seed");
  };

  auto* fit_cmd = app.add_subcommand("fit", "Fit M1/M2/M3 to a cohort");
  add_common(fit_cmd);
  fit_cmd->get_option("--config")->required();

  PredictArgs pargs;
  auto* predict_cmd = app.add_subcommand("predict", "Excess hazard and net survival curves");
  add_common(predict_cmd);
  predict_cmd->add_option("--fit", pargs.fit, "Fit file written by `fit`");
  predict_cmd->add_option("--times", pargs.times, "start:stop:step or t1,t2,...");
  predict_cmd->add_option("--profile", pargs.profiles, "id=x1,x2,... (repeatable)");
  predict_cmd->add_option("--output", pargs.output, "Output CSV (default <out>/predict.csv)");

  SimulateArgs sargs;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation study");
  add_common(sim_cmd);
  sim_cmd->add_option("scenario", sargs.scenario, "Preset name (see `scenarios`)");
  sim_cmd->add_option("--n", sargs.n, "Cohort size");
  sim_cmd->add_option("--N", sargs.N, "Number of replicates");
  sim_cmd->add_option("--jobs", sargs.jobs, "Worker threads (default: all cores)");
  sim_cmd->add_option("--life-table", sargs.life_table, "Life table CSV (default: built-in)");

  app.add_subcommand("scenarios", "List built-in scenarios");

  auto* validate_cmd = app.add_subcommand("validate", "Check a config and its inputs");
  add_common(validate_cmd);
  validate_cmd->get_option("--config")->required();

  GenerateArgs gargs;
  auto* gen_cmd = app.add_subcommand("generate", "Write one synthetic cohort CSV");
  add_common(gen_cmd, false);
  gen_cmd->add_option("scenario", gargs.scenario, "Preset name");
  gen_cmd->add_option("--n", gargs.n, "Cohort size");
  gen_cmd->add_option("--replicate", gargs.replicate, "Replicate index (seed offset)");
  gen_cmd->add_option("--dropout-rate", gargs.dropout_rate, "Fixed drop-out rate");
  gen_cmd->add_option("--output", gargs.output, "Output CSV");

  std::string lt_out = "lifetable.csv";
  auto* lt_cmd = app.add_subcommand("lifetable", "Write the built-in synthetic life table");
  lt_cmd->add_option("--output", lt_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*fit_cmd) return cmd_fit(common);
    if (*predict_cmd) return cmd_predict(common, pargs);
    if (*sim_cmd) return cmd_simulate(common, sargs);
    if (app.got_subcommand("scenarios")) return cmd_scenarios();
    if (*validate_cmd) return cmd_validate(common);
    if (*gen_cmd) return cmd_generate(common, gargs);
    if (*lt_cmd) return cmd_lifetable(lt_out);
  } catch (const NonFiniteLikelihood& e) {
    std::cerr << "error: " << e.what() << " (patient " << e.patient_index() << ")\n";
    return kNumericError;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}
