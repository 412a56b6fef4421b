#include "exhaz/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "exhaz/csv.hpp"
#include "exhaz/error.hpp"

namespace exhaz {

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line;
};

class Parser {
 public:
  Parser(std::string source, std::filesystem::path base) : source_(std::move(source)), base_(std::move(base)) {}

  [[noreturn]] void fail(const Entry& e, const std::string& msg) const {
    throw Error(ErrorCode::Config, fmt::format("{}:{}: [{}] {}: {}", source_, e.line, e.section,
                                               e.key, msg));
  }

  double number(const Entry& e) const {
    return number(e, e.value);
  }
  double number(const Entry& e, std::string_view text) const {
    const auto t = csv::trim(text);
    double v = 0.0;
    char* end = nullptr;
    const std::string s(t);
    v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
      fail(e, fmt::format("'{}' is not a finite number", s));
    return v;
  }
  long integer(const Entry& e) const {
    const double v = number(e);
    if (v != std::floor(v) || v < 0) fail(e, "expected a non-negative integer");
    return static_cast<long>(v);
  }
  bool boolean(const Entry& e) const {
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(e, fmt::format("'{}' is not a boolean", e.value));
  }
  std::vector<std::string> list(const Entry& e) const {
    std::vector<std::string> out;
    for (auto& s : csv::split(e.value))
      if (!s.empty()) out.push_back(s);
    return out;
  }
  std::vector<double> numbers(const Entry& e) const {
    std::vector<double> out;
    std::string text = e.value;
    std::replace(text.begin(), text.end(), ' ', ',');
    for (auto& s : csv::split(text))
      if (!s.empty()) out.push_back(number(e, s));
    return out;
  }
  std::filesystem::path path(const Entry& e) const {
    std::filesystem::path p(e.value);
    return p.is_absolute() || base_.empty() ? p : base_ / p;
  }

 private:
  std::string source_;
  std::filesystem::path base_;
};

sim::FrailtyLaw parse_frailty(const Parser& ps, const Entry& e) {
  std::string text = e.value;
  std::replace(text.begin(), text.end(), ',', ' ');
  std::vector<std::string> parts;
  for (auto& s : csv::split(text, ' '))
    if (!s.empty()) parts.push_back(s);
  if (parts.empty()) ps.fail(e, "empty frailty law");
  const auto& kind = parts[0];
  auto arg = [&](std::size_t i) { return ps.number(e, parts[i]); };
  if (kind == "none" && parts.size() == 1) return std::monostate{};
  if (kind == "gamma" && parts.size() == 3) return GammaFrailtyParams{arg(1), arg(2)};
  if (kind == "lognormal" && parts.size() == 3) return LogNormalFrailtyParams{arg(1), arg(2)};
  if (kind == "fixed" && parts.size() == 2) return sim::FixedFrailty{arg(1)};
  ps.fail(e, "expected `none`, `gamma MU B`, `lognormal M S` or `fixed V`");
}

void apply_fit_key(const Parser& ps, const Entry& e, RunConfig& rc, FitConfig& fit) {
  const auto& k = e.key;
  if (k == "models") {
    rc.models.clear();
    for (const auto& m : ps.list(e)) {
      try {
        rc.models.push_back(parse_model(m));
      } catch (const Error& err) {
        ps.fail(e, err.what());
      }
    }
    if (rc.models.empty()) ps.fail(e, "no models listed");
  } else if (k == "gradient_tol") {
    fit.gradient_tol = ps.number(e);
  } else if (k == "step_tol") {
    fit.step_tol = ps.number(e);
  } else if (k == "max_evaluations") {
    fit.max_evaluations = static_cast<int>(ps.integer(e));
  } else if (k == "warm_start") {
    fit.warm_start = ps.boolean(e);
  } else if (k == "multistarts") {
    fit.multistarts = static_cast<int>(ps.integer(e));
  } else if (k == "multistart_sd") {
    fit.multistart_sd = ps.number(e);
  } else if (k == "level") {
    fit.level = ps.number(e);
  } else if (k == "hessian_step") {
    fit.hessian_step = ps.number(e);
  } else if (k == "initial_gamma") {
    fit.initial_gamma = ps.number(e);
  } else if (k == "initial_mu") {
    fit.initial_mu = ps.number(e);
  } else if (k == "initial_b") {
    fit.initial_b = ps.number(e);
  } else {
    ps.fail(e, "unknown key");
  }
  // Earlier keys already passed, so a range failure belongs to this line.
  try {
    fit.validate();
  } catch (const Error& err) {
    ps.fail(e, err.what());
  }
}

void apply_simulate_key(const Parser& ps, const Entry& e, sim::ScenarioConfig& sc) {
  const auto& k = e.key;
  if (k == "scenario") {
    // handled before the other keys
  } else if (k == "name") {
    sc.name = e.value;
  } else if (k == "n") {
    sc.n = static_cast<std::size_t>(ps.integer(e));
  } else if (k == "N") {
    sc.replicates = static_cast<std::size_t>(ps.integer(e));
  } else if (k == "seed") {
    sc.seed = static_cast<std::uint64_t>(ps.integer(e));
  } else if (k == "frailty") {
    sc.frailty = parse_frailty(ps, e);
  } else if (k == "admin_time") {
    sc.censoring.admin_time = ps.number(e);
  } else if (k == "dropout_rate") {
    sc.censoring.dropout_rate = ps.number(e);
    sc.censoring.target_censoring.reset();
  } else if (k == "target_censoring") {
    sc.censoring.target_censoring = ps.number(e);
    sc.censoring.dropout_rate.reset();
  } else if (k == "admin_only") {
    if (ps.boolean(e)) {
      sc.censoring.target_censoring.reset();
      sc.censoring.dropout_rate.reset();
    }
  } else if (k == "age_center") {
    sc.covariates.age_center = ps.number(e);
  } else if (k == "age_scale") {
    sc.covariates.age_scale = ps.number(e);
  } else if (k == "age_breaks") {
    sc.covariates.age_breaks = ps.numbers(e);
  } else if (k == "age_weights") {
    sc.covariates.age_weights = ps.numbers(e);
  } else if (k == "sex_probability") {
    sc.covariates.sex_probability = ps.number(e);
  } else if (k == "w_probability") {
    sc.covariates.w_probability = ps.number(e);
  } else if (k == "diagnosis_year") {
    sc.diagnosis_year = ps.number(e);
  } else if (k == "advance_year") {
    sc.advance_year = ps.boolean(e);
  } else if (k == "truth.kappa") {
    sc.truth.baseline.kappa = ps.number(e);
  } else if (k == "truth.theta") {
    sc.truth.baseline.theta = ps.number(e);
  } else if (k == "truth.alpha") {
    sc.truth.baseline.alpha = ps.number(e);
  } else if (k == "truth.beta1") {
    sc.truth.beta1 = ps.numbers(e);
  } else if (k == "truth.beta2") {
    sc.truth.beta2 = ps.numbers(e);
  } else {
    ps.fail(e, "unknown key");
  }
}

}  // namespace

void RunConfig::validate_columns(const std::vector<std::string>& header) const {
  auto need = [&](const std::string& col, const char* role) {
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw Error(ErrorCode::Config,
                  fmt::format("{} column '{}' not found in the cohort", role, col));
  };
  need(schema.time, "time");
  need(schema.status, "status");
  need(schema.age_diag, "age_diag");
  need(schema.year_diag, "year_diag");
  for (const auto& x : schema.x) {
    need(x.column, "x");
    if (!std::isfinite(x.center) || !std::isfinite(x.scale) || x.scale == 0.0)
      throw Error(ErrorCode::Config, fmt::format("bad transform for '{}'", x.name));
  }
  for (const auto& z : schema.z) need(z, "z");
}

RunConfig parse_run_config(std::istream& in, const std::string& source,
                           const std::filesystem::path& base_dir) {
  static const std::set<std::string> sections{"input",  "columns", "transform", "fit",
                                              "output", "predict", "simulate"};
  std::vector<Entry> entries;
  std::string section = "input";
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    auto text = std::string(csv::trim(std::string_view(raw).substr(0, hash)));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw Error(ErrorCode::Config, fmt::format("{}:{}: unterminated section header", source, line));
      section = std::string(csv::trim(std::string_view(text).substr(1, text.size() - 2)));
      if (!sections.count(section))
        throw Error(ErrorCode::Config, fmt::format("{}:{}: unknown section [{}]", source, line, section));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, fmt::format("{}:{}: expected `key = value`", source, line));
    entries.push_back({section, std::string(csv::trim(std::string_view(text).substr(0, eq))),
                       std::string(csv::trim(std::string_view(text).substr(eq + 1))), line});
  }

  Parser ps(source, base_dir);
  RunConfig rc;
  rc.source = source;
  std::map<std::string, std::pair<double, double>> transforms;  // column -> center, scale
  std::vector<std::string> x_columns;

  // The scenario preset is the base that the other [simulate] keys modify.
  for (const auto& e : entries) {
    if (e.section == "simulate" && e.key == "scenario") {
      auto sc = sim::find_scenario(e.value);
      if (!sc) ps.fail(e, fmt::format("unknown scenario '{}'", e.value));
      rc.scenario = std::move(*sc);
    }
  }

  for (const auto& e : entries) {
    const auto& k = e.key;
    if (e.section == "input") {
      if (k == "cohort") rc.cohort = ps.path(e);
      else if (k == "life_table") rc.life_table = ps.path(e);
      else if (k == "advance_year") rc.advance_year = ps.boolean(e);
      else ps.fail(e, "unknown key");
    } else if (e.section == "columns") {
      if (k == "time") rc.schema.time = e.value;
      else if (k == "status") rc.schema.status = e.value;
      else if (k == "age_diag") rc.schema.age_diag = e.value;
      else if (k == "year_diag") rc.schema.year_diag = e.value;
      else if (k == "x") x_columns = ps.list(e);
      else if (k == "z") rc.schema.z = ps.list(e);
      else ps.fail(e, "unknown key");
    } else if (e.section == "transform") {
      const auto dot = k.rfind('.');
      if (dot == std::string::npos) ps.fail(e, "expected `<column>.center` or `<column>.scale`");
      const auto col = k.substr(0, dot);
      const auto what = k.substr(dot + 1);
      auto& tr = transforms.try_emplace(col, 0.0, 1.0).first->second;
      if (what == "center") tr.first = ps.number(e);
      else if (what == "scale") {
        tr.second = ps.number(e);
        if (tr.second == 0.0) ps.fail(e, "scale must be nonzero");
      } else ps.fail(e, "expected `.center` or `.scale`");
    } else if (e.section == "fit") {
      apply_fit_key(ps, e, rc, rc.fit);
    } else if (e.section == "output") {
      if (k == "dir") rc.out_dir = ps.path(e);
      else if (k == "seed") rc.seed = static_cast<std::uint64_t>(ps.integer(e));
      else ps.fail(e, "unknown key");
    } else if (e.section == "predict") {
      if (k == "fit") rc.fit_file = ps.path(e);
      else if (k == "times") {
        try {
          rc.times = parse_time_grid(e.value);
        } catch (const Error& err) {
          ps.fail(e, err.what());
        }
      } else if (k.rfind("profile.", 0) == 0) {
        rc.profiles.push_back({k.substr(8), ps.numbers(e)});
      } else ps.fail(e, "unknown key");
    } else if (e.section == "simulate") {
      if (!rc.scenario) {
        sim::ScenarioConfig sc;
        sc.truth = sim::default_truth();
        rc.scenario = std::move(sc);
      }
      apply_simulate_key(ps, e, *rc.scenario);
    }
  }

  for (const auto& col : x_columns) {
    CovariateSpec spec{col, col, 0.0, 1.0};
    if (auto it = transforms.find(col); it != transforms.end()) {
      spec.center = it->second.first;
      spec.scale = it->second.second;
      transforms.erase(it);
    }
    rc.schema.x.push_back(spec);
  }
  if (!transforms.empty())
    throw Error(ErrorCode::Config,
                fmt::format("{}: transform for '{}' which is not an x column", source,
                            transforms.begin()->first));
  rc.fit.seed = rc.seed;
  rc.fit.validate();
  if (rc.scenario) {
    rc.scenario->fit = rc.fit;
    rc.scenario->fit.seed = rc.scenario->seed;
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open config '{}'", path.string()));
  return parse_run_config(in, path.string(), path.parent_path());
}

std::vector<double> parse_time_grid(const std::string& text) {
  std::vector<double> out;
  auto num = [&](std::string_view s) {
    const std::string t(csv::trim(s));
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v) || v < 0.0)
      throw Error(ErrorCode::Config, fmt::format("bad time value '{}'", t));
    return v;
  };
  if (text.find(':') != std::string::npos) {
    const auto parts = csv::split(text, ':');
    if (parts.size() != 3) throw Error(ErrorCode::Config, "time grid must be start:stop:step");
    const double a = num(parts[0]), b = num(parts[1]), h = num(parts[2]);
    if (!(h > 0.0) || b < a) throw Error(ErrorCode::Config, "time grid needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * h);
  } else {
    for (const auto& s : csv::split(text)) out.push_back(num(s));
  }
  if (out.empty()) throw Error(ErrorCode::Config, "empty time grid");
  return out;
}

}  // namespace exhaz
