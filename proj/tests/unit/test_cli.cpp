#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include "exhaz/csv.hpp"
#include "exhaz/distributions.hpp"
#include "exhaz/fit_io.hpp"

namespace fs = std::filesystem;
using namespace exhaz;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::current_path() / "cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int status;
  std::string err;
};

Run run(const std::string& args) {
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && '" + EXHAZ_CLI + "' " + args + " 2> '" + err.string() + "' > /dev/null";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

void write(const fs::path& name, const std::string& text) { std::ofstream(workdir() / name) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

csv::Table table(const fs::path& name) { return csv::read_file(workdir() / name); }

const char* kConfig = R"([input]
cohort = cohort.csv
life_table = lt.csv

[columns]
x = age_diag, sex, W
z = sex

[transform]
age_diag.center = 70

[fit]
models = {}

[output]
dir = {}
)";

std::string config(const std::string& models, const std::string& dir) {
  std::string s = kConfig;
  s.replace(s.find("{}"), 2, models);
  s.replace(s.find("{}"), 2, dir);
  return s;
}

void prepare() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("lifetable --output lt.csv").status == 0);
  REQUIRE(run("generate none --n 200 --seed 3 --output cohort.csv").status == 0);
  REQUIRE(run("generate wide --n 1500 --seed 5 --output cohort_wide.csv").status == 0);
  done = true;
}

}  // namespace

TEST_CASE("fit: minimal M1 run emits estimates with finite SEs") {
  prepare();
  write("m1.cfg", config("M1", "fit_m1"));
  const auto r = run("fit --config m1.cfg");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto f = read_fit_file(workdir() / "fit_m1" / "fit_M1.csv");
  CHECK(f.model == Model::M1);
  CHECK(f.names.size() == 9);
  CHECK(f.names[0] == "kappa");
  CHECK(f.names[2] == "alpha");
  CHECK(f.se_available);
  for (Eigen::Index j = 0; j < f.std_errors.size(); ++j) CHECK(std::isfinite(f.std_errors[j]));
}

TEST_CASE("fit: three models give a comparison table with an m4 row") {
  prepare();
  std::string cfg = config("M1, M2, M3", "fit_all");
  cfg.replace(cfg.find("cohort.csv"), 10, "cohort_wide.csv");
  write("all.cfg", cfg);
  const auto r = run("fit --config all.cfg");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto t = table("fit_all/comparison.csv");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows.back()[0] == "m4");
  double prev = -1e300;
  for (std::size_t i = 0; i < 3; ++i) {
    const double aic = std::stod(t.rows[i][3]);
    CHECK(aic >= prev);
    prev = aic;
  }
  CHECK(t.rows[0][4] == "0");
  for (const char* m : {"M1", "M2", "M3"}) CHECK(fs::exists(workdir() / "fit_all" / (std::string("fit_") + m + ".csv")));
}

TEST_CASE("fit: a missing column fails naming it") {
  prepare();
  std::string cfg = config("M1", "fit_bad");
  cfg.replace(cfg.find("z = sex"), 7, "z = region");
  write("bad.cfg", cfg);
  const auto r = run("fit --config bad.cfg");
  CHECK(r.status == 2);
  CHECK(r.err.find("region") != std::string::npos);
  CHECK(run("validate --config bad.cfg").status == 2);
  write("good.cfg", config("M1", "fit_good"));
  CHECK(run("validate --config good.cfg").status == 0);
}

TEST_CASE("exit codes") {
  prepare();
  write("syntax.cfg", "[fit]\nlevel = 2\n");
  CHECK(run("fit --config syntax.cfg").status == 2);
  std::string cfg = config("M1", "fit_nodata");
  cfg.replace(cfg.find("cohort.csv"), 10, "absent.csv");
  write("nodata.cfg", cfg);
  CHECK(run("fit --config nodata.cfg").status == 3);
  write("broken.csv", "time,status,age_diag,year_diag,age,sex,W\n1,1,70,2012,0,x,0\n");
  cfg = config("M1", "fit_broken");
  cfg.replace(cfg.find("cohort.csv"), 10, "broken.csv");
  write("broken.cfg", cfg);
  CHECK(run("fit --config broken.cfg").status == 3);
  CHECK(run("simulate no-such-scenario --n 10 --N 1").status == 2);
  CHECK(run("scenarios").status == 0);
}

TEST_CASE("predict: baseline, t = 0 and PH ordering") {
  prepare();
  FitResult f;
  f.model = Model::M1;
  f.names = ParamLayout(Model::M1, 2).names({"a", "b"});
  f.estimates = (Eigen::VectorXd(7) << 0.6, 1.75, 2.5, 0.1, 0.0, 0.05, 0.25).finished();
  f.std_errors = Eigen::VectorXd::Constant(7, 0.01);
  f.se_available = f.converged = true;
  {
    std::ofstream out(workdir() / "ph_fit.csv");
    write_fit(out, f, 0.95);
  }
  const auto r = run("predict --fit ph_fit.csv --times 0:5:0.25 --profile base=0,0 --profile exposed=0,1 --output pred.csv");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto t = table("pred.csv");
  CHECK(t.header == std::vector<std::string>{"t", "profile_id", "excess_hazard", "net_survival"});
  std::map<std::string, std::vector<double>> surv;
  const EwParams ew{0.6, 1.75, 2.5};
  for (const auto& row : t.rows) {
    const double time = std::stod(row[0]), s = std::stod(row[3]);
    surv[row[1]].push_back(s);
    if (time == 0.0) CHECK(s == 1.0);
    if (row[1] == "base") CHECK(s == doctest::Approx(std::exp(ew_log_survival(time, ew))).epsilon(1e-12));
  }
  REQUIRE(surv["base"].size() == 21);
  for (std::size_t i = 1; i < 21; ++i) CHECK(surv["exposed"][i] < surv["base"][i]);

  CHECK(run("predict --fit ph_fit.csv --profile p=1,2,3 --output x.csv").status == 2);
}

TEST_CASE("simulate: smoke run writes six files, twice identically") {
  const auto a = run("simulate none --n 1000 --N 5 --seed 2 --out sim_a");
  INFO(a.err);
  REQUIRE(a.status == 0);
  REQUIRE(run("simulate none --n 1000 --N 5 --seed 2 --out sim_b").status == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(workdir() / "sim_a")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(workdir() / "sim_b" / e.path().filename()));
  }
  CHECK(files == 6);
  for (const char* f : {"M1.csv", "M2.csv", "M3.csv", "M4.csv", "selection.csv", "manifest.txt"})
    CHECK(fs::exists(workdir() / "sim_a" / f));
}
