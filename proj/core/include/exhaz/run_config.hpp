#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "exhaz/cohort.hpp"
#include "exhaz/estimation.hpp"
#include "exhaz/simulation.hpp"

namespace exhaz {

struct PredictProfile {
  std::string id;
  std::vector<double> x;  // model scale (after any transform)
};

// Everything a CLI run needs. See README for the file grammar.
struct RunConfig {
  std::filesystem::path source;

  // [input]
  std::optional<std::filesystem::path> cohort;
  std::optional<std::filesystem::path> life_table;
  bool advance_year = true;

  // [columns] and [transform]
  CohortSchema schema;

  // [fit]
  std::vector<Model> models{Model::M1};
  FitConfig fit;

  // [output]
  std::filesystem::path out_dir = "exhaz-out";
  std::uint64_t seed = 1;

  // [predict]
  std::optional<std::filesystem::path> fit_file;
  std::vector<double> times;
  std::vector<PredictProfile> profiles;

  // [simulate]
  std::optional<sim::ScenarioConfig> scenario;

  // Referenced columns exist in the cohort header; transforms are finite
  // with nonzero scale.
  void validate_columns(const std::vector<std::string>& cohort_header) const;
};

RunConfig parse_run_config(std::istream& in, const std::string& source = "<stream>",
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// "a:b:step" or "t1,t2,...".
std::vector<double> parse_time_grid(const std::string& text);

}  // namespace exhaz
