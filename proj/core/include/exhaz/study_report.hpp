#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "exhaz/simulation.hpp"

namespace exhaz::sim {

// Writes M1.csv .. M4.csv, selection.csv and manifest.txt into `dir`.
// Nothing time- or host-dependent goes into the files, so identical
// (config, seed) runs produce identical bytes.
void write_study_report(const std::filesystem::path& dir, const ScenarioConfig& sc,
                        const StudyMetrics& sm);

// `param,truth,mmle,mmedian,esd,mean_se,rmse,coverage`
void write_metrics(std::ostream& out, const ModelMetrics& mm);
std::vector<ParameterMetrics> read_metrics(std::istream& in, const std::string& source = "<stream>");

// `model,selected,proportion,included,failures`
void write_selection(std::ostream& out, const StudyMetrics& sm);

void write_manifest(std::ostream& out, const ScenarioConfig& sc, const StudyMetrics& sm);

}  // namespace exhaz::sim
