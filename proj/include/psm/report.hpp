#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psm/metrics.hpp"
#include "psm/pipeline.hpp"

namespace psm {

// One verdict as a JSONL line (no trailing newline). Key order is part of
// the output contract: t, class, e_imp, metric.
std::string verdict_json_line(const SafetyVerdict& verdict);

void write_verdicts_jsonl(const std::vector<SafetyVerdict>& verdicts, const std::string& path);
void write_errors_csv(const AnalysisResult& result, std::optional<TraceLabel> label,
                      const std::string& path);
void write_reference_csv(const AnalysisResult& result, const std::string& path);
void write_spectra_csv(const AnalysisResult& result, double sample_rate,
                       const std::string& path);
std::string freq_report_json(const FrequencyErrorReport& report);

// Reads back an errors.csv produced above: label comment plus the e_imp
// and t columns. Used by the session report command.
struct ErrorsFile {
    std::optional<TraceLabel> label;
    std::vector<double> t;
    std::vector<double> e_imp;
};
ErrorsFile read_errors_csv(const std::string& path);

}  // namespace psm
