#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtester/metrics.hpp"

namespace vtester {

inline constexpr int kReportSchemaVersion = 1;

/// Artifact files an analysis may read. Any subset may be given.
struct AnalysisInputs {
    std::optional<std::filesystem::path> trace;
    std::optional<std::filesystem::path> rx_encoded;
    std::optional<std::filesystem::path> rx_raw;
    std::optional<std::filesystem::path> ref_raw;
    std::optional<std::filesystem::path> decode_report;
    std::optional<std::filesystem::path> session;

    bool any() const;
    /// The standard artifact files of a run directory that exist.
    static AnalysisInputs from_directory(const std::filesystem::path& dir);
};

/// Loads every given artifact. The reference encoding is rebuilt from the
/// reference video with the stream parameters of the received stream (or of
/// the session file). Throws ConfigError when no input is given.
AnalysisContext load_context(const AnalysisInputs& inputs, const AnalysisOptions& options);

struct ReportMeta {
    AnalysisInputs inputs;
    std::map<std::string, std::string> provenance;
    std::optional<std::string> trace_note;
};

/// Reads the trace note of the session file, if any.
ReportMeta make_report_meta(const AnalysisInputs& inputs, std::map<std::string, std::string> provenance);

nlohmann::json report_json(std::span<const MeasureOutcome> outcomes, const AnalysisOptions& options,
                           const ReportMeta& meta);
/// Columns measure,name,kind,x,y; one row per value, point or bin of every
/// successful measure. measure is the meter, name the measure.
std::string report_csv(std::span<const MeasureOutcome> outcomes);
/// `# name units` header, then one "x y" line per point or bin.
std::string gnuplot_data(const MeasureResult& result);

struct WrittenReport {
    std::filesystem::path json_path;
    std::filesystem::path csv_path;
    std::vector<std::filesystem::path> data_paths;
};

/// report.json, report.csv and plots/<meter>_<name>.dat for every series or
/// histogram.
WrittenReport write_reports(const std::filesystem::path& dir, std::span<const MeasureOutcome> outcomes,
                            const AnalysisOptions& options, const ReportMeta& meta);

struct AnalysisRun {
    std::vector<MeasureOutcome> outcomes;
    WrittenReport written;
};

/// Loads the inputs, runs the selected measures (all when `measures` is
/// empty) and writes the reports into out_dir.
AnalysisRun analyze_artifacts(const AnalysisInputs& inputs, const AnalysisOptions& options,
                              std::span<const std::string> measures,
                              const std::map<std::string, std::string>& provenance,
                              const std::filesystem::path& out_dir);

/// Percentage of frames at MOS 1..5 (index 0..4).
using MosLevels = std::array<double, 5>;
std::optional<MosLevels> mos_levels(std::span<const MeasureOutcome> outcomes);

/// Stacked-bar data: "# run mos1 mos2 mos3 mos4 mos5", then one row per run.
std::string mos_stacked_data(std::span<const std::pair<std::string, MosLevels>> runs);

/// Formats a double so that it parses back to the same value.
std::string exact(double v);

}  // namespace vtester
