#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"
#include "vtester/error.hpp"
#include "vtester/report.hpp"

using namespace vtester;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

AnalysisOptions options_with_g1070() {
    AnalysisOptions o;
    o.g1070 = vq::G1070Coefficients{
        {1.431, 2.228e-2, 3.759, 184.1, 1.161, 1.446, 3.881e-4, 2.116, 467.4, 2.736, 15.28, 4.170}};
    return o;
}

// 60 CIF-quarter frames, GOP 15, packets 7 and 40 dropped.
fs::path artifacts(const fixtures::TempDir& tmp) {
    const fs::path dir = tmp / "run";
    fixtures::write_offline_artifacts(dir, moving_square(176, 144, 60, 32, 3), 15, {7, 40});
    return dir;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(cell);
    return out;
}

}  // namespace

TEST(Inputs, FromDirectoryFindsStandardFiles) {
    fixtures::TempDir tmp("report_inputs");
    const fs::path dir = artifacts(tmp);
    const auto in = AnalysisInputs::from_directory(dir);
    EXPECT_EQ(in.trace, dir / kTraceFile);
    EXPECT_EQ(in.session, dir / kSessionFile);
    fs::remove(dir / kRxRawFile);
    EXPECT_FALSE(AnalysisInputs::from_directory(dir).rx_raw.has_value());
    EXPECT_FALSE(AnalysisInputs::from_directory(tmp / "empty").any());
}

TEST(Inputs, NoneGivenIsAnError) {
    EXPECT_THROW(load_context(AnalysisInputs{}, AnalysisOptions{}), ConfigError);
}

TEST(Inputs, ContextLoadsEveryArtifact) {
    fixtures::TempDir tmp("report_ctx");
    const auto ctx = load_context(AnalysisInputs::from_directory(artifacts(tmp)), AnalysisOptions{});
    ASSERT_TRUE(ctx.packet_records.has_value());
    EXPECT_FALSE(ctx.packet_records->empty());
    ASSERT_TRUE(ctx.ref_encoded.has_value());
    EXPECT_EQ(ctx.ref_encoded->frames.size(), 60u);
    EXPECT_EQ(ctx.rx_raw->frames.size(), 60u);
    ASSERT_TRUE(ctx.session_meta.has_value());
    EXPECT_EQ(ctx.session_meta->gop_size, 15);
    EXPECT_EQ(ctx.rtt_samples->size(), 2u);
}

TEST(Report, JsonAndCsvAgree) {
    fixtures::TempDir tmp("report_agree");
    const fs::path dir = artifacts(tmp);
    const auto run = analyze_artifacts(AnalysisInputs::from_directory(dir), options_with_g1070(), {}, {},
                                       tmp / "out");
    const auto doc = nlohmann::json::parse(slurp(run.written.json_path));
    ASSERT_EQ(doc.at("measures").size(), 17u);

    std::map<std::string, std::vector<std::pair<double, double>>> csv;
    std::istringstream lines(slurp(run.written.csv_path));
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "measure,name,kind,x,y");
    while (std::getline(lines, line)) {
        const auto cells = split(line, ',');
        ASSERT_EQ(cells.size(), 5u) << line;
        csv[cells[0] + "." + cells[1]].emplace_back(std::stod(cells[3]), std::stod(cells[4]));
    }

    size_t ok = 0;
    for (const auto& m : doc.at("measures")) {
        const std::string key = m.at("meter").get<std::string>() + "." + m.at("name").get<std::string>();
        if (m.at("status") != "ok") {
            EXPECT_FALSE(csv.count(key)) << key;
            continue;
        }
        ++ok;
        const auto& rows = csv.at(key);
        if (m.contains("value")) {
            ASSERT_EQ(rows.size(), 1u);
            EXPECT_NEAR(rows[0].second, m.at("value").get<double>(), 1e-12) << key;
        } else {
            const auto& pts = m.contains("points") ? m.at("points") : m.at("bins");
            ASSERT_EQ(rows.size(), pts.size()) << key;
            for (size_t i = 0; i < rows.size(); ++i) {
                EXPECT_NEAR(rows[i].first, pts[i][0].get<double>(), 1e-12) << key;
                EXPECT_NEAR(rows[i].second, pts[i][1].get<double>(), 1e-12) << key;
            }
        }
    }
    EXPECT_EQ(ok, 17u);
}

TEST(Report, MappingsRecorded) {
    fixtures::TempDir tmp("report_map");
    const auto run = analyze_artifacts(AnalysisInputs::from_directory(artifacts(tmp)), options_with_g1070(),
                                       {}, {{"g1070", "fix.conf:12"}}, tmp / "out");
    const auto doc = nlohmann::json::parse(slurp(run.written.json_path));
    EXPECT_EQ(doc.at("schema_version"), kReportSchemaVersion);
    const auto& m = doc.at("mappings");
    EXPECT_EQ(m.at("mos_table").at("rows").size(), 4u);
    EXPECT_EQ(m.at("mos_table").at("source"), "built-in");
    EXPECT_EQ(m.at("g1070").at("source"), "fix.conf:12");
    EXPECT_EQ(m.at("g1070").at("coefficients").size(), 12u);
    EXPECT_EQ(m.at("pld_intervals").at("value"), 10);
    EXPECT_TRUE(m.contains("div"));
    EXPECT_TRUE(m.contains("iframe_loss_rate"));
}

TEST(Report, TraceOnlyAnalysis) {
    fixtures::TempDir tmp("report_trace");
    const fs::path dir = artifacts(tmp);
    AnalysisInputs in;
    in.trace = dir / kTraceFile;
    const auto run = analyze_artifacts(in, AnalysisOptions{}, {}, {}, tmp / "out");
    for (const auto& o : run.outcomes) {
        if (o.meter == "qos" && o.name != "latency")
            EXPECT_TRUE(o.ok()) << o.name << ": " << o.reason;
        else
            EXPECT_EQ(o.status, OutcomeStatus::skipped) << o.meter << "." << o.name;
    }
    const auto doc = nlohmann::json::parse(slurp(run.written.json_path));
    EXPECT_TRUE(doc.at("inputs").at("rx_raw").is_null());
    for (const auto& m : doc.at("measures"))
        if (m.at("status") == "skipped") {
            EXPECT_EQ(m.at("reason").get<std::string>().rfind("missing ", 0), 0u);
        }
}

TEST(Report, PlrMatchesDroppedPackets) {
    fixtures::TempDir tmp("report_plr");
    const fs::path dir = artifacts(tmp);
    const std::vector<std::string> sel{"plr"};
    const auto run = analyze_artifacts(AnalysisInputs::from_directory(dir), AnalysisOptions{}, sel, {}, tmp / "out");
    const double received = static_cast<double>(load_context(AnalysisInputs::from_directory(dir), {}).packet_records->size());
    EXPECT_DOUBLE_EQ(std::get<double>(run.outcomes[0].result->data), 2.0 / received);
}

TEST(Report, Deterministic) {
    fixtures::TempDir tmp("report_det");
    const fs::path dir = artifacts(tmp);
    const auto a = analyze_artifacts(AnalysisInputs::from_directory(dir), options_with_g1070(), {}, {}, tmp / "a");
    const auto b = analyze_artifacts(AnalysisInputs::from_directory(dir), options_with_g1070(), {}, {}, tmp / "b");
    EXPECT_EQ(slurp(a.written.json_path), slurp(b.written.json_path));
    EXPECT_EQ(slurp(a.written.csv_path), slurp(b.written.csv_path));
    ASSERT_EQ(a.written.data_paths.size(), b.written.data_paths.size());
    for (size_t i = 0; i < a.written.data_paths.size(); ++i)
        EXPECT_EQ(slurp(a.written.data_paths[i]), slurp(b.written.data_paths[i]));
}

TEST(Report, FailedMeasureKeepsReason) {
    std::vector<MeasureOutcome> out(1);
    out[0].meter = "qos";
    out[0].name = "plr";
    out[0].status = OutcomeStatus::failed;
    out[0].reason = "reordering";
    const auto doc = report_json(out, AnalysisOptions{}, ReportMeta{});
    EXPECT_EQ(doc.at("measures")[0].at("status"), "failed");
    EXPECT_EQ(doc.at("measures")[0].at("reason"), "reordering");
    EXPECT_EQ(report_csv(out), "measure,name,kind,x,y\n");
}

TEST(Report, NonFiniteBecomesNull) {
    std::vector<MeasureOutcome> out(1);
    out[0].meter = "vq";
    out[0].name = "x";
    out[0].status = OutcomeStatus::ok;
    out[0].result = MeasureResult::value("x", "", std::nan(""));
    EXPECT_TRUE(report_json(out, AnalysisOptions{}, ReportMeta{}).at("measures")[0].at("value").is_null());
}

TEST(Gnuplot, SeriesFormat) {
    const auto r = MeasureResult::series("psnr", "dB", {{0, 100}, {1, 37.5}});
    EXPECT_EQ(gnuplot_data(r), "# psnr dB\n0 100\n1 37.5\n");
}

TEST(Exact, RoundTrips) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng);
        EXPECT_EQ(std::stod(exact(v)), v);
    }
}

TEST(MosLevelsTest, PercentagesAndStackedData) {
    std::vector<MeasureOutcome> out(1);
    out[0].meter = "vq";
    out[0].name = "mos";
    out[0].status = OutcomeStatus::ok;
    out[0].result = MeasureResult::indexed("mos", "score", std::vector<double>{5, 5, 4, 1});
    const auto levels = mos_levels(out);
    ASSERT_TRUE(levels.has_value());
    EXPECT_EQ(*levels, (MosLevels{25, 0, 0, 25, 50}));
    const std::vector<std::pair<std::string, MosLevels>> runs{{"a", *levels}};
    EXPECT_EQ(mos_stacked_data(runs), "# run mos1 mos2 mos3 mos4 mos5\na 25 0 0 25 50\n");
    EXPECT_FALSE(mos_levels(std::span<const MeasureOutcome>{}).has_value());
}
