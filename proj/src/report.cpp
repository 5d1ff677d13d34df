#include "vtester/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vtester/bytes.hpp"
#include "vtester/codec.hpp"
#include "vtester/error.hpp"
#include "vtester/netharness.hpp"
#include "vtester/rawvideo.hpp"
#include "vtester/trace.hpp"

namespace vtester {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json pairs(const Series& s) {
    json out = json::array();
    for (const auto& p : s) out.push_back({number(p.x), number(p.y)});
    return out;
}

json pairs(const Histogram& h) {
    json out = json::array();
    for (const auto& b : h) out.push_back({number(b.bin), number(b.count)});
    return out;
}

const char* status_name(OutcomeStatus s) {
    switch (s) {
        case OutcomeStatus::ok: return "ok";
        case OutcomeStatus::skipped: return "skipped";
        case OutcomeStatus::failed: return "failed";
    }
    return "?";
}

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool AnalysisInputs::any() const { return trace || rx_encoded || rx_raw || ref_raw || decode_report || session; }

AnalysisInputs AnalysisInputs::from_directory(const fs::path& dir) {
    auto pick = [&](const char* name) -> std::optional<fs::path> {
        const fs::path p = dir / name;
        if (fs::exists(p)) return p;
        return std::nullopt;
    };
    AnalysisInputs in;
    in.trace = pick(kTraceFile);
    in.rx_encoded = pick(kRxEncodedFile);
    in.rx_raw = pick(kRxRawFile);
    in.ref_raw = pick(kRefRawFile);
    in.decode_report = pick(kDecodeReportFile);
    in.session = pick(kSessionFile);
    return in;
}

AnalysisContext load_context(const AnalysisInputs& inputs, const AnalysisOptions& options) {
    if (!inputs.any()) throw ConfigError("analyze: no input artifacts given");
    AnalysisContext ctx;
    ctx.options = options;

    uint16_t capture_port = 0;
    std::optional<StreamParams> session_params;
    if (inputs.session) {
        const json s = read_json(*inputs.session);
        capture_port = s.value("capture_port", uint16_t{0});
        if (s.contains("rtt_samples")) ctx.rtt_samples = s.at("rtt_samples").get<std::vector<double>>();
        if (s.contains("stream")) {
            const json& st = s.at("stream");
            StreamParams p;
            p.width = st.at("width").get<int>();
            p.height = st.at("height").get<int>();
            p.fps_num = st.at("fps_num").get<int>();
            p.fps_den = st.at("fps_den").get<int>();
            p.gop_size = st.at("gop_size").get<int>();
            p.quant_shift = st.at("quant_shift").get<int>();
            session_params = p;
            SessionMeta meta;
            meta.fps = static_cast<double>(p.fps_num) / p.fps_den;
            meta.gop_size = p.gop_size;
            meta.bitrate_kbps = s.value("bitrate_kbps", 0.0);
            meta.codec = s.value("codec", std::string("vtes-rle"));
            ctx.session_meta = meta;
        }
    }
    if (inputs.trace) {
        const auto packets = read_pcap(*inputs.trace);
        ctx.packet_records = extract_rtp_records(packets, capture_port).records;
    }
    if (inputs.rx_encoded) ctx.rx_encoded = read_vtes_file(*inputs.rx_encoded);
    if (inputs.rx_raw) ctx.rx_raw = read_y4m_file(*inputs.rx_raw);
    if (inputs.ref_raw) ctx.ref_raw = read_y4m_file(*inputs.ref_raw);
    if (inputs.decode_report) ctx.decode_report = decode_report_from_json(read_json(*inputs.decode_report));

    std::optional<StreamParams> params = session_params;
    if (ctx.rx_encoded) params = ctx.rx_encoded->params;
    if (ctx.ref_raw && params) {
        RawVideo ref = *ctx.ref_raw;
        ref.fps_num = params->fps_num;
        ref.fps_den = params->fps_den;
        ctx.ref_encoded = encode(ref, params->gop_size, params->quant_shift);
    }
    return ctx;
}

ReportMeta make_report_meta(const AnalysisInputs& inputs, std::map<std::string, std::string> provenance) {
    ReportMeta meta{inputs, std::move(provenance), std::nullopt};
    if (inputs.session) {
        const json s = read_json(*inputs.session);
        if (s.contains("trace_note")) meta.trace_note = s.at("trace_note").get<std::string>();
    }
    return meta;
}

json report_json(std::span<const MeasureOutcome> outcomes, const AnalysisOptions& options, const ReportMeta& meta) {
    json mos_rows = json::array();
    for (const auto& row : options.mos_table.rows)
        mos_rows.push_back({{"bound_db", row.bound}, {"inclusive", row.inclusive}, {"score", row.score}});
    auto source = [&](const char* key) {
        auto it = meta.provenance.find(key);
        return it == meta.provenance.end() ? std::string("built-in") : it->second;
    };

    json mappings = {
        {"mos_table",
         {{"rows", mos_rows},
          {"floor_score", options.mos_table.floor_score},
          {"describe", options.mos_table.describe()},
          {"source", source("mos_table")}}},
        {"pld_intervals", {{"value", options.pld_intervals}, {"source", source("pld_intervals")}}},
        {"div", {{"definition", "fraction of frames whose MOS is below the reference encoding's MOS"},
                 {"source", "built-in"}}},
        {"iframe_loss_rate",
         {{"definition", "count / (count + received I-frames)"}, {"source", "built-in"}}},
    };
    if (options.g1070) {
        mappings["g1070"] = {{"coefficients", options.g1070->v}, {"source", source("g1070")}};
    } else {
        mappings["g1070"] = {{"coefficients", nullptr}, {"source", "unset"}};
    }

    json measures = json::array();
    for (const auto& o : outcomes) {
        json m = {{"meter", o.meter}, {"name", o.name}, {"status", status_name(o.status)}};
        if (!o.ok()) {
            m["reason"] = o.reason;
        } else {
            const MeasureResult& r = *o.result;
            m["units"] = r.units;
            m["kind"] = kind_name(r.kind());
            m["notes"] = r.notes;
            switch (r.kind()) {
                case ResultKind::value: m["value"] = number(std::get<double>(r.data)); break;
                case ResultKind::series: m["points"] = pairs(std::get<Series>(r.data)); break;
                case ResultKind::histogram: m["bins"] = pairs(std::get<Histogram>(r.data)); break;
            }
        }
        measures.push_back(std::move(m));
    }

    json inputs = {{"trace", optional_path(meta.inputs.trace)},
                   {"rx_encoded", optional_path(meta.inputs.rx_encoded)},
                   {"rx_raw", optional_path(meta.inputs.rx_raw)},
                   {"ref_raw", optional_path(meta.inputs.ref_raw)},
                   {"decode_report", optional_path(meta.inputs.decode_report)},
                   {"session", optional_path(meta.inputs.session)}};
    json doc = {{"schema_version", kReportSchemaVersion},
                {"generator", "vt"},
                {"inputs", inputs},
                {"mappings", mappings},
                {"measures", measures}};
    if (meta.trace_note) doc["trace_note"] = *meta.trace_note;
    return doc;
}

std::string report_csv(std::span<const MeasureOutcome> outcomes) {
    std::ostringstream os;
    os << "measure,name,kind,x,y\n";
    for (const auto& o : outcomes) {
        if (!o.ok()) continue;
        const MeasureResult& r = *o.result;
        const std::string prefix = o.meter + "," + o.name + "," + kind_name(r.kind()) + ",";
        switch (r.kind()) {
            case ResultKind::value: os << prefix << "0," << exact(std::get<double>(r.data)) << "\n"; break;
            case ResultKind::series:
                for (const auto& p : std::get<Series>(r.data)) os << prefix << exact(p.x) << "," << exact(p.y) << "\n";
                break;
            case ResultKind::histogram:
                for (const auto& b : std::get<Histogram>(r.data))
                    os << prefix << exact(b.bin) << "," << exact(b.count) << "\n";
                break;
        }
    }
    return os.str();
}

std::string gnuplot_data(const MeasureResult& result) {
    std::ostringstream os;
    os << "# " << result.name << " " << result.units << "\n";
    if (const auto* s = std::get_if<Series>(&result.data))
        for (const auto& p : *s) os << exact(p.x) << " " << exact(p.y) << "\n";
    if (const auto* h = std::get_if<Histogram>(&result.data))
        for (const auto& b : *h) os << exact(b.bin) << " " << exact(b.count) << "\n";
    return os.str();
}

WrittenReport write_reports(const fs::path& dir, std::span<const MeasureOutcome> outcomes,
                            const AnalysisOptions& options, const ReportMeta& meta) {
    fs::create_directories(dir / "plots");
    WrittenReport w;
    w.json_path = dir / "report.json";
    w.csv_path = dir / "report.csv";
    write_text(w.json_path, report_json(outcomes, options, meta).dump(2) + "\n");
    write_text(w.csv_path, report_csv(outcomes));
    for (const auto& o : outcomes) {
        if (!o.ok() || o.result->kind() == ResultKind::value) continue;
        const fs::path p = dir / "plots" / (o.meter + "_" + o.name + ".dat");
        write_text(p, gnuplot_data(*o.result));
        w.data_paths.push_back(p);
    }
    return w;
}

AnalysisRun analyze_artifacts(const AnalysisInputs& inputs, const AnalysisOptions& options,
                              std::span<const std::string> measures,
                              const std::map<std::string, std::string>& provenance, const fs::path& out_dir) {
    const AnalysisContext ctx = load_context(inputs, options);
    static const MeterRegistry registry = MeterRegistry::with_builtins();
    const std::vector<std::string> all = registry.qualified_names();
    AnalysisRun run;
    run.outcomes = registry.run(measures.empty() ? std::span<const std::string>(all) : measures, ctx);
    run.written = write_reports(out_dir, run.outcomes, options, make_report_meta(inputs, provenance));
    return run;
}

std::optional<MosLevels> mos_levels(std::span<const MeasureOutcome> outcomes) {
    for (const auto& o : outcomes) {
        if (!o.ok() || o.meter != "vq" || o.name != "mos") continue;
        const auto& points = std::get<Series>(o.result->data);
        MosLevels levels{};
        if (points.empty()) return levels;
        for (const auto& p : points) {
            const int score = static_cast<int>(std::lround(p.y));
            if (score >= 1 && score <= 5) levels[static_cast<size_t>(score - 1)] += 1.0;
        }
        for (double& l : levels) l = 100.0 * l / static_cast<double>(points.size());
        return levels;
    }
    return std::nullopt;
}

std::string mos_stacked_data(std::span<const std::pair<std::string, MosLevels>> runs) {
    std::ostringstream os;
    os << "# run mos1 mos2 mos3 mos4 mos5\n";
    for (const auto& [label, levels] : runs) {
        os << label;
        for (double l : levels) os << " " << exact(l);
        os << "\n";
    }
    return os.str();
}

}  // namespace vtester
