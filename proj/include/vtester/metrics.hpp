#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vtester/codec.hpp"
#include "vtester/picture.hpp"
#include "vtester/rawvideo.hpp"
#include "vtester/trace.hpp"

namespace vtester {

enum class Meter { qos, bs, vq };

const char* meter_name(Meter m);

struct SessionMeta {
    double fps = 25.0;
    int gop_size = 15;
    double bitrate_kbps = 0.0;
    std::string codec = "vtes-rle";
};

struct AnalysisOptions {
    size_t pld_intervals = 10;
    vq::MosTable mos_table = vq::MosTable::evalvid();
    std::optional<vq::G1070Coefficients> g1070;
};

/// Everything a measure may read. Any field can be missing; measures declare
/// what they need and are skipped otherwise.
struct AnalysisContext {
    std::optional<std::vector<PacketRecord>> packet_records;
    std::optional<std::vector<double>> rtt_samples;
    std::optional<EncodedStream> rx_encoded;
    std::optional<EncodedStream> ref_encoded;
    std::optional<RawVideo> rx_raw;
    std::optional<RawVideo> ref_raw;
    std::optional<DecodeReport> decode_report;
    std::optional<SessionMeta> session_meta;
    AnalysisOptions options;
};

enum class Field {
    packet_records,
    rtt_samples,
    rx_encoded,
    ref_encoded,
    rx_raw,
    ref_raw,
    decode_report,
    session_meta,
    g1070_coefficients,  // lives in options
};

const char* field_name(Field f);
bool has_field(const AnalysisContext& ctx, Field f);

enum class ResultKind { value, series, histogram };

const char* kind_name(ResultKind k);

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct Bin {
    double bin = 0.0;
    double count = 0.0;
    bool operator==(const Bin&) const = default;
};

using Series = std::vector<Point>;
using Histogram = std::vector<Bin>;

struct MeasureResult {
    std::string name;
    std::string units;
    std::variant<double, Series, Histogram> data;
    std::map<std::string, std::string> notes;

    ResultKind kind() const { return static_cast<ResultKind>(data.index()); }
    bool operator==(const MeasureResult&) const = default;

    static MeasureResult value(std::string name, std::string units, double v);
    /// x = 0, 1, 2, ...
    static MeasureResult indexed(std::string name, std::string units, std::span<const double> ys);
    /// Throws if xs is not strictly increasing.
    static MeasureResult series(std::string name, std::string units, Series points);
    static MeasureResult histogram(std::string name, std::string units, Histogram bins);
};

enum class OutcomeStatus { ok, skipped, failed };

struct MeasureOutcome {
    std::string meter;
    std::string name;
    OutcomeStatus status = OutcomeStatus::ok;
    std::optional<MeasureResult> result;
    std::string reason;  // why it was skipped or failed

    bool ok() const { return status == OutcomeStatus::ok; }
    bool operator==(const MeasureOutcome&) const = default;
};

using MeasureFn = std::function<MeasureResult(const AnalysisContext&)>;

/// Three meters, each a name -> measure table. Built once, then read-only.
class MeterRegistry {
public:
    /// Registry holding every built-in measure.
    static MeterRegistry with_builtins();

    /// Throws Error if the meter already holds `name`.
    void add(Meter meter, std::string name, std::vector<Field> needs, MeasureFn compute);

    bool contains(Meter meter, const std::string& name) const;
    std::vector<std::string> names(Meter meter) const;
    /// Every measure as "meter.name", meters in qos, bs, vq order.
    std::vector<std::string> qualified_names() const;

    /// Runs the selected measures in selection order. Names may be plain
    /// ("plr") or meter-qualified ("qos.plr"). Never throws for a single
    /// measure: unknown names, missing inputs and measure errors all become
    /// non-ok outcomes.
    std::vector<MeasureOutcome> run(std::span<const std::string> selected, const AnalysisContext& ctx) const;

private:
    struct Measure {
        std::string name;
        std::vector<Field> needs;
        MeasureFn compute;
    };
    std::map<Meter, std::vector<Measure>> meters_;
};

void register_qos_measures(MeterRegistry& registry);
void register_bs_measures(MeterRegistry& registry);
void register_vq_measures(MeterRegistry& registry);

/// The received/reference raw pair with the first-GOP dismissal applied
/// when a decode report is available.
std::pair<RawVideo, RawVideo> aligned_videos(const AnalysisContext& ctx);

}  // namespace vtester
