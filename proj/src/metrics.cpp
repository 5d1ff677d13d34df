#include "vtester/metrics.hpp"

#include <algorithm>

#include "vtester/error.hpp"

namespace vtester {

const char* meter_name(Meter m) {
    switch (m) {
        case Meter::qos: return "qos";
        case Meter::bs: return "bs";
        case Meter::vq: return "vq";
    }
    return "?";
}

const char* field_name(Field f) {
    switch (f) {
        case Field::packet_records: return "packet_records";
        case Field::rtt_samples: return "rtt_samples";
        case Field::rx_encoded: return "rx_encoded";
        case Field::ref_encoded: return "ref_encoded";
        case Field::rx_raw: return "rx_raw";
        case Field::ref_raw: return "ref_raw";
        case Field::decode_report: return "decode_report";
        case Field::session_meta: return "session_meta";
        case Field::g1070_coefficients: return "g1070_coefficients";
    }
    return "?";
}

bool has_field(const AnalysisContext& ctx, Field f) {
    switch (f) {
        case Field::packet_records: return ctx.packet_records.has_value();
        case Field::rtt_samples: return ctx.rtt_samples.has_value();
        case Field::rx_encoded: return ctx.rx_encoded.has_value();
        case Field::ref_encoded: return ctx.ref_encoded.has_value();
        case Field::rx_raw: return ctx.rx_raw.has_value();
        case Field::ref_raw: return ctx.ref_raw.has_value();
        case Field::decode_report: return ctx.decode_report.has_value();
        case Field::session_meta: return ctx.session_meta.has_value();
        case Field::g1070_coefficients: return ctx.options.g1070.has_value();
    }
    return false;
}

const char* kind_name(ResultKind k) {
    switch (k) {
        case ResultKind::value: return "value";
        case ResultKind::series: return "series";
        case ResultKind::histogram: return "histogram";
    }
    return "?";
}

MeasureResult MeasureResult::value(std::string name, std::string units, double v) {
    return {std::move(name), std::move(units), v, {}};
}

MeasureResult MeasureResult::indexed(std::string name, std::string units, std::span<const double> ys) {
    Series points;
    points.reserve(ys.size());
    for (size_t i = 0; i < ys.size(); ++i) points.push_back({static_cast<double>(i), ys[i]});
    return {std::move(name), std::move(units), std::move(points), {}};
}

MeasureResult MeasureResult::series(std::string name, std::string units, Series points) {
    for (size_t i = 1; i < points.size(); ++i)
        if (!(points[i].x > points[i - 1].x)) throw Error("series '" + name + "': x values must strictly increase");
    return {std::move(name), std::move(units), std::move(points), {}};
}

MeasureResult MeasureResult::histogram(std::string name, std::string units, Histogram bins) {
    return {std::move(name), std::move(units), std::move(bins), {}};
}

MeterRegistry MeterRegistry::with_builtins() {
    MeterRegistry registry;
    register_qos_measures(registry);
    register_bs_measures(registry);
    register_vq_measures(registry);
    return registry;
}

void MeterRegistry::add(Meter meter, std::string name, std::vector<Field> needs, MeasureFn compute) {
    if (contains(meter, name))
        throw Error(std::string("measure '") + name + "' is already registered in meter " + meter_name(meter));
    meters_[meter].push_back({std::move(name), std::move(needs), std::move(compute)});
}

bool MeterRegistry::contains(Meter meter, const std::string& name) const {
    auto it = meters_.find(meter);
    if (it == meters_.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](const Measure& m) { return m.name == name; });
}

std::vector<std::string> MeterRegistry::names(Meter meter) const {
    std::vector<std::string> out;
    if (auto it = meters_.find(meter); it != meters_.end())
        for (const Measure& m : it->second) out.push_back(m.name);
    return out;
}

std::vector<std::string> MeterRegistry::qualified_names() const {
    std::vector<std::string> out;
    for (Meter m : {Meter::qos, Meter::bs, Meter::vq})
        for (const std::string& n : names(m)) out.push_back(std::string(meter_name(m)) + "." + n);
    return out;
}

std::vector<MeasureOutcome> MeterRegistry::run(std::span<const std::string> selected,
                                               const AnalysisContext& ctx) const {
    std::vector<MeasureOutcome> outcomes;
    outcomes.reserve(selected.size());
    for (const std::string& requested : selected) {
        std::string meter_filter;
        std::string name = requested;
        if (auto dot = requested.find('.'); dot != std::string::npos) {
            meter_filter = requested.substr(0, dot);
            name = requested.substr(dot + 1);
        }
        const Measure* found = nullptr;
        Meter found_meter = Meter::qos;
        for (Meter m : {Meter::qos, Meter::bs, Meter::vq}) {
            if (!meter_filter.empty() && meter_filter != meter_name(m)) continue;
            auto it = meters_.find(m);
            if (it == meters_.end()) continue;
            for (const Measure& measure : it->second)
                if (measure.name == name) {
                    found = &measure;
                    found_meter = m;
                    break;
                }
            if (found) break;
        }

        MeasureOutcome outcome;
        outcome.name = name;
        if (!found) {
            outcome.meter = meter_filter;
            outcome.status = OutcomeStatus::skipped;
            outcome.reason = "unknown measure";
            outcomes.push_back(std::move(outcome));
            continue;
        }
        outcome.meter = meter_name(found_meter);
        auto missing = std::find_if(found->needs.begin(), found->needs.end(),
                                    [&](Field f) { return !has_field(ctx, f); });
        if (missing != found->needs.end()) {
            outcome.status = OutcomeStatus::skipped;
            outcome.reason = std::string("missing ") + field_name(*missing);
        } else {
            try {
                outcome.result = found->compute(ctx);
            } catch (const std::exception& e) {
                outcome.status = OutcomeStatus::failed;
                outcome.reason = e.what();
            }
        }
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

std::pair<RawVideo, RawVideo> aligned_videos(const AnalysisContext& ctx) {
    if (!ctx.rx_raw || !ctx.ref_raw) throw MetricError("aligned videos need rx_raw and ref_raw");
    if (!ctx.decode_report) return {*ctx.rx_raw, *ctx.ref_raw};
    int gop = 0;
    if (ctx.session_meta) gop = ctx.session_meta->gop_size;
    else if (ctx.rx_encoded) gop = ctx.rx_encoded->params.gop_size;
    return dismiss_first_gop(*ctx.rx_raw, *ctx.ref_raw, *ctx.decode_report, gop);
}

}  // namespace vtester
