// Built-in measures for the three meters.

#include <sstream>

#include "vtester/bitstream.hpp"
#include "vtester/error.hpp"
#include "vtester/metrics.hpp"
#include "vtester/qos.hpp"

namespace vtester {

namespace {

std::string join(const std::vector<size_t>& xs) {
    std::ostringstream os;
    for (size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Series over packets 1..N-1 (the first packet has no predecessor).
MeasureResult from_second_packet(std::string name, std::string units, const std::vector<double>& ys) {
    Series points;
    for (size_t i = 0; i < ys.size(); ++i) points.push_back({static_cast<double>(i + 1), ys[i]});
    return MeasureResult::series(std::move(name), std::move(units), std::move(points));
}

MeasureResult framing(const char* name, const EncodedStream& stream) {
    const auto structure = bs::framing_structure(stream);
    Series points;
    std::string types;
    for (const auto& e : structure) {
        points.push_back({static_cast<double>(e.number), static_cast<double>(e.size)});
        types.push_back(frame_type_char(e.type));
    }
    auto r = MeasureResult::series(name, "bytes", std::move(points));
    r.notes["frame_types"] = types;
    return r;
}

std::vector<int> mos_of(const RawVideo& rx, const RawVideo& ref, const vq::MosTable& table) {
    return vq::mos_from_psnr(vq::psnr_series(rx, ref), table);
}

// Per-frame MOS of the received video and of the loss-free reference
// encoding, both against the aligned reference.
std::pair<std::vector<int>, std::vector<int>> mos_pair(const AnalysisContext& ctx) {
    auto [rx, ref] = aligned_videos(ctx);
    const size_t skipped = ctx.ref_raw->frames.size() - ref.frames.size();
    auto [ref_decoded, report] = decode(*ctx.ref_encoded, ctx.ref_raw->frames.size());
    if (ref_decoded.frames.size() != ctx.ref_raw->frames.size())
        throw MetricError("reference encoding does not cover the reference video");
    ref_decoded.frames.erase(ref_decoded.frames.begin(), ref_decoded.frames.begin() + static_cast<std::ptrdiff_t>(skipped));
    const auto& table = ctx.options.mos_table;
    return {mos_of(rx, ref, table), mos_of(ref_decoded, ref, table)};
}

constexpr char kDivDefinition[] = "fraction of frames whose MOS is below the reference encoding's MOS";

}  // namespace

void register_qos_measures(MeterRegistry& registry) {
    using F = Field;
    registry.add(Meter::qos, "latency", {F::rtt_samples}, [](const AnalysisContext& ctx) {
        auto r = MeasureResult::value("latency", "s", qos::latency(*ctx.rtt_samples));
        r.notes["samples"] = std::to_string(ctx.rtt_samples->size());
        return r;
    });
    registry.add(Meter::qos, "interarrival", {F::packet_records}, [](const AnalysisContext& ctx) {
        return from_second_packet("interarrival", "s", qos::interarrival(*ctx.packet_records));
    });
    registry.add(Meter::qos, "jitter", {F::packet_records}, [](const AnalysisContext& ctx) {
        return MeasureResult::indexed("jitter", "s", qos::jitter(*ctx.packet_records));
    });
    registry.add(Meter::qos, "clock_skew", {F::packet_records}, [](const AnalysisContext& ctx) {
        auto r = MeasureResult::indexed("clock_skew", "s", qos::clock_skew(*ctx.packet_records));
        r.notes["normalization"] = "offset of the first packet subtracted";
        return r;
    });
    registry.add(Meter::qos, "bandwidth", {F::packet_records}, [](const AnalysisContext& ctx) {
        auto r = MeasureResult::indexed("bandwidth", "bit/s", qos::bandwidth(*ctx.packet_records));
        r.notes["window"] = "trailing 1 s, RTP packet bytes";
        return r;
    });
    registry.add(Meter::qos, "plr", {F::packet_records}, [](const AnalysisContext& ctx) {
        auto r = MeasureResult::value("plr", "fraction", qos::plr(*ctx.packet_records));
        r.notes["denominator"] = "packets received";
        return r;
    });
    registry.add(Meter::qos, "pld", {F::packet_records}, [](const AnalysisContext& ctx) {
        const auto dist = qos::pld(*ctx.packet_records, ctx.options.pld_intervals);
        auto r = MeasureResult::indexed("pld", "fraction", dist.values);
        r.notes["intervals"] = std::to_string(ctx.options.pld_intervals);
        if (!dist.sparse_intervals.empty()) r.notes["sparse_intervals"] = join(dist.sparse_intervals);
        return r;
    });
}

void register_bs_measures(MeterRegistry& registry) {
    using F = Field;
    registry.add(Meter::bs, "framing_rx", {F::rx_encoded},
                 [](const AnalysisContext& ctx) { return framing("framing_rx", *ctx.rx_encoded); });
    registry.add(Meter::bs, "framing_ref", {F::ref_encoded},
                 [](const AnalysisContext& ctx) { return framing("framing_ref", *ctx.ref_encoded); });
    registry.add(Meter::bs, "gop_size", {F::rx_encoded}, [](const AnalysisContext& ctx) {
        const auto gops = bs::observed_gops(bs::framing_structure(*ctx.rx_encoded));
        const auto est = bs::gop_size_estimate(gops);
        auto r = MeasureResult::value("gop_size", "frames", est.value);
        r.notes["mean"] = fmt(est.stats.mean);
        r.notes["stddev"] = fmt(est.stats.stddev);
        r.notes["observed_gops"] = std::to_string(gops.size());
        if (est.fell_back) r.notes["fallback"] = "all GOPs atypical; plain mean reported";
        return r;
    });
    registry.add(Meter::bs, "iframe_loss", {F::rx_encoded}, [](const AnalysisContext& ctx) {
        const auto gops = bs::observed_gops(bs::framing_structure(*ctx.rx_encoded));
        const auto loss = bs::iframe_loss(gops);
        auto r = MeasureResult::value("iframe_loss", "fraction", loss.rate);
        r.notes["count"] = std::to_string(loss.count);
        r.notes["strict_count"] = std::to_string(loss.strict_count);
        r.notes["denominator"] = "counted losses + received I-frames";
        return r;
    });
}

void register_vq_measures(MeterRegistry& registry) {
    using F = Field;
    registry.add(Meter::vq, "psnr", {F::rx_raw, F::ref_raw}, [](const AnalysisContext& ctx) {
        auto [rx, ref] = aligned_videos(ctx);
        auto r = MeasureResult::indexed("psnr", "dB", vq::psnr_series(rx, ref));
        r.notes["plane"] = "luma";
        return r;
    });
    registry.add(Meter::vq, "ssim", {F::rx_raw, F::ref_raw}, [](const AnalysisContext& ctx) {
        auto [rx, ref] = aligned_videos(ctx);
        return MeasureResult::indexed("ssim", "index", vq::ssim_series(rx, ref));
    });
    registry.add(Meter::vq, "mos", {F::rx_raw, F::ref_raw}, [](const AnalysisContext& ctx) {
        auto [rx, ref] = aligned_videos(ctx);
        const auto mos = mos_of(rx, ref, ctx.options.mos_table);
        std::vector<double> ys(mos.begin(), mos.end());
        auto r = MeasureResult::indexed("mos", "score", ys);
        r.notes["mapping"] = ctx.options.mos_table.describe();
        return r;
    });
    registry.add(Meter::vq, "div", {F::rx_raw, F::ref_raw, F::ref_encoded}, [](const AnalysisContext& ctx) {
        const auto [rx_mos, ref_mos] = mos_pair(ctx);
        auto r = MeasureResult::value("div", "fraction", vq::div_from_mos(rx_mos, ref_mos));
        r.notes["definition"] = kDivDefinition;
        return r;
    });
    registry.add(Meter::vq, "div_interval", {F::rx_raw, F::ref_raw, F::ref_encoded}, [](const AnalysisContext& ctx) {
        const auto [rx_mos, ref_mos] = mos_pair(ctx);
        auto r = MeasureResult::indexed("div_interval", "fraction",
                                        vq::div_intervals(rx_mos, ref_mos, ctx.options.pld_intervals));
        r.notes["definition"] = kDivDefinition;
        r.notes["intervals"] = std::to_string(ctx.options.pld_intervals);
        return r;
    });
    registry.add(Meter::vq, "g1070", {F::packet_records, F::session_meta, F::g1070_coefficients}, [](const AnalysisContext& ctx) {
        const vq::G1070Inputs in{ctx.session_meta->bitrate_kbps, ctx.session_meta->fps,
                                 qos::plr(*ctx.packet_records) * 100.0};
        const auto g = vq::g1070_vq(*ctx.options.g1070, in);
        auto r = MeasureResult::value("g1070", "score", g.vq);
        r.notes["bitrate_kbps"] = fmt(in.bitrate_kbps);
        r.notes["frame_rate"] = fmt(in.frame_rate);
        r.notes["packet_loss_pct"] = fmt(in.packet_loss_pct);
        r.notes["coding_quality"] = fmt(g.coding_quality);
        return r;
    });
}

}  // namespace vtester
