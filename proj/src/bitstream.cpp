#include "vtester/bitstream.hpp"

#include <algorithm>
#include <cmath>

#include "vtester/error.hpp"

namespace vtester::bs {

FramingStructure framing_structure(const EncodedStream& stream) {
    FramingStructure out;
    out.reserve(stream.frames.size());
    for (const EncodedFrame& f : stream.frames) out.push_back({f.number, f.type, f.size()});
    return out;
}

std::vector<int> observed_gops(const FramingStructure& structure) {
    std::vector<int> gops;
    const FramingEntry* previous_i = nullptr;
    for (const FramingEntry& e : structure) {
        if (e.type != FrameType::I) continue;
        if (previous_i) gops.push_back(static_cast<int>(e.number - previous_i->number));
        previous_i = &e;
    }
    if (gops.empty()) throw MetricError("GOP estimation needs at least two received I-frames");
    return gops;
}

GopStats gop_stats(std::span<const int> gops) {
    if (gops.empty()) throw MetricError("GOP statistics need at least one GOP");
    // Sorted accumulation keeps the result independent of input order.
    std::vector<int> sorted(gops.begin(), gops.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double sum = 0.0;
    for (int g : sorted) sum += g;
    const double mean = sum / n;
    double sq = 0.0;
    for (int g : sorted) sq += (g - mean) * (g - mean);
    return {mean, std::sqrt(sq / n)};
}

GopEstimate gop_size_estimate(std::span<const int> gops) {
    GopEstimate est;
    est.stats = gop_stats(gops);
    const double lo = est.stats.mean - est.stats.stddev;
    const double hi = est.stats.mean + est.stats.stddev;
    std::vector<int> kept;
    for (int g : gops)
        if (g >= lo && g <= hi) kept.push_back(g);
    if (kept.empty()) {
        est.value = est.stats.mean;
        est.fell_back = true;
    } else {
        est.value = gop_stats(kept).mean;
    }
    return est;
}

IFrameLoss iframe_loss(std::span<const int> gops) {
    const GopEstimate est = gop_size_estimate(gops);
    const double hi = est.stats.mean + est.stats.stddev;
    IFrameLoss out;
    for (int g : gops) {
        if (g > hi) {
            ++out.count;
            const long missing = std::lround(g / est.value) - 1;
            out.strict_count += static_cast<size_t>(std::max(0L, missing));
        }
    }
    const double received_iframes = static_cast<double>(gops.size() + 1);
    out.rate = static_cast<double>(out.count) / (static_cast<double>(out.count) + received_iframes);
    return out;
}

}  // namespace vtester::bs
