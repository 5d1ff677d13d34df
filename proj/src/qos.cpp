#include "vtester/qos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vtester/error.hpp"

namespace vtester::qos {

namespace {

void require_records(std::span<const PacketRecord> records, size_t n, const char* what) {
    if (records.size() < n)
        throw MetricError(std::string(what) + " needs at least " + std::to_string(n) + " packets");
}

}  // namespace

double latency(std::span<const double> rtt_samples) {
    if (rtt_samples.empty()) throw MetricError("latency needs at least one RTT sample");
    double sum = 0.0;
    for (double rtt : rtt_samples) sum += rtt / 2.0;
    return sum / static_cast<double>(rtt_samples.size());
}

std::vector<double> interarrival(std::span<const PacketRecord> records) {
    require_records(records, 2, "interarrival");
    std::vector<double> out;
    out.reserve(records.size() - 1);
    for (size_t i = 1; i < records.size(); ++i) out.push_back(records[i].arrival - records[i - 1].arrival);
    return out;
}

std::vector<double> jitter(std::span<const PacketRecord> records) {
    require_records(records, 2, "jitter");
    std::vector<double> j(records.size(), 0.0);
    for (size_t i = 1; i < records.size(); ++i) {
        const double d = (records[i].arrival - records[i - 1].arrival) - (records[i].rtp_ts - records[i - 1].rtp_ts);
        j[i] = j[i - 1] + (std::abs(d) - j[i - 1]) / 16.0;
    }
    return j;
}

std::vector<double> clock_skew(std::span<const PacketRecord> records) {
    require_records(records, 1, "clock_skew");
    const double origin = records.front().rtp_ts - records.front().arrival;
    std::vector<double> out;
    out.reserve(records.size());
    for (const PacketRecord& r : records) out.push_back((r.rtp_ts - r.arrival) - origin);
    return out;
}

std::vector<double> bandwidth(std::span<const PacketRecord> records) {
    require_records(records, 1, "bandwidth");
    // prefix[k] = bytes of records[0..k)
    std::vector<double> prefix(records.size() + 1, 0.0);
    for (size_t i = 0; i < records.size(); ++i) prefix[i + 1] = prefix[i] + static_cast<double>(records[i].size);
    std::vector<double> out;
    out.reserve(records.size());
    for (const PacketRecord& r : records) {
        const double lo = r.arrival - 1.0;
        // First index with arrival > lo, one past the last with arrival <= R_i.
        auto first = std::upper_bound(records.begin(), records.end(), lo,
                                      [](double t, const PacketRecord& x) { return t < x.arrival; });
        auto last = std::upper_bound(records.begin(), records.end(), r.arrival,
                                     [](double t, const PacketRecord& x) { return t < x.arrival; });
        const auto a = static_cast<size_t>(first - records.begin());
        const auto b = static_cast<size_t>(last - records.begin());
        out.push_back(8.0 * (prefix[b] - prefix[a]));
    }
    return out;
}

double plr(std::span<const PacketRecord> records) {
    require_records(records, 2, "plr");
    int64_t gaps = 0;
    for (size_t n = 1; n < records.size(); ++n) {
        const int64_t step = records[n].seq - (records[n - 1].seq + 1);
        if (step < 0)
            throw MetricError("plr: sequence decreases at packet " + std::to_string(n) + " (reordering not supported)");
        gaps += step;
    }
    return static_cast<double>(gaps) / static_cast<double>(records.size());
}

LossDistribution pld(std::span<const PacketRecord> records, size_t intervals) {
    require_records(records, 2, "pld");
    if (intervals == 0) throw MetricError("pld needs at least one interval");
    const double start = records.front().arrival;
    const double span = records.back().arrival - start;

    std::vector<std::vector<PacketRecord>> buckets(intervals);
    for (const PacketRecord& r : records) {
        size_t k = 0;
        if (span > 0.0) {
            const double pos = (r.arrival - start) / span * static_cast<double>(intervals);
            k = std::min(intervals - 1, static_cast<size_t>(std::max(0.0, std::floor(pos))));
        }
        buckets[k].push_back(r);
    }
    LossDistribution out;
    out.values.reserve(intervals);
    for (size_t k = 0; k < intervals; ++k) {
        if (buckets[k].size() < 2) {
            out.values.push_back(0.0);
            out.sparse_intervals.push_back(k);
        } else {
            out.values.push_back(plr(buckets[k]));
        }
    }
    return out;
}

}  // namespace vtester::qos
