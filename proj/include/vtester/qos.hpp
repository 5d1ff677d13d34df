#pragma once

#include <span>
#include <vector>

#include "vtester/trace.hpp"

namespace vtester::qos {

/// Mean one-way latency estimated as half of each round-trip sample.
double latency(std::span<const double> rtt_samples);

/// R_i - R_{i-1} for every packet after the first.
std::vector<double> interarrival(std::span<const PacketRecord> records);

/// RFC 3550 interarrival jitter, one value per packet, starting at 0.
std::vector<double> jitter(std::span<const PacketRecord> records);

/// S_i - R_i shifted so the first packet sits at 0.
std::vector<double> clock_skew(std::span<const PacketRecord> records);

/// Bits received in the trailing second (R_i - 1, R_i], evaluated at each packet.
std::vector<double> bandwidth(std::span<const PacketRecord> records);

/// Sequence gaps divided by the number of packets received.
double plr(std::span<const PacketRecord> records);

struct LossDistribution {
    std::vector<double> values;             // one per interval
    std::vector<size_t> sparse_intervals;   // intervals with fewer than two packets, reported as 0
};

LossDistribution pld(std::span<const PacketRecord> records, size_t intervals);

}  // namespace vtester::qos
