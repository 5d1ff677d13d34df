#pragma once

#include <span>
#include <vector>

#include "vtester/codec.hpp"

namespace vtester::bs {

struct FramingEntry {
    uint32_t number = 0;
    FrameType type = FrameType::I;
    size_t size = 0;  // serialized record bytes

    bool operator==(const FramingEntry&) const = default;
};

using FramingStructure = std::vector<FramingEntry>;

FramingStructure framing_structure(const EncodedStream& stream);

/// Distances between consecutive received I-frames.
std::vector<int> observed_gops(const FramingStructure& structure);

struct GopStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

GopStats gop_stats(std::span<const int> gops);

struct GopEstimate {
    double value = 0.0;
    GopStats stats;
    bool fell_back = false;  // every GOP was atypical; value is the plain mean
};

/// Mean of the GOP lengths inside [mean - stddev, mean + stddev].
GopEstimate gop_size_estimate(std::span<const int> gops);

struct IFrameLoss {
    size_t count = 0;         // GOPs longer than mean + stddev
    double rate = 0.0;        // count / (count + received I-frames)
    size_t strict_count = 0;  // sum of round(GOP / estimate) - 1 over those GOPs
};

IFrameLoss iframe_loss(std::span<const int> gops);

}  // namespace vtester::bs
