#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "vtester/rawvideo.hpp"

namespace vtester {

// Zero-run length coding: 0x00 followed by a little-endian u16 run length
// stands for that many zero bytes; every other byte is a literal.
std::vector<uint8_t> rle_compress(std::span<const uint8_t> data);
std::vector<uint8_t> rle_decompress(std::span<const uint8_t> data);

enum class FrameType : uint8_t { I = 0x49, P = 0x50 };

char frame_type_char(FrameType type);

struct EncodedFrame {
    FrameType type = FrameType::I;
    uint32_t number = 0;
    std::vector<uint8_t> payload;

    static constexpr size_t kRecordHeaderSize = 10;
    /// Serialized record length, header included.
    size_t size() const { return kRecordHeaderSize + payload.size(); }

    bool operator==(const EncodedFrame&) const = default;
};

/// Everything about a stream that is not per-frame; the VTES file header.
struct StreamParams {
    uint16_t width = 0;
    uint16_t height = 0;
    uint16_t fps_num = 25;
    uint16_t fps_den = 1;
    uint16_t gop_size = 15;
    uint8_t quant_shift = 0;

    double fps() const { return static_cast<double>(fps_num) / fps_den; }
    bool operator==(const StreamParams&) const = default;
};

struct EncodedStream {
    StreamParams params;
    std::vector<EncodedFrame> frames;

    /// Sum of serialized record sizes.
    size_t total_bytes() const;
    bool operator==(const EncodedStream&) const = default;
};

struct DecodeReport {
    std::vector<bool> present;         // per reference index: decoded from received data
    size_t duplicated = 0;             // concealed (sustained) frames in the output
    std::vector<uint32_t> dropped_gops;  // GOPs whose I-frame never arrived
    int start_offset = 0;              // 0, or -gop_size*k when the first k GOPs were lost

    bool operator==(const DecodeReport&) const = default;
};

/// I-frame on every gop_size-th frame, P-frames carry wrapping byte deltas
/// against the previous quantized frame.
EncodedStream encode(const RawVideo& video, int gop_size, int quant_shift);

/// Decodes a possibly gappy stream into expected_frames reference slots,
/// duplicating the last output frame for every missing one. GOPs without
/// their I-frame are treated as missing whole. Missing frames before the
/// first decodable one are not emitted and move start_offset instead.
std::pair<RawVideo, DecodeReport> decode(const EncodedStream& stream, size_t expected_frames);

/// Drops the reference frames that have no counterpart in rx because the
/// first GOP(s) never decoded.
std::pair<RawVideo, RawVideo> dismiss_first_gop(const RawVideo& rx, const RawVideo& ref,
                                                const DecodeReport& report, int gop_size);

// VTES elementary stream container (little-endian).
inline constexpr uint8_t kVtesSync = 0x46;
inline constexpr uint8_t kVtesVersion = 1;
inline constexpr size_t kVtesHeaderSize = 4 + 1 + 2 * 5 + 1;

std::vector<uint8_t> serialize_record(const EncodedFrame& frame);
/// Parses exactly one record spanning all of `bytes`.
EncodedFrame parse_record(std::span<const uint8_t> bytes);

std::vector<uint8_t> serialize_vtes(const EncodedStream& stream);
EncodedStream parse_vtes(std::span<const uint8_t> bytes);

void write_vtes_file(const std::filesystem::path& path, const EncodedStream& stream);
EncodedStream read_vtes_file(const std::filesystem::path& path);

}  // namespace vtester
