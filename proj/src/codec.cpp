#include "vtester/codec.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "vtester/bytes.hpp"
#include "vtester/error.hpp"

namespace vtester {

namespace {

constexpr size_t kMaxRun = 0xFFFF;
constexpr char kVtesMagic[4] = {'V', 'T', 'E', 'S'};

std::vector<uint8_t> quantize(const FrameBuffer& frame, int shift) {
    std::vector<uint8_t> bytes = frame.to_bytes();
    if (shift > 0)
        for (uint8_t& b : bytes) b = static_cast<uint8_t>((b >> shift) << shift);
    return bytes;
}

std::vector<uint8_t> unpack_payload(const EncodedFrame& frame, size_t expected_size) {
    std::vector<uint8_t> bytes = rle_decompress(frame.payload);
    if (bytes.size() != expected_size)
        throw FormatError("frame " + std::to_string(frame.number) + " decodes to " + std::to_string(bytes.size()) +
                          " bytes, geometry needs " + std::to_string(expected_size));
    return bytes;
}

}  // namespace

std::vector<uint8_t> rle_compress(std::span<const uint8_t> data) {
    std::vector<uint8_t> out;
    out.reserve(data.size() / 2 + 8);
    size_t i = 0;
    while (i < data.size()) {
        if (data[i] != 0) {
            out.push_back(data[i++]);
            continue;
        }
        size_t run = 0;
        while (i < data.size() && data[i] == 0 && run < kMaxRun) {
            ++run;
            ++i;
        }
        out.push_back(0x00);
        out.push_back(static_cast<uint8_t>(run & 0xFF));
        out.push_back(static_cast<uint8_t>(run >> 8));
    }
    return out;
}

std::vector<uint8_t> rle_decompress(std::span<const uint8_t> data) {
    std::vector<uint8_t> out;
    out.reserve(data.size() * 2);
    size_t i = 0;
    while (i < data.size()) {
        if (data[i] != 0) {
            out.push_back(data[i++]);
            continue;
        }
        if (i + 3 > data.size()) throw FormatError("rle: truncated run token");
        const size_t run = data[i + 1] | (static_cast<size_t>(data[i + 2]) << 8);
        if (run == 0) throw FormatError("rle: zero-length run");
        out.insert(out.end(), run, 0);
        i += 3;
    }
    return out;
}

char frame_type_char(FrameType type) { return static_cast<char>(type); }

size_t EncodedStream::total_bytes() const {
    size_t total = 0;
    for (const EncodedFrame& f : frames) total += f.size();
    return total;
}

EncodedStream encode(const RawVideo& video, int gop_size, int quant_shift) {
    if (video.frames.empty()) throw Error("encode: empty video");
    if (gop_size < 1 || gop_size > 0xFFFF) throw Error("encode: gop_size out of range");
    if (quant_shift < 0 || quant_shift > 7) throw Error("encode: quant_shift must be in 0..7");
    if (video.width > 0xFFFF || video.height > 0xFFFF || video.fps_num > 0xFFFF || video.fps_den > 0xFFFF)
        throw Error("encode: geometry or frame rate does not fit the stream header");

    EncodedStream stream;
    stream.params = {static_cast<uint16_t>(video.width), static_cast<uint16_t>(video.height),
                     static_cast<uint16_t>(video.fps_num), static_cast<uint16_t>(video.fps_den),
                     static_cast<uint16_t>(gop_size), static_cast<uint8_t>(quant_shift)};
    stream.frames.reserve(video.frames.size());

    std::vector<uint8_t> previous;
    for (size_t n = 0; n < video.frames.size(); ++n) {
        std::vector<uint8_t> current = quantize(video.frames[n], quant_shift);
        EncodedFrame frame;
        frame.number = static_cast<uint32_t>(n);
        if (n % static_cast<size_t>(gop_size) == 0) {
            frame.type = FrameType::I;
            frame.payload = rle_compress(current);
        } else {
            frame.type = FrameType::P;
            std::vector<uint8_t> delta(current.size());
            for (size_t i = 0; i < current.size(); ++i) delta[i] = static_cast<uint8_t>(current[i] - previous[i]);
            frame.payload = rle_compress(delta);
        }
        stream.frames.push_back(std::move(frame));
        previous = std::move(current);
    }
    return stream;
}

std::pair<RawVideo, DecodeReport> decode(const EncodedStream& stream, size_t expected_frames) {
    const StreamParams& p = stream.params;
    if (p.gop_size < 1) throw FormatError("decode: gop_size must be positive");

    RawVideo out;
    out.width = p.width;
    out.height = p.height;
    out.fps_num = p.fps_num;
    out.fps_den = p.fps_den;
    const FrameBuffer blank(p.width, p.height);
    const size_t frame_bytes = blank.byte_size();

    std::map<uint32_t, const EncodedFrame*> received;
    for (const EncodedFrame& f : stream.frames) {
        if (f.number >= expected_frames)
            throw FormatError("decode: frame " + std::to_string(f.number) + " beyond expected count " +
                              std::to_string(expected_frames));
        const bool intra_slot = f.number % p.gop_size == 0;
        if (intra_slot != (f.type == FrameType::I))
            throw FormatError("decode: frame " + std::to_string(f.number) + " has the wrong type for its GOP slot");
        received.emplace(f.number, &f);
    }

    DecodeReport report;
    report.present.assign(expected_frames, false);
    std::vector<uint8_t> last;  // bytes of the previously output frame
    for (size_t idx = 0; idx < expected_frames; ++idx) {
        const uint32_t gop_start = static_cast<uint32_t>(idx - idx % p.gop_size);
        const bool gop_decodable = received.contains(gop_start);
        if (!gop_decodable && idx == gop_start) report.dropped_gops.push_back(gop_start / p.gop_size);

        auto it = received.find(static_cast<uint32_t>(idx));
        if (gop_decodable && it != received.end()) {
            const EncodedFrame& f = *it->second;
            std::vector<uint8_t> bytes = unpack_payload(f, frame_bytes);
            if (f.type == FrameType::P)
                for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<uint8_t>(bytes[i] + last[i]);
            last = std::move(bytes);
            report.present[idx] = true;
        } else if (last.empty()) {
            --report.start_offset;
            continue;
        } else {
            ++report.duplicated;
        }
        FrameBuffer frame = blank;
        frame.assign_bytes(last);
        out.frames.push_back(std::move(frame));
    }
    return {std::move(out), std::move(report)};
}

std::pair<RawVideo, RawVideo> dismiss_first_gop(const RawVideo& rx, const RawVideo& ref, const DecodeReport& report,
                                                int gop_size) {
    if (report.start_offset > 0) throw MetricError("dismiss_first_gop: positive start_offset");
    if (gop_size > 0 && report.start_offset % gop_size != 0 &&
        static_cast<size_t>(-report.start_offset) < ref.frames.size())
        throw MetricError("dismiss_first_gop: start_offset is not a whole number of GOPs");
    RawVideo trimmed = ref;
    const size_t skip = static_cast<size_t>(-report.start_offset);
    if (skip > 0) {
        if (skip > trimmed.frames.size()) throw MetricError("dismiss_first_gop: offset exceeds reference length");
        trimmed.frames.erase(trimmed.frames.begin(), trimmed.frames.begin() + static_cast<std::ptrdiff_t>(skip));
    }
    if (trimmed.frames.size() != rx.frames.size())
        throw MetricError("dismiss_first_gop: received video has " + std::to_string(rx.frames.size()) +
                          " frames, trimmed reference has " + std::to_string(trimmed.frames.size()));
    return {rx, std::move(trimmed)};
}

std::vector<uint8_t> serialize_record(const EncodedFrame& frame) {
    ByteWriter w;
    w.u8(kVtesSync);
    w.u8(static_cast<uint8_t>(frame.type));
    w.u32le(frame.number);
    w.u32le(static_cast<uint32_t>(frame.payload.size()));
    w.bytes(frame.payload);
    return w.take();
}

namespace {

EncodedFrame read_record(ByteReader& r) {
    if (r.u8() != kVtesSync) throw FormatError("vtes: bad frame sync byte");
    const uint8_t type = r.u8();
    if (type != static_cast<uint8_t>(FrameType::I) && type != static_cast<uint8_t>(FrameType::P))
        throw FormatError("vtes: unknown frame type");
    EncodedFrame frame;
    frame.type = static_cast<FrameType>(type);
    frame.number = r.u32le();
    const uint32_t len = r.u32le();
    auto payload = r.bytes(len);
    frame.payload.assign(payload.begin(), payload.end());
    return frame;
}

}  // namespace

EncodedFrame parse_record(std::span<const uint8_t> bytes) {
    ByteReader r(bytes, "vtes record");
    EncodedFrame frame = read_record(r);
    if (!r.empty()) throw FormatError("vtes: trailing bytes after record");
    return frame;
}

std::vector<uint8_t> serialize_vtes(const EncodedStream& stream) {
    ByteWriter w;
    w.bytes(std::span(reinterpret_cast<const uint8_t*>(kVtesMagic), 4));
    w.u8(kVtesVersion);
    const StreamParams& p = stream.params;
    w.u16le(p.width);
    w.u16le(p.height);
    w.u16le(p.fps_num);
    w.u16le(p.fps_den);
    w.u16le(p.gop_size);
    w.u8(p.quant_shift);
    for (const EncodedFrame& f : stream.frames) w.bytes(serialize_record(f));
    return w.take();
}

EncodedStream parse_vtes(std::span<const uint8_t> bytes) {
    ByteReader r(bytes, "vtes");
    auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kVtesMagic))) throw FormatError("vtes: bad magic");
    if (r.u8() != kVtesVersion) throw FormatError("vtes: unsupported version");
    EncodedStream stream;
    StreamParams& p = stream.params;
    p.width = r.u16le();
    p.height = r.u16le();
    p.fps_num = r.u16le();
    p.fps_den = r.u16le();
    p.gop_size = r.u16le();
    p.quant_shift = r.u8();
    if (p.gop_size == 0 || p.fps_num == 0 || p.fps_den == 0 || p.quant_shift > 7)
        throw FormatError("vtes: invalid stream header");
    while (!r.empty()) {
        EncodedFrame f = read_record(r);
        if (!stream.frames.empty() && f.number <= stream.frames.back().number)
            throw FormatError("vtes: frame numbers not strictly increasing");
        stream.frames.push_back(std::move(f));
    }
    return stream;
}

void write_vtes_file(const std::filesystem::path& path, const EncodedStream& stream) {
    write_file(path, serialize_vtes(stream));
}

EncodedStream read_vtes_file(const std::filesystem::path& path) { return parse_vtes(read_file(path)); }

}  // namespace vtester
