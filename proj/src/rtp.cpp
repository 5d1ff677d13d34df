#include "vtester/rtp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vtester/bytes.hpp"
#include "vtester/error.hpp"

namespace vtester {

namespace {

constexpr uint8_t kVersionBits = 0x80;

}  // namespace

std::array<uint8_t, kRtpHeaderSize> serialize_header(const RtpPacket& p) {
    std::array<uint8_t, kRtpHeaderSize> h{};
    h[0] = kVersionBits;
    h[1] = static_cast<uint8_t>((p.marker ? 0x80 : 0x00) | (p.payload_type & 0x7F));
    h[2] = static_cast<uint8_t>(p.sequence >> 8);
    h[3] = static_cast<uint8_t>(p.sequence);
    for (int i = 0; i < 4; ++i) {
        h[4 + i] = static_cast<uint8_t>(p.timestamp >> (24 - 8 * i));
        h[8 + i] = static_cast<uint8_t>(p.ssrc >> (24 - 8 * i));
    }
    return h;
}

std::vector<uint8_t> serialize_packet(const RtpPacket& p) {
    std::vector<uint8_t> out;
    out.reserve(p.wire_size());
    const auto header = serialize_header(p);
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), p.payload.begin(), p.payload.end());
    return out;
}

RtpPacket parse_packet(std::span<const uint8_t> data) {
    if (data.size() < kRtpHeaderSize) throw FormatError("rtp: packet shorter than fixed header");
    const uint8_t b0 = data[0];
    if ((b0 >> 6) != 2) throw FormatError("rtp: version is not 2");
    if (b0 & 0x20) throw FormatError("rtp: padding not supported");
    if (b0 & 0x10) throw FormatError("rtp: header extension not supported");
    if (b0 & 0x0F) throw FormatError("rtp: CSRC list not supported");

    ByteReader r(data, "rtp");
    r.u8();
    const uint8_t b1 = r.u8();
    RtpPacket p;
    p.marker = (b1 & 0x80) != 0;
    p.payload_type = b1 & 0x7F;
    p.sequence = r.u16be();
    p.timestamp = r.u32be();
    p.ssrc = r.u32be();
    auto payload = r.bytes(r.remaining());
    p.payload.assign(payload.begin(), payload.end());
    return p;
}

uint32_t frame_timestamp(uint32_t frame_number, uint16_t fps_num, uint16_t fps_den) {
    const double ticks = std::round(static_cast<double>(frame_number) * kRtpClockRate * fps_den / fps_num);
    return static_cast<uint32_t>(static_cast<uint64_t>(ticks));
}

std::vector<RtpPacket> packetize(const EncodedStream& stream, size_t mtu_payload, uint32_t ssrc, uint16_t seq0) {
    if (mtu_payload < 64) throw Error("packetize: mtu_payload must be at least 64 bytes");
    std::vector<RtpPacket> packets;
    uint16_t seq = seq0;
    for (const EncodedFrame& frame : stream.frames) {
        const std::vector<uint8_t> record = serialize_record(frame);
        const uint32_t ts = frame_timestamp(frame.number, stream.params.fps_num, stream.params.fps_den);
        for (size_t off = 0; off < record.size(); off += mtu_payload) {
            const size_t len = std::min(mtu_payload, record.size() - off);
            RtpPacket p;
            p.sequence = seq++;
            p.timestamp = ts;
            p.ssrc = ssrc;
            p.marker = off + len == record.size();
            p.payload.assign(record.begin() + static_cast<std::ptrdiff_t>(off),
                             record.begin() + static_cast<std::ptrdiff_t>(off + len));
            packets.push_back(std::move(p));
        }
    }
    return packets;
}

int64_t SequenceUnwrapper::unwrap(uint16_t seq) {
    if (!last_) {
        last_ = seq;
        return *last_;
    }
    const int64_t prev = *last_;
    const auto prev_low = static_cast<uint16_t>(prev & 0xFFFF);
    int64_t delta = static_cast<int64_t>(seq) - prev_low;
    if (delta < -0x8000) delta += 0x10000;
    else if (delta > 0x8000) delta -= 0x10000;
    last_ = prev + delta;
    return *last_;
}

DepacketizeResult depacketize(std::span<const RtpPacket> packets, const StreamParams& params) {
    // timestamp -> (unwrapped seq -> packet)
    std::map<uint32_t, std::map<int64_t, const RtpPacket*>> groups;
    SequenceUnwrapper unwrapper;
    for (const RtpPacket& p : packets) groups[p.timestamp].emplace(unwrapper.unwrap(p.sequence), &p);

    DepacketizeResult result;
    result.stream.params = params;
    for (const auto& [ts, group] : groups) {
        bool ok = false;
        auto marker = std::find_if(group.rbegin(), group.rend(), [](const auto& kv) { return kv.second->marker; });
        if (marker != group.rend()) {
            // Walk back from the marker over consecutive sequence numbers.
            int64_t first = marker->first;
            while (group.contains(first - 1)) --first;
            std::vector<uint8_t> record;
            for (int64_t s = first; s <= marker->first; ++s) {
                const auto& payload = group.at(s)->payload;
                record.insert(record.end(), payload.begin(), payload.end());
            }
            try {
                EncodedFrame frame = parse_record(record);
                if (frame_timestamp(frame.number, params.fps_num, params.fps_den) == ts) {
                    result.stream.frames.push_back(std::move(frame));
                    ok = true;
                }
            } catch (const FormatError&) {
                // Leading chunk missing; the frame is lost.
            }
        }
        result.complete[ts] = ok;
    }
    std::sort(result.stream.frames.begin(), result.stream.frames.end(),
              [](const EncodedFrame& a, const EncodedFrame& b) { return a.number < b.number; });
    return result;
}

std::vector<uint8_t> frame_tcp(const RtpPacket& p) {
    const std::vector<uint8_t> body = serialize_packet(p);
    if (body.size() > 0xFFFF) throw FormatError("tcp framing: packet exceeds 65535 bytes");
    std::vector<uint8_t> out;
    out.reserve(body.size() + 2);
    out.push_back(static_cast<uint8_t>(body.size() >> 8));
    out.push_back(static_cast<uint8_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::vector<RtpPacket> TcpUnframer::feed(std::span<const uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    std::vector<RtpPacket> out;
    size_t pos = 0;
    while (buffer_.size() - pos >= 2) {
        const size_t len = (static_cast<size_t>(buffer_[pos]) << 8) | buffer_[pos + 1];
        if (buffer_.size() - pos - 2 < len) break;
        out.push_back(parse_packet(std::span(buffer_).subspan(pos + 2, len)));
        pos += 2 + len;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
}

void TcpUnframer::finish() const {
    if (!buffer_.empty())
        throw FormatError("tcp framing: stream truncated inside a packet (" + std::to_string(buffer_.size()) +
                          " bytes pending)");
}

std::vector<RtpPacket> unframe_tcp(std::span<const uint8_t> stream) {
    TcpUnframer unframer;
    auto packets = unframer.feed(stream);
    unframer.finish();
    return packets;
}

}  // namespace vtester
