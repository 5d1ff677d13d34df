#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vtester/codec.hpp"

namespace vtester {

inline constexpr uint32_t kRtpClockRate = 90000;
inline constexpr size_t kRtpHeaderSize = 12;
inline constexpr uint8_t kDefaultPayloadType = 96;

// Fixed 12-byte RTP header (version 2, no padding, extension or CSRCs) plus payload.
struct RtpPacket {
    bool marker = false;
    uint8_t payload_type = kDefaultPayloadType;
    uint16_t sequence = 0;
    uint32_t timestamp = 0;
    uint32_t ssrc = 0;
    std::vector<uint8_t> payload;

    size_t wire_size() const { return kRtpHeaderSize + payload.size(); }
    bool operator==(const RtpPacket&) const = default;
};

std::array<uint8_t, kRtpHeaderSize> serialize_header(const RtpPacket& p);
std::vector<uint8_t> serialize_packet(const RtpPacket& p);
RtpPacket parse_packet(std::span<const uint8_t> data);

/// 90 kHz presentation timestamp of a frame.
uint32_t frame_timestamp(uint32_t frame_number, uint16_t fps_num, uint16_t fps_den);

/// Splits every frame's VTES record into chunks of at most mtu_payload bytes.
std::vector<RtpPacket> packetize(const EncodedStream& stream, size_t mtu_payload = 1400, uint32_t ssrc = 0,
                                 uint16_t seq0 = 0);

struct DepacketizeResult {
    EncodedStream stream;
    std::map<uint32_t, bool> complete;  // RTP timestamp -> frame reassembled
};

/// Reassembles whatever frames arrived intact; `params` comes from session setup
/// since stream-level fields are not carried in RTP.
DepacketizeResult depacketize(std::span<const RtpPacket> packets, const StreamParams& params);

/// Extends 16-bit sequence numbers into a monotone count; a drop of more than
/// 2^15 is read as a wrap.
class SequenceUnwrapper {
public:
    int64_t unwrap(uint16_t seq);

private:
    std::optional<int64_t> last_;
};

// Two-byte big-endian length prefix per packet, for stream transports.
std::vector<uint8_t> frame_tcp(const RtpPacket& p);

class TcpUnframer {
public:
    /// Appends bytes and returns every packet completed by them.
    std::vector<RtpPacket> feed(std::span<const uint8_t> bytes);
    /// True when no partial packet is buffered.
    bool idle() const { return buffer_.empty(); }
    /// Throws FormatError if the stream ended inside a packet.
    void finish() const;

private:
    std::vector<uint8_t> buffer_;
};

std::vector<RtpPacket> unframe_tcp(std::span<const uint8_t> stream);

}  // namespace vtester
