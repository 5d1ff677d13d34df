#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace vtester {

struct CapturedPacket {
    uint32_t ts_sec = 0;
    uint32_t ts_usec = 0;  // < 1'000'000
    std::vector<uint8_t> data;  // Ethernet frame

    double time() const { return ts_sec + ts_usec * 1e-6; }
    bool operator==(const CapturedPacket&) const = default;
};

/// Per-packet QoS tuple pulled out of a trace.
struct PacketRecord {
    size_t size = 0;      // RTP packet bytes (UDP payload)
    int64_t seq = 0;      // unwrapped sequence number
    double rtp_ts = 0.0;  // seconds on the 90 kHz media clock
    double arrival = 0.0; // capture time, seconds

    bool operator==(const PacketRecord&) const = default;
};

enum class PcapByteOrder { little, big };

inline constexpr uint32_t kPcapMagic = 0xA1B2C3D4;
inline constexpr uint32_t kLinkTypeEthernet = 1;
inline constexpr size_t kPcapGlobalHeaderSize = 24;
inline constexpr size_t kPcapRecordHeaderSize = 16;

std::vector<uint8_t> serialize_pcap(std::span<const CapturedPacket> packets,
                                    PcapByteOrder order = PcapByteOrder::little);
std::vector<CapturedPacket> parse_pcap(std::span<const uint8_t> bytes);

void write_pcap(std::span<const CapturedPacket> packets, const std::filesystem::path& path);
std::vector<CapturedPacket> read_pcap(const std::filesystem::path& path);

/// IPv4 addresses are host-order integers, e.g. 0x7F000001 for 127.0.0.1.
uint32_t parse_ipv4(const std::string& dotted);
std::string format_ipv4(uint32_t addr);

inline constexpr size_t kEthernetHeaderSize = 14;
inline constexpr size_t kIpv4HeaderSize = 20;
inline constexpr size_t kUdpHeaderSize = 8;
inline constexpr size_t kMaxUdpPayload = 65507;

/// Wraps an RTP datagram in zero-MAC Ethernet II, IPv4 and UDP headers.
std::vector<uint8_t> synthesize_frame(uint32_t src_ip, uint32_t dst_ip, uint16_t src_port, uint16_t dst_port,
                                      std::span<const uint8_t> rtp_bytes);

/// Ones'-complement sum folded to 16 bits (not inverted).
uint16_t ones_complement_sum(std::span<const uint8_t> bytes);

struct RecordExtraction {
    std::vector<PacketRecord> records;
    size_t skipped = 0;  // datagrams on the port that did not parse as RTP
};

/// RTP datagrams to dst_port (0: any port), sorted by arrival.
RecordExtraction extract_rtp_records(std::span<const CapturedPacket> packets, uint16_t dst_port);

/// Append-only packet store shared between a receive loop and whoever reads
/// the trace after the session ends.
class CaptureSink {
public:
    void append(CapturedPacket packet);
    /// Stamps with the given wall-clock time in seconds.
    void append(double wall_time, std::vector<uint8_t> frame);
    size_t size() const;
    std::vector<CapturedPacket> snapshot() const;

private:
    mutable std::mutex mu_;
    std::vector<CapturedPacket> packets_;
};

}  // namespace vtester
