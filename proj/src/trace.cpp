#include "vtester/trace.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cmath>

#include "vtester/bytes.hpp"
#include "vtester/error.hpp"
#include "vtester/rtp.hpp"

namespace vtester {

namespace {

constexpr uint16_t kEtherTypeIpv4 = 0x0800;
constexpr uint8_t kIpProtoUdp = 17;
constexpr uint16_t kSnapLen = 65535;

struct OrderedReader {
    ByteReader r;
    bool big;
    uint16_t u16() { return big ? r.u16be() : r.u16le(); }
    uint32_t u32() { return big ? r.u32be() : r.u32le(); }
};

}  // namespace

std::vector<uint8_t> serialize_pcap(std::span<const CapturedPacket> packets, PcapByteOrder order) {
    ByteWriter w;
    const bool big = order == PcapByteOrder::big;
    auto u16 = [&](uint16_t v) { big ? w.u16be(v) : w.u16le(v); };
    auto u32 = [&](uint32_t v) { big ? w.u32be(v) : w.u32le(v); };
    u32(kPcapMagic);
    u16(2);
    u16(4);
    u32(0);  // thiszone
    u32(0);  // sigfigs
    u32(kSnapLen);
    u32(kLinkTypeEthernet);
    for (const CapturedPacket& p : packets) {
        if (p.ts_usec >= 1'000'000) throw FormatError("pcap: ts_usec out of range");
        u32(p.ts_sec);
        u32(p.ts_usec);
        u32(static_cast<uint32_t>(p.data.size()));
        u32(static_cast<uint32_t>(p.data.size()));
        w.bytes(p.data);
    }
    return w.take();
}

std::vector<CapturedPacket> parse_pcap(std::span<const uint8_t> bytes) {
    if (bytes.size() < 4) throw FormatError("pcap: file too short");
    const uint32_t magic_le = bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
    bool big;
    if (magic_le == kPcapMagic) big = false;
    else if (magic_le == 0xD4C3B2A1) big = true;
    else throw FormatError("pcap: bad magic number");

    OrderedReader in{ByteReader(bytes, "pcap"), big};
    in.u32();
    in.u16();  // version major
    in.u16();  // version minor
    in.u32();
    in.u32();
    in.u32();  // snaplen
    if (in.u32() != kLinkTypeEthernet) throw FormatError("pcap: only Ethernet link type is supported");

    std::vector<CapturedPacket> out;
    while (!in.r.empty()) {
        CapturedPacket p;
        p.ts_sec = in.u32();
        p.ts_usec = in.u32();
        const uint32_t incl = in.u32();
        const uint32_t orig = in.u32();
        if (incl != orig) throw FormatError("pcap: snaplen-truncated packet");
        auto data = in.r.bytes(incl);
        p.data.assign(data.begin(), data.end());
        out.push_back(std::move(p));
    }
    return out;
}

void write_pcap(std::span<const CapturedPacket> packets, const std::filesystem::path& path) {
    write_file(path, serialize_pcap(packets));
}

std::vector<CapturedPacket> read_pcap(const std::filesystem::path& path) { return parse_pcap(read_file(path)); }

uint32_t parse_ipv4(const std::string& dotted) {
    in_addr addr{};
    if (inet_pton(AF_INET, dotted.c_str(), &addr) != 1) throw Error("not an IPv4 address: " + dotted);
    return ntohl(addr.s_addr);
}

std::string format_ipv4(uint32_t addr) {
    in_addr a{htonl(addr)};
    char buf[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, &a, buf, sizeof buf);
    return buf;
}

uint16_t ones_complement_sum(std::span<const uint8_t> bytes) {
    uint32_t sum = 0;
    for (size_t i = 0; i + 1 < bytes.size(); i += 2) sum += (bytes[i] << 8) | bytes[i + 1];
    if (bytes.size() % 2) sum += bytes.back() << 8;
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<uint16_t>(sum);
}

std::vector<uint8_t> synthesize_frame(uint32_t src_ip, uint32_t dst_ip, uint16_t src_port, uint16_t dst_port,
                                      std::span<const uint8_t> rtp_bytes) {
    if (rtp_bytes.size() > kMaxUdpPayload) throw FormatError("synthesize_frame: payload exceeds UDP maximum");
    ByteWriter w;
    for (int i = 0; i < 12; ++i) w.u8(0);  // destination + source MAC
    w.u16be(kEtherTypeIpv4);

    ByteWriter ip;
    ip.u8(0x45);  // IPv4, 5-word header
    ip.u8(0);
    ip.u16be(static_cast<uint16_t>(kIpv4HeaderSize + kUdpHeaderSize + rtp_bytes.size()));
    ip.u16be(0);       // identification
    ip.u16be(0x4000);  // don't fragment
    ip.u8(64);         // TTL
    ip.u8(kIpProtoUdp);
    ip.u16be(0);  // checksum placeholder
    ip.u32be(src_ip);
    ip.u32be(dst_ip);
    std::vector<uint8_t> ip_header = ip.take();
    const uint16_t checksum = static_cast<uint16_t>(~ones_complement_sum(ip_header));
    ip_header[10] = static_cast<uint8_t>(checksum >> 8);
    ip_header[11] = static_cast<uint8_t>(checksum);
    w.bytes(ip_header);

    w.u16be(src_port);
    w.u16be(dst_port);
    w.u16be(static_cast<uint16_t>(kUdpHeaderSize + rtp_bytes.size()));
    w.u16be(0);  // no UDP checksum
    w.bytes(rtp_bytes);
    return w.take();
}

RecordExtraction extract_rtp_records(std::span<const CapturedPacket> packets, uint16_t dst_port) {
    struct Pending {
        double arrival;
        size_t size;
        uint16_t seq;
        uint32_t ts;
    };
    std::vector<Pending> pending;
    RecordExtraction out;
    for (const CapturedPacket& cp : packets) {
        std::span<const uint8_t> frame(cp.data);
        if (frame.size() < kEthernetHeaderSize + kIpv4HeaderSize + kUdpHeaderSize) continue;
        if (((frame[12] << 8) | frame[13]) != kEtherTypeIpv4) continue;
        auto ip = frame.subspan(kEthernetHeaderSize);
        if ((ip[0] >> 4) != 4) continue;
        const size_t ihl = static_cast<size_t>(ip[0] & 0x0F) * 4;
        if (ihl < kIpv4HeaderSize || ip[9] != kIpProtoUdp || ip.size() < ihl + kUdpHeaderSize) continue;
        auto udp = ip.subspan(ihl);
        if (dst_port != 0 && ((udp[2] << 8) | udp[3]) != dst_port) continue;
        const size_t udp_len = (udp[4] << 8) | udp[5];
        if (udp_len < kUdpHeaderSize || udp_len > udp.size()) {
            ++out.skipped;
            continue;
        }
        auto payload = udp.subspan(kUdpHeaderSize, udp_len - kUdpHeaderSize);
        try {
            const RtpPacket p = parse_packet(payload);
            pending.push_back({cp.time(), payload.size(), p.sequence, p.timestamp});
        } catch (const FormatError&) {
            ++out.skipped;
        }
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending& a, const Pending& b) { return a.arrival < b.arrival; });
    SequenceUnwrapper unwrapper;
    out.records.reserve(pending.size());
    for (const Pending& p : pending)
        out.records.push_back({p.size, unwrapper.unwrap(p.seq), static_cast<double>(p.ts) / kRtpClockRate, p.arrival});
    return out;
}

void CaptureSink::append(CapturedPacket packet) {
    std::lock_guard lock(mu_);
    packets_.push_back(std::move(packet));
}

void CaptureSink::append(double wall_time, std::vector<uint8_t> frame) {
    CapturedPacket p;
    double whole = std::floor(wall_time);
    auto usec = static_cast<uint32_t>(std::llround((wall_time - whole) * 1e6));
    if (usec >= 1'000'000) {
        usec -= 1'000'000;
        whole += 1;
    }
    p.ts_sec = static_cast<uint32_t>(whole);
    p.ts_usec = usec;
    p.data = std::move(frame);
    append(std::move(p));
}

size_t CaptureSink::size() const {
    std::lock_guard lock(mu_);
    return packets_.size();
}

std::vector<CapturedPacket> CaptureSink::snapshot() const {
    std::lock_guard lock(mu_);
    return packets_;
}

}  // namespace vtester
