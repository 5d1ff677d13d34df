#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <algorithm>
#include <fstream>

#include "vtester/bytes.hpp"
#include "vtester/codec.hpp"
#include "vtester/netharness.hpp"
#include "vtester/rawvideo.hpp"
#include "vtester/rtp.hpp"
#include "vtester/trace.hpp"

namespace vtester::fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("vt_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<uint8_t> random_bytes(std::mt19937_64& rng, size_t n, double zero_fraction = 0.0) {
    std::uniform_int_distribution<int> byte(1, 255);
    std::bernoulli_distribution zero(zero_fraction);
    std::vector<uint8_t> out(n);
    for (auto& b : out) b = zero(rng) ? 0 : static_cast<uint8_t>(byte(rng));
    return out;
}

inline RawVideo random_video(std::mt19937_64& rng, int w, int h, size_t frames) {
    RawVideo v;
    v.width = w;
    v.height = h;
    std::uniform_int_distribution<int> byte(0, 255);
    for (size_t i = 0; i < frames; ++i) {
        FrameBuffer f(w, h);
        for (auto& b : f.y()) b = static_cast<uint8_t>(byte(rng));
        for (auto& b : f.u()) b = static_cast<uint8_t>(byte(rng));
        for (auto& b : f.v()) b = static_cast<uint8_t>(byte(rng));
        v.frames.push_back(std::move(f));
    }
    return v;
}

/// Records with the given unwrapped sequences, one packet every 20 ms.
inline std::vector<PacketRecord> records_with_seqs(const std::vector<int64_t>& seqs, size_t size = 1000) {
    std::vector<PacketRecord> out;
    for (size_t i = 0; i < seqs.size(); ++i)
        out.push_back({size, seqs[i], 0.02 * static_cast<double>(seqs[i]), 0.02 * static_cast<double>(seqs[i])});
    return out;
}

/// The stream without the frames whose numbers are listed.
inline EncodedStream without_frames(EncodedStream s, const std::vector<uint32_t>& numbers) {
    std::erase_if(s.frames, [&](const EncodedFrame& f) {
        for (uint32_t n : numbers)
            if (f.number == n) return true;
        return false;
    });
    return s;
}

/// Writes the artifact set of a session without touching the network: the
/// clip is packetized, the listed packet indices are dropped, arrivals are
/// spaced on the media clock plus 1 ms, and the usual files land in `dir`.
inline void write_offline_artifacts(const std::filesystem::path& dir, const RawVideo& ref, int gop,
                                    const std::vector<size_t>& dropped_packets, uint16_t port = 6004) {
    std::filesystem::create_directories(dir);
    const EncodedStream enc = encode(ref, gop, 0);
    const auto packets = packetize(enc, 1400, 0x5654, 100);
    std::vector<RtpPacket> kept;
    std::vector<CapturedPacket> capture;
    for (size_t i = 0; i < packets.size(); ++i) {
        if (std::find(dropped_packets.begin(), dropped_packets.end(), i) != dropped_packets.end()) continue;
        kept.push_back(packets[i]);
        const double t = 1000.0 + packets[i].timestamp / 90000.0 + 0.001 + 1e-5 * static_cast<double>(i);
        const auto sec = static_cast<uint32_t>(t);
        const auto usec = static_cast<uint32_t>((t - sec) * 1e6);
        capture.push_back({sec, usec, synthesize_frame(0x7F000001, 0x7F000001, 40000, port, serialize_packet(packets[i]))});
    }
    const auto dep = depacketize(kept, enc.params);
    auto [rx, report] = decode(dep.stream, ref.frames.size());
    write_pcap(capture, dir / kTraceFile);
    write_vtes_file(dir / kRxEncodedFile, dep.stream);
    write_y4m_file(dir / kRxRawFile, rx);
    write_y4m_file(dir / kRefRawFile, ref);
    const double media = static_cast<double>(ref.frames.size()) / ref.fps();
    const nlohmann::json session = {
        {"capture_port", port},
        {"rtt_samples", {0.0004, 0.0006}},
        {"stream",
         {{"width", enc.params.width}, {"height", enc.params.height}, {"fps_num", enc.params.fps_num},
          {"fps_den", enc.params.fps_den}, {"gop_size", enc.params.gop_size}, {"quant_shift", enc.params.quant_shift}}},
        {"codec", "vtes-rle"},
        {"bitrate_kbps", static_cast<double>(enc.total_bytes()) * 8.0 / media / 1000.0}};
    std::ofstream(dir / kSessionFile) << session.dump(2);
    std::ofstream(dir / kDecodeReportFile) << to_json(report).dump(2);
}

}  // namespace vtester::fixtures
