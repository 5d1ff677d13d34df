#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtester/codec.hpp"
#include "vtester/net.hpp"
#include "vtester/rtp.hpp"
#include "vtester/trace.hpp"

namespace vtester {

enum class Transport { udp_unicast, udp_multicast, tcp };

const char* transport_name(Transport t);
Transport parse_transport(const std::string& name);

inline constexpr int kProtocolVersion = 1;

struct SessionConfig {
    std::string video_id;
    int gop_size = 15;
    int quant_shift = 0;
    int fps_num = 25;
    int fps_den = 1;
    Transport transport = Transport::udp_unicast;
    uint16_t rtp_port = 0;  // client receive port; 0 binds an ephemeral port
    net::Endpoint control{"127.0.0.1", 0};
    std::optional<std::string> multicast_group;
    /// Where the server should send RTP instead of the client's own address,
    /// e.g. an impairment proxy in front of the receiver.
    std::optional<net::Endpoint> send_to;
    double pacing = 1.0;  // 1 = real time, 0 = as fast as possible
    size_t mtu_payload = 1400;
    uint32_t ssrc = 0x5654u;
    uint16_t seq0 = 0;
    size_t rtt_probes = 10;
    std::chrono::milliseconds idle_timeout{2000};
    std::chrono::milliseconds control_timeout{10000};

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DecodeReport& r);
DecodeReport decode_report_from_json(const nlohmann::json& j);

struct SendReport {
    size_t packets = 0;
    size_t bytes = 0;
    double seconds = 0.0;
};

/// Sends packets in order. The packets of frame n wait until
/// n * fps_den / fps_num * pacing seconds after the first packet.
/// Multicast leaves through `multicast_interface` (an IPv4 address, empty for
/// the routing default).
SendReport send_stream(std::span<const RtpPacket> packets, Transport transport, const net::Endpoint& dest,
                       double pacing, const std::string& multicast_interface = "",
                       std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(5000));

struct ReceivedPacket {
    RtpPacket packet;
    double arrival = 0.0;  // wall-clock seconds
};

/// Receive side of a session: bind first, then run() until the line goes idle.
class StreamReceiver {
public:
    StreamReceiver(Transport transport, uint16_t port, std::optional<std::string> multicast_group = std::nullopt,
                   std::string bind_host = "127.0.0.1");

    uint16_t port() const { return port_; }

    /// Blocks until no data arrived for idle_timeout (counted from the start
    /// for the first packet) or, for TCP, the sender closed the connection.
    /// Every packet is appended to `sink` as a synthesized UDP frame as soon as
    /// it is read, if a sink is given.
    std::vector<ReceivedPacket> run(std::chrono::milliseconds idle_timeout, CaptureSink* sink);

    /// Lowers the idle timeout of a running run(), e.g. once the sender is done.
    void shorten_idle(std::chrono::milliseconds idle);
    /// Makes run() return at its next poll.
    void stop() { stop_ = true; }

    size_t malformed() const { return malformed_; }

private:
    std::vector<ReceivedPacket> run_udp(CaptureSink* sink);
    std::vector<ReceivedPacket> run_tcp(CaptureSink* sink);
    bool idle_expired(std::chrono::steady_clock::time_point last) const;

    Transport transport_;
    net::Socket sock_;
    uint16_t port_ = 0;
    uint32_t local_ip_ = 0x7F000001;
    std::atomic<int64_t> idle_ms_{2000};
    std::atomic<bool> stop_{false};
    size_t malformed_ = 0;
};

/// Drops each packet independently with probability p.
class DropDecider {
public:
    DropDecider(double loss_p, uint64_t seed);
    bool drop();

private:
    double loss_p_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct ProxyStats {
    uint64_t received = 0;
    uint64_t forwarded = 0;
    uint64_t dropped = 0;
};

/// UDP forwarder that discards datagrams at random with a seeded generator.
class ImpairProxy {
public:
    ImpairProxy(uint16_t listen_port, net::Endpoint forward, double loss_p, uint64_t seed,
                std::string listen_host = "127.0.0.1");
    ~ImpairProxy();
    ImpairProxy(const ImpairProxy&) = delete;
    ImpairProxy& operator=(const ImpairProxy&) = delete;

    uint16_t port() const { return port_; }
    void start();
    void stop();
    /// Blocks the caller; for the CLI.
    void run_forever();

    ProxyStats stats() const;
    /// Arrival indices (0-based) of every dropped datagram, in order.
    std::vector<uint64_t> drop_log() const;

private:
    void loop();

    net::Socket in_;
    net::Socket out_;
    uint16_t port_ = 0;
    net::Endpoint forward_;
    DropDecider decider_;
    std::atomic<bool> running_{false};
    std::thread thread_;
    mutable std::mutex mu_;
    ProxyStats stats_;
    std::vector<uint64_t> drops_;
};

/// n ping/pong round trips over the control channel, seconds each.
std::vector<double> measure_rtt(net::ControlChannel& control, size_t n,
                                std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

/// Concurrent test server: one handler thread per control connection.
class Server {
public:
    Server(std::filesystem::path database_dir, uint16_t control_port, std::string bind_host = "127.0.0.1");
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    uint16_t port() const { return port_; }
    void start();
    void stop();
    void run_forever();

    size_t sessions_completed() const { return completed_.load(); }
    size_t active_sessions() const;

private:
    struct Handler {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> finished;
    };

    void accept_loop();
    void handle(net::Socket conn);
    void reap_finished();

    std::filesystem::path database_dir_;
    net::Socket listener_;
    uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    mutable std::mutex mu_;
    std::list<Handler> handlers_;
    std::vector<int> open_fds_;
    std::atomic<size_t> active_{0};
    std::atomic<size_t> completed_{0};
};

/// Path of a video in the local database.
std::filesystem::path video_path(const std::filesystem::path& database_dir, const std::string& video_id);

struct TestArtifacts {
    std::filesystem::path trace_path;
    std::filesystem::path rx_encoded_path;
    std::filesystem::path rx_raw_path;
    std::filesystem::path ref_raw_path;
    std::filesystem::path report_path;   // decode report JSON
    std::filesystem::path session_path;  // session metadata JSON
    DecodeReport decode_report;
    nlohmann::json session_meta;
};

inline constexpr char kTraceFile[] = "trace.pcap";
inline constexpr char kRxEncodedFile[] = "rx.vtes";
inline constexpr char kRxRawFile[] = "rx.y4m";
inline constexpr char kRefRawFile[] = "ref.y4m";
inline constexpr char kDecodeReportFile[] = "decode_report.json";
inline constexpr char kSessionFile[] = "session.json";

/// Runs one test session against a server and writes the artifacts to out_dir.
/// The reference video is read from the client's copy of the database.
TestArtifacts run_client(const SessionConfig& config, const std::filesystem::path& database_dir,
                         const std::filesystem::path& out_dir);

}  // namespace vtester
