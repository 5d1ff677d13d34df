#include "vtester/netharness.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <memory>

#include "vtester/bytes.hpp"
#include "vtester/error.hpp"

namespace vtester {

using namespace std::chrono_literals;
using nlohmann::json;

namespace {

constexpr int kSocketBuffer = 16 << 20;
constexpr auto kPoll = 10ms;

bool is_multicast(const std::string& host) {
    in_addr a{};
    if (inet_pton(AF_INET, host.c_str(), &a) != 1) return false;
    return IN_MULTICAST(ntohl(a.s_addr));
}

sockaddr_in to_sockaddr(const net::Endpoint& e) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) != 1)
        throw NetError("expected a numeric IPv4 address, got " + e.host);
    return addr;
}

std::string local_host(const net::Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "0.0.0.0";
    char buf[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
    return buf;
}

}  // namespace

const char* transport_name(Transport t) {
    switch (t) {
        case Transport::udp_unicast: return "udp_unicast";
        case Transport::udp_multicast: return "udp_multicast";
        case Transport::tcp: return "tcp";
    }
    return "?";
}

Transport parse_transport(const std::string& name) {
    if (name == "udp_unicast" || name == "udp") return Transport::udp_unicast;
    if (name == "udp_multicast" || name == "multicast") return Transport::udp_multicast;
    if (name == "tcp") return Transport::tcp;
    throw ConfigError("unknown transport '" + name + "' (expected udp_unicast, udp_multicast or tcp)");
}

void SessionConfig::validate() const {
    if (video_id.empty()) throw ConfigError("session: video_id is required");
    if (gop_size < 1 || gop_size > 0xFFFF) throw ConfigError("session: gop_size must be in 1..65535");
    if (quant_shift < 0 || quant_shift > 7) throw ConfigError("session: quant_shift must be in 0..7");
    if (fps_num <= 0 || fps_den <= 0 || fps_num > 0xFFFF || fps_den > 0xFFFF)
        throw ConfigError("session: frame rate terms must be in 1..65535");
    if (control.port == 0) throw ConfigError("session: control port must be nonzero");
    if ((transport == Transport::udp_multicast) != multicast_group.has_value())
        throw ConfigError("session: multicast group must be set exactly for udp_multicast");
    if (multicast_group && !is_multicast(*multicast_group))
        throw ConfigError("session: " + *multicast_group + " is not in 224.0.0.0/4");
    if (pacing < 0.0) throw ConfigError("session: pacing must be >= 0");
    if (mtu_payload < 64) throw ConfigError("session: mtu_payload must be >= 64");
}

json to_json(const SessionConfig& c) {
    json j = {{"video", c.video_id},
              {"gop_size", c.gop_size},
              {"quant_shift", c.quant_shift},
              {"fps_num", c.fps_num},
              {"fps_den", c.fps_den},
              {"transport", transport_name(c.transport)},
              {"rtp_port", c.rtp_port},
              {"control", c.control.str()},
              {"pacing", c.pacing},
              {"mtu_payload", c.mtu_payload},
              {"ssrc", c.ssrc},
              {"seq0", c.seq0}};
    if (c.multicast_group) j["multicast_group"] = *c.multicast_group;
    if (c.send_to) j["send_to"] = c.send_to->str();
    return j;
}

SessionConfig session_config_from_json(const json& j) {
    SessionConfig c;
    c.video_id = j.at("video").get<std::string>();
    c.gop_size = j.at("gop_size").get<int>();
    c.quant_shift = j.at("quant_shift").get<int>();
    c.fps_num = j.at("fps_num").get<int>();
    c.fps_den = j.at("fps_den").get<int>();
    c.transport = parse_transport(j.at("transport").get<std::string>());
    c.rtp_port = j.at("rtp_port").get<uint16_t>();
    if (j.contains("control")) c.control = net::Endpoint::parse(j["control"].get<std::string>());
    c.pacing = j.value("pacing", 1.0);
    c.mtu_payload = j.value("mtu_payload", size_t{1400});
    c.ssrc = j.value("ssrc", c.ssrc);
    c.seq0 = j.value("seq0", uint16_t{0});
    if (j.contains("multicast_group")) c.multicast_group = j["multicast_group"].get<std::string>();
    if (j.contains("send_to")) c.send_to = net::Endpoint::parse(j["send_to"].get<std::string>());
    return c;
}

json to_json(const DecodeReport& r) {
    std::string present;
    present.reserve(r.present.size());
    for (bool p : r.present) present.push_back(p ? '1' : '0');
    return {{"present", present},
            {"duplicated", r.duplicated},
            {"dropped_gops", r.dropped_gops},
            {"start_offset", r.start_offset}};
}

DecodeReport decode_report_from_json(const json& j) {
    DecodeReport r;
    for (char c : j.at("present").get<std::string>()) r.present.push_back(c == '1');
    r.duplicated = j.at("duplicated").get<size_t>();
    r.dropped_gops = j.at("dropped_gops").get<std::vector<uint32_t>>();
    r.start_offset = j.at("start_offset").get<int>();
    return r;
}

SendReport send_stream(std::span<const RtpPacket> packets, Transport transport, const net::Endpoint& dest,
                       double pacing, const std::string& multicast_interface,
                       std::chrono::milliseconds connect_timeout) {
    SendReport report;
    if (packets.empty()) return report;

    net::Socket sock;
    sockaddr_in to{};
    if (transport == Transport::tcp) {
        sock = net::tcp_connect(dest, connect_timeout);
    } else {
        sock = net::udp_socket();
        net::grow_buffers(sock, kSocketBuffer);
        to = to_sockaddr(dest);
        if (transport == Transport::udp_multicast) {
            const unsigned char ttl = 1, loop = 1;
            ::setsockopt(sock.fd(), IPPROTO_IP, IP_MULTICAST_TTL, &ttl, sizeof ttl);
            ::setsockopt(sock.fd(), IPPROTO_IP, IP_MULTICAST_LOOP, &loop, sizeof loop);
            if (!multicast_interface.empty()) {
                in_addr iface{htonl(parse_ipv4(multicast_interface))};
                ::setsockopt(sock.fd(), IPPROTO_IP, IP_MULTICAST_IF, &iface, sizeof iface);
            }
        }
    }

    const auto start = std::chrono::steady_clock::now();
    const uint32_t ts0 = packets.front().timestamp;
    for (const RtpPacket& p : packets) {
        if (pacing > 0.0) {
            const double media_offset = static_cast<double>(p.timestamp - ts0) / kRtpClockRate;
            std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                      std::chrono::duration<double>(media_offset * pacing)));
        }
        if (transport == Transport::tcp) {
            net::send_all(sock, frame_tcp(p));
        } else {
            const auto bytes = serialize_packet(p);
            for (;;) {
                const ssize_t n = ::sendto(sock.fd(), bytes.data(), bytes.size(), 0,
                                           reinterpret_cast<const sockaddr*>(&to), sizeof to);
                if (n >= 0) break;
                if (errno == EINTR) continue;
                if (errno == ENOBUFS || errno == EAGAIN) {
                    std::this_thread::sleep_for(100us);
                    continue;
                }
                throw NetError(std::string("sendto ") + dest.str() + ": " + std::strerror(errno));
            }
        }
        ++report.packets;
        report.bytes += p.wire_size();
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

StreamReceiver::StreamReceiver(Transport transport, uint16_t port, std::optional<std::string> multicast_group,
                               std::string bind_host)
    : transport_(transport) {
    if (bind_host != "0.0.0.0") local_ip_ = parse_ipv4(bind_host);
    if (transport == Transport::tcp) {
        sock_ = net::tcp_listen(bind_host, port, port_);
        return;
    }
    sock_ = net::udp_socket();
    net::grow_buffers(sock_, kSocketBuffer);
    if (transport == Transport::udp_multicast) {
        if (!multicast_group) throw ConfigError("multicast receiver needs a group address");
        port_ = net::bind_socket(sock_, "0.0.0.0", port);
        ip_mreq mreq{};
        inet_pton(AF_INET, multicast_group->c_str(), &mreq.imr_multiaddr);
        mreq.imr_interface.s_addr = htonl(bind_host == "0.0.0.0" ? INADDR_LOOPBACK : parse_ipv4(bind_host));
        if (::setsockopt(sock_.fd(), IPPROTO_IP, IP_ADD_MEMBERSHIP, &mreq, sizeof mreq) != 0)
            throw NetError("cannot join multicast group " + *multicast_group + ": " + std::strerror(errno));
        local_ip_ = parse_ipv4(*multicast_group);
    } else {
        port_ = net::bind_socket(sock_, bind_host, port);
    }
}

void StreamReceiver::shorten_idle(std::chrono::milliseconds idle) {
    int64_t current = idle_ms_.load();
    while (idle.count() < current && !idle_ms_.compare_exchange_weak(current, idle.count())) {
    }
}

bool StreamReceiver::idle_expired(std::chrono::steady_clock::time_point last) const {
    return std::chrono::steady_clock::now() - last > std::chrono::milliseconds(idle_ms_.load());
}

std::vector<ReceivedPacket> StreamReceiver::run(std::chrono::milliseconds idle_timeout, CaptureSink* sink) {
    shorten_idle(idle_timeout);
    if (idle_timeout.count() > idle_ms_.load()) idle_ms_ = idle_timeout.count();
    return transport_ == Transport::tcp ? run_tcp(sink) : run_udp(sink);
}

std::vector<ReceivedPacket> StreamReceiver::run_udp(CaptureSink* sink) {
    std::vector<ReceivedPacket> out;
    std::vector<uint8_t> buf(65536);
    auto last = std::chrono::steady_clock::now();
    while (!stop_ && !idle_expired(last)) {
        if (!net::wait_readable(sock_, kPoll)) continue;
        // Drain everything queued before polling again.
        for (;;) {
            sockaddr_in from{};
            socklen_t len = sizeof from;
            const ssize_t n = ::recvfrom(sock_.fd(), buf.data(), buf.size(), MSG_DONTWAIT,
                                         reinterpret_cast<sockaddr*>(&from), &len);
            if (n < 0) break;
            const double arrival = net::wall_time();
            last = std::chrono::steady_clock::now();
            const std::span<const uint8_t> bytes(buf.data(), static_cast<size_t>(n));
            if (sink)
                sink->append(arrival, synthesize_frame(ntohl(from.sin_addr.s_addr), local_ip_, ntohs(from.sin_port),
                                                       port_, bytes));
            try {
                out.push_back({parse_packet(bytes), arrival});
            } catch (const FormatError&) {
                ++malformed_;
            }
        }
    }
    return out;
}

std::vector<ReceivedPacket> StreamReceiver::run_tcp(CaptureSink* sink) {
    std::vector<ReceivedPacket> out;
    auto last = std::chrono::steady_clock::now();
    net::Socket conn;
    while (!stop_ && !idle_expired(last)) {
        if (!net::wait_readable(sock_, kPoll)) continue;
        conn = net::Socket(::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC));
        if (conn.valid()) break;
    }
    if (!conn.valid()) return out;

    sockaddr_in peer{};
    socklen_t plen = sizeof peer;
    ::getpeername(conn.fd(), reinterpret_cast<sockaddr*>(&peer), &plen);
    TcpUnframer unframer;
    std::vector<uint8_t> buf(65536);
    last = std::chrono::steady_clock::now();
    while (!stop_ && !idle_expired(last)) {
        if (!net::wait_readable(conn, kPoll)) continue;
        const ssize_t n = ::recv(conn.fd(), buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;  // closed by the sender, or reset mid-stream
        const double arrival = net::wall_time();
        last = std::chrono::steady_clock::now();
        std::vector<RtpPacket> packets;
        try {
            packets = unframer.feed(std::span<const uint8_t>(buf.data(), static_cast<size_t>(n)));
        } catch (const FormatError&) {
            ++malformed_;
            break;  // framing lost; nothing after this point can be trusted
        }
        for (RtpPacket& p : packets) {
            if (sink)
                sink->append(arrival, synthesize_frame(ntohl(peer.sin_addr.s_addr), local_ip_, ntohs(peer.sin_port),
                                                       port_, serialize_packet(p)));
            out.push_back({std::move(p), arrival});
        }
    }
    // A partial trailing packet is the disconnect case: keep what completed.
    return out;
}

DropDecider::DropDecider(double loss_p, uint64_t seed) : loss_p_(loss_p), rng_(seed) {
    if (!(loss_p >= 0.0 && loss_p <= 1.0)) throw ConfigError("loss probability must be in [0, 1]");
}

bool DropDecider::drop() { return uniform_(rng_) < loss_p_; }

ImpairProxy::ImpairProxy(uint16_t listen_port, net::Endpoint forward, double loss_p, uint64_t seed,
                         std::string listen_host)
    : forward_(std::move(forward)), decider_(loss_p, seed) {
    in_ = net::udp_socket();
    net::grow_buffers(in_, kSocketBuffer);
    port_ = net::bind_socket(in_, listen_host, listen_port);
    out_ = net::udp_socket();
    net::grow_buffers(out_, kSocketBuffer);
}

ImpairProxy::~ImpairProxy() { stop(); }

void ImpairProxy::start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] { loop(); });
}

void ImpairProxy::stop() {
    running_ = false;
    if (thread_.joinable()) thread_.join();
}

void ImpairProxy::run_forever() {
    running_ = true;
    loop();
}

void ImpairProxy::loop() {
    const sockaddr_in to = to_sockaddr(forward_);
    std::vector<uint8_t> buf(65536);
    while (running_) {
        if (!net::wait_readable(in_, kPoll)) continue;
        for (;;) {
            const ssize_t n = ::recv(in_.fd(), buf.data(), buf.size(), MSG_DONTWAIT);
            if (n < 0) break;
            bool dropped;
            {
                std::lock_guard lock(mu_);
                const uint64_t index = stats_.received++;
                dropped = decider_.drop();
                if (dropped) {
                    ++stats_.dropped;
                    drops_.push_back(index);
                } else {
                    ++stats_.forwarded;
                }
            }
            if (!dropped)
                while (::sendto(out_.fd(), buf.data(), static_cast<size_t>(n), 0,
                                reinterpret_cast<const sockaddr*>(&to), sizeof to) < 0 &&
                       (errno == EINTR || errno == ENOBUFS || errno == EAGAIN)) {
                }
        }
    }
}

ProxyStats ImpairProxy::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::vector<uint64_t> ImpairProxy::drop_log() const {
    std::lock_guard lock(mu_);
    return drops_;
}

std::vector<double> measure_rtt(net::ControlChannel& control, size_t n, std::chrono::milliseconds timeout) {
    std::vector<double> rtts;
    rtts.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        const auto sent = std::chrono::steady_clock::now();
        const double t0 = std::chrono::duration<double>(sent.time_since_epoch()).count();
        control.send({{"type", "ping"}, {"t0", t0}, {"seq", k}});
        for (;;) {
            const auto left = timeout - std::chrono::duration_cast<std::chrono::milliseconds>(
                                            std::chrono::steady_clock::now() - sent);
            auto msg = left.count() > 0 ? control.receive(left) : std::nullopt;
            if (!msg) throw NetError("ping " + std::to_string(k) + " timed out");
            if (msg->value("type", "") == "pong" && msg->value("seq", size_t{0}) == k) break;
        }
        rtts.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - sent).count());
    }
    return rtts;
}

std::filesystem::path video_path(const std::filesystem::path& database_dir, const std::string& video_id) {
    if (video_id.find('/') != std::string::npos || video_id.find("..") != std::string::npos)
        throw ConfigError("video id '" + video_id + "' must be a plain name");
    return database_dir / (video_id + ".y4m");
}

Server::Server(std::filesystem::path database_dir, uint16_t control_port, std::string bind_host)
    : database_dir_(std::move(database_dir)) {
    listener_ = net::tcp_listen(bind_host, control_port, port_);
}

Server::~Server() { stop(); }

void Server::start() {
    if (running_.exchange(true)) return;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::run_forever() {
    running_ = true;
    accept_loop();
}

void Server::stop() {
    running_ = false;
    if (acceptor_.joinable()) acceptor_.join();
    std::list<Handler> handlers;
    {
        std::lock_guard lock(mu_);
        for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        handlers.swap(handlers_);
    }
    for (Handler& h : handlers)
        if (h.thread.joinable()) h.thread.join();
}

void Server::reap_finished() {
    std::list<Handler> done;
    {
        std::lock_guard lock(mu_);
        for (auto it = handlers_.begin(); it != handlers_.end();) {
            auto next = std::next(it);
            if (it->finished->load()) done.splice(done.end(), handlers_, it);
            it = next;
        }
    }
    for (Handler& h : done) h.thread.join();
}

size_t Server::active_sessions() const { return active_.load(); }

void Server::accept_loop() {
    while (running_) {
        if (!net::wait_readable(listener_, 100ms)) continue;
        net::Socket conn(::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC));
        reap_finished();
        if (!conn.valid()) continue;
        auto finished = std::make_shared<std::atomic<bool>>(false);
        std::lock_guard lock(mu_);
        open_fds_.push_back(conn.fd());
        handlers_.push_back({std::thread([this, finished, c = std::move(conn)]() mutable {
                                 handle(std::move(c));
                                 *finished = true;
                             }),
                             finished});
    }
}

namespace {

struct Session {
    SessionConfig config;
    EncodedStream stream;
    std::vector<RtpPacket> packets;
    net::Endpoint dest;
};

json error_reply(const std::string& message) { return {{"type", "error"}, {"message", message}}; }

Session prepare_session(const std::filesystem::path& database_dir, const json& msg, const std::string& peer) {
    Session s;
    s.config = session_config_from_json(msg);
    const std::filesystem::path path = video_path(database_dir, s.config.video_id);
    if (!std::filesystem::exists(path)) throw ConfigError("unknown video '" + s.config.video_id + "'");
    RawVideo video = read_y4m_file(path);
    if (video.frames.empty()) throw ConfigError("video '" + s.config.video_id + "' has no frames");
    video.fps_num = s.config.fps_num;
    video.fps_den = s.config.fps_den;
    s.stream = encode(video, s.config.gop_size, s.config.quant_shift);
    s.packets = packetize(s.stream, s.config.mtu_payload, s.config.ssrc, s.config.seq0);
    if (s.config.send_to) {
        s.dest = *s.config.send_to;
    } else if (s.config.transport == Transport::udp_multicast) {
        if (!s.config.multicast_group) throw ConfigError("multicast session without a group");
        s.dest = {*s.config.multicast_group, s.config.rtp_port};
    } else {
        s.dest = {peer, s.config.rtp_port};
    }
    if (s.dest.port == 0) throw ConfigError("session: destination RTP port is zero");
    return s;
}

}  // namespace

void Server::handle(net::Socket conn) {
    ++active_;
    const int fd = conn.fd();
    try {
        const std::string peer = net::peer_host(conn);
        const std::string local = local_host(conn);
        net::ControlChannel ch(std::move(conn));
        std::optional<Session> session;
        while (running_) {
            auto msg = ch.receive(200ms);
            if (!msg) continue;
            const std::string type = msg->value("type", "");
            if (type == "hello") {
                ch.send({{"type", "hello"}, {"version", kProtocolVersion}, {"server", "vtester"}});
            } else if (type == "setup") {
                try {
                    session = prepare_session(database_dir_, *msg, peer);
                    const StreamParams& p = session->stream.params;
                    ch.send({{"type", "ok"},
                             {"rtp_port", session->dest.port},
                             {"frame_count", session->stream.frames.size()},
                             {"width", p.width},
                             {"height", p.height},
                             {"fps_num", p.fps_num},
                             {"fps_den", p.fps_den},
                             {"gop_size", p.gop_size},
                             {"quant_shift", p.quant_shift},
                             {"packets", session->packets.size()},
                             {"bytes", session->stream.total_bytes()}});
                } catch (const std::exception& e) {
                    session.reset();
                    ch.send(error_reply(e.what()));
                }
            } else if (type == "ping") {
                ch.send({{"type", "pong"}, {"t0", msg->value("t0", 0.0)}, {"seq", msg->value("seq", size_t{0})}});
            } else if (type == "play") {
                if (!session) {
                    ch.send(error_reply("play before setup"));
                    continue;
                }
                ch.send({{"type", "playing"}});
                try {
                    const SendReport r =
                        send_stream(session->packets, session->config.transport, session->dest,
                                    session->config.pacing, local);
                    ch.send({{"type", "done"}, {"packets", r.packets}, {"bytes", r.bytes}, {"seconds", r.seconds}});
                } catch (const std::exception& e) {
                    ch.send(error_reply(std::string("streaming failed: ") + e.what()));
                }
            } else if (type == "teardown") {
                session.reset();
                ch.send({{"type", "bye"}});
                ++completed_;
                break;
            } else {
                ch.send(error_reply("unknown message type '" + type + "'"));
            }
        }
    } catch (const std::exception&) {
        // Peer went away or sent garbage; the session ends either way.
    }
    {
        std::lock_guard lock(mu_);
        std::erase(open_fds_, fd);
    }
    --active_;
}

TestArtifacts run_client(const SessionConfig& config, const std::filesystem::path& database_dir,
                         const std::filesystem::path& out_dir) {
    config.validate();
    RawVideo reference = read_y4m_file(video_path(database_dir, config.video_id));
    reference.fps_num = config.fps_num;
    reference.fps_den = config.fps_den;
    std::filesystem::create_directories(out_dir);

    StreamReceiver receiver(config.transport, config.rtp_port, config.multicast_group,
                            config.transport == Transport::udp_multicast ? "127.0.0.1" : "0.0.0.0");

    net::ControlChannel ch(net::tcp_connect(config.control, config.control_timeout));
    ch.send({{"type", "hello"}, {"version", kProtocolVersion}});
    if (ch.expect(config.control_timeout).value("type", "") != "hello")
        throw NetError("control: server did not answer hello");

    json setup = to_json(config);
    setup["type"] = "setup";
    setup["rtp_port"] = receiver.port();
    ch.send(setup);
    const json reply = ch.expect(config.control_timeout);
    if (reply.value("type", "") != "ok") throw NetError("setup refused: " + reply.value("message", reply.dump()));

    StreamParams params;
    params.width = reply.at("width").get<uint16_t>();
    params.height = reply.at("height").get<uint16_t>();
    params.fps_num = reply.at("fps_num").get<uint16_t>();
    params.fps_den = reply.at("fps_den").get<uint16_t>();
    params.gop_size = reply.at("gop_size").get<uint16_t>();
    params.quant_shift = reply.at("quant_shift").get<uint8_t>();
    const size_t frame_count = reply.at("frame_count").get<size_t>();

    const std::vector<double> rtts = measure_rtt(ch, config.rtt_probes, config.control_timeout);

    CaptureSink sink;
    std::vector<ReceivedPacket> received;
    std::exception_ptr receive_error;
    std::thread rx_thread([&] {
        try {
            received = receiver.run(config.idle_timeout, &sink);
        } catch (...) {
            receive_error = std::current_exception();
        }
    });

    const double started = net::wall_time();
    json done;
    try {
        ch.send({{"type", "play"}});
        if (ch.expect(config.control_timeout).value("type", "") != "playing")
            throw NetError("control: server did not start playing");
        const double media_seconds = static_cast<double>(frame_count) * params.fps_den / params.fps_num;
        const auto stream_budget = std::chrono::milliseconds(static_cast<int64_t>(media_seconds * config.pacing * 2000));
        done = ch.expect(config.control_timeout + stream_budget);
        if (done.value("type", "") != "done") throw NetError("streaming failed: " + done.value("message", done.dump()));
        // Everything is on the wire; wait only for stragglers still in flight.
        receiver.shorten_idle(std::min(config.idle_timeout, std::chrono::milliseconds(250)));
    } catch (...) {
        receiver.stop();
        rx_thread.join();
        throw;
    }
    rx_thread.join();
    if (receive_error) std::rethrow_exception(receive_error);
    const double finished = net::wall_time();

    ch.send({{"type", "teardown"}});
    if (auto bye = ch.receive(config.control_timeout); !bye || bye->value("type", "") != "bye")
        throw NetError("control: teardown not acknowledged");

    if (received.empty()) throw NetError("no RTP packets received within the idle timeout");

    std::vector<RtpPacket> packets;
    packets.reserve(received.size());
    size_t rx_bytes = 0;
    for (const ReceivedPacket& r : received) {
        rx_bytes += r.packet.wire_size();
        packets.push_back(r.packet);
    }
    const DepacketizeResult depacketized = depacketize(packets, params);
    auto [rx_raw, report] = decode(depacketized.stream, frame_count);

    TestArtifacts a;
    a.trace_path = out_dir / kTraceFile;
    a.rx_encoded_path = out_dir / kRxEncodedFile;
    a.rx_raw_path = out_dir / kRxRawFile;
    a.ref_raw_path = out_dir / kRefRawFile;
    a.report_path = out_dir / kDecodeReportFile;
    a.session_path = out_dir / kSessionFile;

    write_pcap(sink.snapshot(), a.trace_path);
    write_vtes_file(a.rx_encoded_path, depacketized.stream);
    write_y4m_file(a.rx_raw_path, rx_raw);
    write_y4m_file(a.ref_raw_path, reference);

    a.decode_report = std::move(report);
    const double media_seconds = static_cast<double>(frame_count) * params.fps_den / params.fps_num;
    a.session_meta = {{"config", to_json(config)},
                      {"capture_port", receiver.port()},
                      {"frame_count", frame_count},
                      {"stream", {{"width", params.width},
                                  {"height", params.height},
                                  {"fps_num", params.fps_num},
                                  {"fps_den", params.fps_den},
                                  {"gop_size", params.gop_size},
                                  {"quant_shift", params.quant_shift}}},
                      {"codec", "vtes-rle"},
                      {"server", done},
                      {"bitrate_kbps", reply.at("bytes").get<double>() * 8.0 / media_seconds / 1000.0},
                      {"rtt_samples", rtts},
                      {"packets_received", received.size()},
                      {"bytes_received", rx_bytes},
                      {"malformed_datagrams", receiver.malformed()},
                      {"started", started},
                      {"finished", finished}};
    if (config.transport == Transport::tcp)
        a.session_meta["trace_note"] = "TCP session: each unframed RTP packet is recorded as a synthesized UDP datagram";
    write_file(a.report_path, [&] {
        const std::string s = to_json(a.decode_report).dump(2) + "\n";
        return std::vector<uint8_t>(s.begin(), s.end());
    }());
    write_file(a.session_path, [&] {
        const std::string s = a.session_meta.dump(2) + "\n";
        return std::vector<uint8_t>(s.begin(), s.end());
    }());
    return a;
}

}  // namespace vtester
