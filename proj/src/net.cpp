#include "vtester/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "vtester/error.hpp"

namespace vtester::net {

namespace {

[[noreturn]] void fail(const std::string& what) { throw NetError(what + ": " + std::strerror(errno)); }

sockaddr_in resolve(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0" || host == "*") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) throw NetError("cannot resolve host " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

}  // namespace

void Socket::reset(int fd) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

void Socket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Endpoint Endpoint::parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw ConfigError("endpoint '" + text + "' is not host:port");
    Endpoint e;
    e.host = text.substr(0, colon);
    try {
        const int port = std::stoi(text.substr(colon + 1));
        if (port < 0 || port > 65535) throw std::out_of_range("port");
        e.port = static_cast<uint16_t>(port);
    } catch (const std::exception&) {
        throw ConfigError("endpoint '" + text + "' has an invalid port");
    }
    return e;
}

Socket udp_socket() {
    Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) fail("socket(udp)");
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    return s;
}

uint16_t bind_socket(Socket& s, const std::string& host, uint16_t port) {
    const sockaddr_in addr = resolve(host, port);
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
        fail("bind " + host + ":" + std::to_string(port));
    return local_port(s);
}

Socket tcp_listen(const std::string& host, uint16_t port, uint16_t& bound_port) {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) fail("socket(tcp)");
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    bound_port = bind_socket(s, host, port);
    if (::listen(s.fd(), 64) != 0) fail("listen");
    return s;
}

Socket tcp_connect(const Endpoint& to, std::chrono::milliseconds timeout) {
    const sockaddr_in addr = resolve(to.host, to.port);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!s.valid()) fail("socket(tcp)");
        if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
            const int one = 1;
            ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return s;
        }
        // The listener may not be up yet; retry until the deadline.
        if (errno != ECONNREFUSED || std::chrono::steady_clock::now() >= deadline) fail("connect " + to.str());
        ::usleep(10'000);
    }
}

uint16_t local_port(const Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
    return ntohs(addr.sin_port);
}

std::string peer_host(const Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getpeername(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getpeername");
    char buf[INET_ADDRSTRLEN];
    ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
    return buf;
}

void grow_buffers(Socket& s, int bytes) {
    // SO_RCVBUFFORCE needs CAP_NET_ADMIN; fall back to the capped variant.
    if (::setsockopt(s.fd(), SOL_SOCKET, SO_RCVBUFFORCE, &bytes, sizeof bytes) != 0)
        ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVBUF, &bytes, sizeof bytes);
    if (::setsockopt(s.fd(), SOL_SOCKET, SO_SNDBUFFORCE, &bytes, sizeof bytes) != 0)
        ::setsockopt(s.fd(), SOL_SOCKET, SO_SNDBUF, &bytes, sizeof bytes);
}

void send_all(const Socket& s, std::span<const uint8_t> bytes) {
    size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(s.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("send");
        }
        sent += static_cast<size_t>(n);
    }
}

bool wait_readable(const Socket& s, std::chrono::milliseconds timeout) {
    pollfd pfd{s.fd(), POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) fail("poll");
        return rc > 0;
    }
}

double wall_time() {
    using namespace std::chrono;
    static const auto steady0 = steady_clock::now();
    static const double wall0 = duration<double>(system_clock::now().time_since_epoch()).count();
    return wall0 + duration<double>(steady_clock::now() - steady0).count();
}

void ControlChannel::send(const nlohmann::json& msg) {
    const std::string line = msg.dump() + "\n";
    send_all(sock_, std::span(reinterpret_cast<const uint8_t*>(line.data()), line.size()));
}

std::optional<nlohmann::json> ControlChannel::receive(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            const std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            try {
                return nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw NetError(std::string("control: malformed message: ") + e.what());
            }
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0 || !wait_readable(sock_, left)) return std::nullopt;
        char buf[4096];
        const ssize_t n = ::recv(sock_.fd(), buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) fail("control recv");
        if (n == 0) throw NetError("control: connection closed by peer");
        buffer_.append(buf, static_cast<size_t>(n));
    }
}

nlohmann::json ControlChannel::expect(std::chrono::milliseconds timeout) {
    auto msg = receive(timeout);
    if (!msg) throw NetError("control: timed out waiting for a message");
    return *msg;
}

}  // namespace vtester::net
