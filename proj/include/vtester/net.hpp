#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vtester::net {

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { reset(); }
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) reset(other.release());
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void reset(int fd = -1);
    /// shutdown(2) both directions; wakes a thread blocked on the socket.
    void shutdown();

private:
    int fd_ = -1;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
    /// "host:port"
    static Endpoint parse(const std::string& text);
    bool operator==(const Endpoint&) const = default;
};

Socket udp_socket();
/// Binds to host:port (port 0 picks one). Returns the bound port.
uint16_t bind_socket(Socket& s, const std::string& host, uint16_t port);
Socket tcp_listen(const std::string& host, uint16_t port, uint16_t& bound_port);
Socket tcp_connect(const Endpoint& to, std::chrono::milliseconds timeout);
uint16_t local_port(const Socket& s);
std::string peer_host(const Socket& s);
/// Enlarges kernel buffers so bursty loopback traffic is not dropped locally.
void grow_buffers(Socket& s, int bytes);

/// Writes all bytes; throws NetError on failure.
void send_all(const Socket& s, std::span<const uint8_t> bytes);

/// Waits for readability; false on timeout.
bool wait_readable(const Socket& s, std::chrono::milliseconds timeout);

/// Wall-clock seconds derived from a steady clock anchored once at startup,
/// so timestamps are monotone within a process.
double wall_time();

/// Newline-delimited JSON over a TCP connection.
class ControlChannel {
public:
    explicit ControlChannel(Socket s) : sock_(std::move(s)) {}

    void send(const nlohmann::json& msg);
    /// Next message, or nullopt on timeout. Throws NetError on EOF or bad JSON.
    std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout);
    /// receive() that treats a timeout as an error.
    nlohmann::json expect(std::chrono::milliseconds timeout);

    Socket& socket() { return sock_; }

private:
    Socket sock_;
    std::string buffer_;
};

}  // namespace vtester::net
