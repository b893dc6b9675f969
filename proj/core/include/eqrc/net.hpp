#pragma once

// Minimal blocking TCP transport with length-prefixed frames: a 4-byte
// big-endian payload length followed by the payload.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace eqrc::net {

inline constexpr std::size_t kMaxFrameBytes = 1U << 20;

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    // "host:port"
    static Endpoint parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    void close() noexcept;

private:
    int fd_ = -1;
};

class Listener {
public:
    // Port 0 binds an ephemeral port; see port().
    explicit Listener(std::uint16_t port, const std::string& host = "127.0.0.1");

    std::uint16_t port() const noexcept { return port_; }
    Socket accept();

private:
    Socket sock_;
    std::uint16_t port_ = 0;
};

// Retries refused connections until `timeout` elapses.
Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::seconds(10));

// Frame reader/writer over one socket. Writes are buffered until flush() or
// until the buffer passes a threshold.
class FrameConnection {
public:
    explicit FrameConnection(Socket sock) : sock_(std::move(sock)) {}

    void send(std::string_view payload);
    void flush();

    // Blocks for the next frame; std::nullopt on orderly EOF. `before_block`
    // runs whenever no complete frame is buffered and the call is about to wait.
    std::optional<std::string> recv(const std::function<void()>& before_block = {});

    // Reads whatever is available without waiting (call after poll() reports
    // the fd readable). Returns false on EOF.
    bool read_available();
    std::optional<std::string> pop_frame();

    int fd() const noexcept { return sock_.fd(); }
    void close() noexcept { sock_.close(); }

private:
    bool fill();

    Socket sock_;
    std::string in_;
    std::size_t in_pos_ = 0;
    std::string out_;
};

}  // namespace eqrc::net
