#include "eqrc/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include <charconv>

#include "eqrc/error.hpp"

namespace eqrc::net {

namespace {

constexpr std::size_t kFlushThreshold = 64 * 1024;
constexpr std::size_t kReadChunk = 64 * 1024;

[[noreturn]] void fail(const std::string& what) {
    throw NetworkError(what + ": " + std::strerror(errno));
}

// Writes are batched in FrameConnection, so Nagle only adds latency.
void no_delay(int fd) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
        throw NetworkError("cannot resolve host '" + host + "': " + ::gai_strerror(rc));
    }
    sockaddr_in addr{};
    std::memcpy(&addr, res->ai_addr, sizeof addr);
    ::freeaddrinfo(res);
    addr.sin_port = htons(port);
    return addr;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw InvalidArgument("endpoint must be HOST:PORT, got '" + std::string(text) + "'");
    }
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 65535) {
        throw InvalidArgument("invalid port in endpoint '" + std::string(text) + "'");
    }
    return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

Socket::~Socket() { close(); }

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Listener::Listener(std::uint16_t port, const std::string& host) {
    sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!sock_.valid()) fail("socket");
    const int one = 1;
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(host, port);
    if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) fail("bind " + host);
    if (::listen(sock_.fd(), 8) != 0) fail("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
    port_ = ntohs(addr.sin_port);
}

Socket Listener::accept() {
    for (;;) {
        const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd >= 0) {
            no_delay(fd);
            return Socket(fd);
        }
        if (errno != EINTR) fail("accept");
    }
}

Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout) {
    const sockaddr_in addr = resolve(ep.host, ep.port);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!s.valid()) fail("socket");
        if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
            no_delay(s.fd());
            return s;
        }
        if ((errno != ECONNREFUSED && errno != EINTR) || std::chrono::steady_clock::now() >= deadline) {
            fail("connect " + ep.to_string());
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

void FrameConnection::send(std::string_view payload) {
    if (payload.size() > kMaxFrameBytes) throw FormatError("frame exceeds maximum size");
    const auto len = static_cast<std::uint32_t>(payload.size());
    const char prefix[4] = {static_cast<char>(len >> 24), static_cast<char>(len >> 16), static_cast<char>(len >> 8),
                            static_cast<char>(len)};
    out_.append(prefix, 4);
    out_.append(payload);
    if (out_.size() >= kFlushThreshold) flush();
}

void FrameConnection::flush() {
    std::size_t off = 0;
    while (off < out_.size()) {
        const ssize_t n = ::send(sock_.fd(), out_.data() + off, out_.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            out_.clear();
            fail("send");
        }
        off += static_cast<std::size_t>(n);
    }
    out_.clear();
}

bool FrameConnection::fill() {
    if (in_pos_ > 0 && in_pos_ >= in_.size() / 2) {
        in_.erase(0, in_pos_);
        in_pos_ = 0;
    }
    char buf[kReadChunk];
    for (;;) {
        const ssize_t n = ::recv(sock_.fd(), buf, sizeof buf, 0);
        if (n > 0) {
            in_.append(buf, static_cast<std::size_t>(n));
            return true;
        }
        if (n == 0) return false;
        if (errno == EINTR) continue;
        if (errno == ECONNRESET) return false;
        fail("recv");
    }
}

std::optional<std::string> FrameConnection::pop_frame() {
    const std::size_t avail = in_.size() - in_pos_;
    if (avail < 4) return std::nullopt;
    const auto* p = reinterpret_cast<const unsigned char*>(in_.data() + in_pos_);
    const std::uint32_t len = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                              (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    if (len > kMaxFrameBytes) throw FormatError("incoming frame exceeds maximum size");
    if (avail < 4 + std::size_t{len}) return std::nullopt;
    std::string frame = in_.substr(in_pos_ + 4, len);
    in_pos_ += 4 + len;
    return frame;
}

std::optional<std::string> FrameConnection::recv(const std::function<void()>& before_block) {
    for (;;) {
        if (auto f = pop_frame()) return f;
        if (before_block) before_block();
        if (!fill()) {
            if (in_.size() != in_pos_) throw FormatError("connection closed inside a frame");
            return std::nullopt;
        }
    }
}

bool FrameConnection::read_available() { return fill(); }

}  // namespace eqrc::net
