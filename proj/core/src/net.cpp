#include "iotecs/net.hpp"

#include "iotecs/timing.hpp"

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <system_error>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace iotecs {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::system_error(errno, std::generic_category(), what);
}

bool poll_fd(int fd, short events, int timeout_ms) {
    pollfd p{fd, events, 0};
    int rc;
    do {
        rc = ::poll(&p, 1, timeout_ms);
    } while (rc < 0 && errno == EINTR);
    return rc > 0 && (p.revents & (events | POLLERR | POLLHUP));
}

} // namespace

sockaddr_in make_sockaddr(const std::string& ip, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1)
        throw std::invalid_argument("invalid IPv4 address: " + ip);
    return addr;
}

std::string sockaddr_ip(const sockaddr_in& addr) {
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf));
    return buf;
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Socket Socket::udp() {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw_errno("socket(udp)");
    return Socket(fd);
}

Socket Socket::tcp() {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket(tcp)");
    return Socket(fd);
}

void Socket::set_reuseaddr() {
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
}

void Socket::set_nonblocking(bool on) {
    int flags = ::fcntl(fd_, F_GETFL, 0);
    if (flags < 0) throw_errno("fcntl(F_GETFL)");
    if (on) flags |= O_NONBLOCK;
    else flags &= ~O_NONBLOCK;
    if (::fcntl(fd_, F_SETFL, flags) < 0) throw_errno("fcntl(F_SETFL)");
}

void Socket::set_rcvbuf(int bytes) {
    if (::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes)) < 0)
        throw_errno("setsockopt(SO_RCVBUF)");
}

int Socket::rcvbuf() const {
    int bytes = 0;
    socklen_t len = sizeof(bytes);
    ::getsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bytes, &len);
    return bytes;
}

void Socket::set_nodelay() {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void Socket::bind_to(const std::string& ip, uint16_t port) {
    sockaddr_in addr = make_sockaddr(ip, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
        throw_errno("bind " + ip + ":" + std::to_string(port));
}

void Socket::listen_on(int backlog) {
    if (::listen(fd_, backlog) < 0) throw_errno("listen");
}

uint16_t Socket::local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
        throw_errno("getsockname");
    return ntohs(addr.sin_port);
}

bool Socket::connect_to(const std::string& ip, uint16_t port, int timeout_ms, std::string* error) {
    sockaddr_in addr = make_sockaddr(ip, port);
    set_nonblocking(true);
    int rc = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (rc < 0 && errno != EINPROGRESS) {
        if (error) *error = std::strerror(errno);
        return false;
    }
    if (rc < 0) {
        if (!poll_fd(fd_, POLLOUT, timeout_ms)) {
            if (error) *error = "connect timeout";
            return false;
        }
        int soerr = 0;
        socklen_t len = sizeof(soerr);
        ::getsockopt(fd_, SOL_SOCKET, SO_ERROR, &soerr, &len);
        if (soerr != 0) {
            if (error) *error = std::strerror(soerr);
            return false;
        }
    }
    set_nonblocking(false);
    return true;
}

std::optional<Socket> Socket::accept_timeout(int timeout_ms, sockaddr_in* peer) {
    if (!poll_fd(fd_, POLLIN, timeout_ms)) return std::nullopt;
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    int fd = ::accept(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    if (fd < 0) return std::nullopt;
    if (peer) *peer = addr;
    return Socket(fd);
}

bool Socket::poll_readable(int timeout_ms) const { return poll_fd(fd_, POLLIN, timeout_ms); }
bool Socket::poll_writable(int timeout_ms) const { return poll_fd(fd_, POLLOUT, timeout_ms); }

ssize_t Socket::send_some(const uint8_t* data, size_t len) {
    ssize_t rc;
    do {
        rc = ::send(fd_, data, len, MSG_NOSIGNAL);
    } while (rc < 0 && errno == EINTR);
    return rc;
}

ssize_t Socket::recv_some(uint8_t* data, size_t len) {
    ssize_t rc;
    do {
        rc = ::recv(fd_, data, len, 0);
    } while (rc < 0 && errno == EINTR);
    return rc;
}

ssize_t Socket::send_to(const uint8_t* data, size_t len, const sockaddr_in& addr) {
    ssize_t rc;
    do {
        rc = ::sendto(fd_, data, len, MSG_NOSIGNAL, reinterpret_cast<const sockaddr*>(&addr),
                      sizeof(addr));
    } while (rc < 0 && errno == EINTR);
    return rc;
}

ssize_t Socket::recv_from(uint8_t* data, size_t len, sockaddr_in& addr) {
    socklen_t alen = sizeof(addr);
    ssize_t rc;
    do {
        rc = ::recvfrom(fd_, data, len, 0, reinterpret_cast<sockaddr*>(&addr), &alen);
    } while (rc < 0 && errno == EINTR);
    return rc;
}

bool Socket::send_all_deadline(const uint8_t* data, size_t len, int64_t deadline_mono_ns,
                               std::string* error) {
    size_t sent = 0;
    while (sent < len) {
        ssize_t rc = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
        if (rc > 0) {
            sent += static_cast<size_t>(rc);
            continue;
        }
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            int64_t remaining_ms = (deadline_mono_ns - mono_now_ns()) / 1000000;
            if (remaining_ms <= 0) {
                if (error) *error = "send budget exhausted";
                return false;
            }
            if (!poll_fd(fd_, POLLOUT, static_cast<int>(remaining_ms))) {
                if (error) *error = "send budget exhausted";
                return false;
            }
            continue;
        }
        if (error) *error = std::strerror(errno);
        return false;
    }
    return true;
}

std::optional<std::string> LineReader::read_line(int timeout_ms) {
    int64_t deadline = mono_now_ns() + static_cast<int64_t>(timeout_ms) * 1000000;
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        int64_t remaining_ms = (deadline - mono_now_ns()) / 1000000;
        if (remaining_ms < 0) return std::nullopt;
        if (!poll_fd(fd_, POLLIN, static_cast<int>(remaining_ms))) return std::nullopt;
        char chunk[4096];
        ssize_t rc = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (rc <= 0) {
            if (rc < 0 && (errno == EINTR || errno == EAGAIN)) continue;
            if (rc == 0) eof_ = true;
            return std::nullopt;
        }
        buffer_.append(chunk, static_cast<size_t>(rc));
    }
}

bool send_line(Socket& sock, const std::string& line, int timeout_ms) {
    std::string framed = line;
    framed.push_back('\n');
    int64_t deadline = mono_now_ns() + static_cast<int64_t>(timeout_ms) * 1000000;
    return sock.send_all_deadline(reinterpret_cast<const uint8_t*>(framed.data()), framed.size(),
                                  deadline);
}

} // namespace iotecs
