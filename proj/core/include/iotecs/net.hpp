// Thin RAII layer over BSD sockets (IPv4 only). Setup failures throw
// std::system_error; per-packet I/O reports through return values so the
// runtime can count instead of crash.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <netinet/in.h>

namespace iotecs {

sockaddr_in make_sockaddr(const std::string& ip, uint16_t port);
std::string sockaddr_ip(const sockaddr_in& addr);

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept;
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    static Socket udp();
    static Socket tcp();

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close();

    void set_reuseaddr();
    void set_nonblocking(bool on);
    void set_rcvbuf(int bytes);
    int rcvbuf() const;
    void set_nodelay();

    void bind_to(const std::string& ip, uint16_t port); // throws on failure
    void listen_on(int backlog = 128);                  // throws on failure
    uint16_t local_port() const;

    // Blocking connect with a timeout; returns false on refusal/timeout.
    bool connect_to(const std::string& ip, uint16_t port, int timeout_ms, std::string* error = nullptr);

    // -1 on timeout, accepted fd otherwise. peer may be null.
    std::optional<Socket> accept_timeout(int timeout_ms, sockaddr_in* peer = nullptr);

    bool poll_readable(int timeout_ms) const;
    bool poll_writable(int timeout_ms) const;

    // These return byte counts, 0 on orderly shutdown (recv), -1 on error
    // with errno left for inspection.
    ssize_t send_some(const uint8_t* data, size_t len);
    ssize_t recv_some(uint8_t* data, size_t len);
    ssize_t send_to(const uint8_t* data, size_t len, const sockaddr_in& addr);
    ssize_t recv_from(uint8_t* data, size_t len, sockaddr_in& addr);

    // Writes the whole buffer on a nonblocking socket, polling for
    // writability until the CLOCK_MONOTONIC deadline. False on timeout or
    // connection failure.
    bool send_all_deadline(const uint8_t* data, size_t len, int64_t deadline_mono_ns,
                           std::string* error = nullptr);

private:
    int fd_ = -1;
};

// Buffered line reader for the newline-delimited control protocol.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    // Reads one '\n'-terminated line (newline stripped). nullopt on EOF,
    // timeout or error; eof() distinguishes the cases.
    std::optional<std::string> read_line(int timeout_ms);

    bool eof() const { return eof_; }

private:
    int fd_;
    bool eof_ = false;
    std::string buffer_;
};

bool send_line(Socket& sock, const std::string& line, int timeout_ms = 2000);

} // namespace iotecs
