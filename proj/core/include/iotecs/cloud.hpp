// Baseline cloud applications: UDP/TCP echo servers that busy-compute for a
// configurable duration per packet, count received/processed/answered
// packets, and expose a line-oriented JSON control channel (RESET, SNAPSHOT,
// STOP) for epoch alignment and stats collection.
#pragma once

#include "iotecs/ast.hpp"
#include "iotecs/net.hpp"
#include "iotecs/timing.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace iotecs {

struct CloudConfig {
    Protocol protocol = Protocol::Udp;
    std::string bind_ip = "0.0.0.0";
    uint16_t port = 0;         // 0 picks an ephemeral port
    uint16_t control_port = 0; // must differ from port; 0 picks ephemeral
    int64_t compute_ns = 0;    // busy-compute per packet
    int workers = 1;           // processing is serialized per worker
    int udp_rcvbuf = 0;        // 0 keeps the OS default
    size_t queue_capacity = 4096; // TCP work queue bound
    size_t max_trans_samples = 1 << 20;
};

struct CloudStatsSnapshot {
    uint64_t packets_received = 0;
    uint64_t packets_processed = 0;
    uint64_t responses_sent = 0;
    uint64_t malformed = 0;
    std::map<std::string, uint64_t> per_source; // "node/edge" -> count
    // One-way transit aggregates (receive stamp minus header send stamp,
    // aligned clock domain). Negative samples are discarded and counted.
    uint64_t trans_count = 0;
    uint64_t trans_negative = 0;
    int64_t trans_mean_ns = 0;
    int64_t trans_p50_ns = 0;
    int64_t trans_p95_ns = 0;
    int64_t trans_p99_ns = 0;
    int64_t epoch_ns = 0; // server clock at snapshot time
    // Config echo, reported into RunReport.
    int64_t compute_ns = 0;
    int workers = 0;
    int udp_rcvbuf = 0;
    std::string protocol;
};

nlohmann::json snapshot_to_json(const CloudStatsSnapshot& s);
CloudStatsSnapshot snapshot_from_json(const nlohmann::json& j);

class CloudServer {
public:
    explicit CloudServer(CloudConfig config);
    ~CloudServer();

    CloudServer(const CloudServer&) = delete;
    CloudServer& operator=(const CloudServer&) = delete;

    // Binds data and control ports and launches the serving threads.
    // Throws std::system_error when a port cannot be bound.
    void start();
    void stop();
    void wait(); // blocks until STOP (or stop())
    bool stopping() const { return stop_.load(); }

    uint16_t data_port() const { return data_port_; }
    uint16_t control_port() const { return control_port_; }

    CloudStatsSnapshot snapshot();
    int64_t reset(); // zeroes stats, returns server clock ns

private:
    struct TcpConn {
        Socket sock;
        std::mutex write_mu;
        std::atomic<bool> dead{false};
    };
    struct WorkItem {
        std::shared_ptr<TcpConn> conn;
        std::vector<uint8_t> packet;
    };

    void process_packet(const uint8_t* data, size_t len, const sockaddr_in* udp_peer,
                        Socket* udp_sock, TcpConn* tcp_conn);
    bool account_received(const uint8_t* data, size_t len);
    void udp_worker();
    void tcp_accept_loop();
    void tcp_reader(std::shared_ptr<TcpConn> conn);
    void tcp_worker();
    void control_loop();
    void handle_control_conn(Socket conn);
    nlohmann::json handle_command(const std::string& cmd);

    CloudConfig config_;
    AlignedClock clock_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> started_{false};
    uint16_t data_port_ = 0;
    uint16_t control_port_ = 0;

    Socket udp_sock_;
    Socket tcp_listener_;
    Socket control_listener_;

    std::vector<std::thread> threads_;
    std::vector<std::thread> conn_threads_;
    std::mutex conn_threads_mu_;

    // TCP work queue (bounded; readers block when full so backpressure
    // reaches the sender).
    std::deque<WorkItem> queue_;
    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::condition_variable queue_space_cv_;

    std::atomic<uint64_t> packets_received_{0};
    std::atomic<uint64_t> packets_processed_{0};
    std::atomic<uint64_t> responses_sent_{0};
    std::atomic<uint64_t> malformed_{0};
    std::atomic<uint64_t> trans_negative_{0};

    std::mutex stats_mu_;
    std::map<std::pair<uint16_t, uint16_t>, uint64_t> per_source_;
    std::vector<int64_t> trans_samples_;

    std::mutex stopped_mu_;
    std::condition_variable stopped_cv_;
};

} // namespace iotecs
