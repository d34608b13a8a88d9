// Shared scaffolding for socket-level tests: a controllable UDP sink and
// small topology builders.
#pragma once

#include "iotecs/net.hpp"
#include "iotecs/timing.hpp"
#include "iotecs/topology.hpp"
#include "iotecs/wire.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

namespace iotecs::testing {

// Collects every valid packet it receives; echo behavior is configurable:
// echo_copies = 0 (pure sink), 1 (echo), 2 (duplicate every echo)...
// max_echoes caps the total echoes sent (fault injection).
class UdpSink {
public:
    struct Seen {
        PacketHeader header;
        std::vector<uint8_t> packet;
    };

    explicit UdpSink(int echo_copies = 0, uint64_t max_echoes = UINT64_MAX)
        : echo_copies_(echo_copies), max_echoes_(max_echoes), sock_(Socket::udp()) {
        sock_.bind_to("127.0.0.1", 0);
        port_ = sock_.local_port();
        thread_ = std::thread([this] { loop(); });
    }

    ~UdpSink() { stop(); }

    void stop() {
        bool expected = false;
        if (stop_.compare_exchange_strong(expected, true) && thread_.joinable()) thread_.join();
    }

    uint16_t port() const { return port_; }

    std::vector<Seen> seen() {
        std::lock_guard<std::mutex> lock(mu_);
        return seen_;
    }
    uint64_t received() const { return received_.load(); }
    uint64_t echoes_sent() const { return echoes_sent_.load(); }

private:
    void loop() {
        std::vector<uint8_t> buf(kMaxUdpPacket);
        while (!stop_.load()) {
            if (!sock_.poll_readable(20)) continue;
            sockaddr_in from{};
            ssize_t n = sock_.recv_from(buf.data(), buf.size(), from);
            if (n <= 0) continue;
            PacketHeader hdr;
            if (decode_header(buf.data(), static_cast<size_t>(n), hdr) != DecodeError::Ok)
                continue;
            received_.fetch_add(1);
            {
                std::lock_guard<std::mutex> lock(mu_);
                seen_.push_back({hdr, std::vector<uint8_t>(buf.begin(), buf.begin() + n)});
            }
            for (int c = 0; c < echo_copies_; c++) {
                if (echoes_sent_.load() >= max_echoes_) break;
                if (sock_.send_to(buf.data(), static_cast<size_t>(n), from) == n)
                    echoes_sent_.fetch_add(1);
            }
        }
    }

    int echo_copies_;
    uint64_t max_echoes_;
    Socket sock_;
    uint16_t port_ = 0;
    std::thread thread_;
    std::atomic<bool> stop_{false};
    std::atomic<uint64_t> received_{0};
    std::atomic<uint64_t> echoes_sent_{0};
    std::mutex mu_;
    std::vector<Seen> seen_;
};

// Single-node/single-cloud topology with one edge spec instantiated once.
// Devices are given by their periods; payloads default to 8 bytes.
inline ResolvedTopology make_topology(uint16_t cloud_port, int64_t step_ns, int64_t step_count,
                                      const std::vector<int64_t>& periods, Speed speed,
                                      Protocol protocol = Protocol::Udp,
                                      int64_t workload_ns = 0) {
    ResolvedTopology topo;
    topo.step_ns = step_ns;
    topo.duration_ns = step_ns * step_count;
    topo.step_count = step_count;
    CloudSpec cloud;
    cloud.name = "C";
    cloud.ip = "127.0.0.1";
    cloud.port = cloud_port;
    topo.clouds.push_back(cloud);

    NodeInstance node;
    node.node_id = 0;
    node.spec_name = "SN";
    node.platform.name = "P";
    node.platform.kind = PlatformKind::Native;

    EdgeInstance edge;
    edge.edge_id = 0;
    edge.spec_name = "E";
    edge.protocol = protocol;
    edge.speed = speed;
    edge.workload_ns = workload_ns;
    edge.cloud_index = 0;
    for (size_t i = 0; i < periods.size(); i++) {
        DeviceInstance dev;
        dev.device_id = static_cast<uint16_t>(i);
        dev.spec_name = "D" + std::to_string(i);
        dev.period_steps = periods[i];
        dev.payload.size_bytes = 8;
        edge.devices.push_back(std::move(dev));
    }
    node.edges.push_back(std::move(edge));
    topo.nodes.push_back(std::move(node));
    return topo;
}

} // namespace iotecs::testing
