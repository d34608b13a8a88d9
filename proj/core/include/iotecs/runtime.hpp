// Execution of one simulation node: every edge device runs its
// send/receive/compute triple concurrently with wall-clock step alignment,
// pacing and step-budget enforcement, and reports a ledger entry.
#pragma once

#include "iotecs/net.hpp"
#include "iotecs/timing.hpp"
#include "iotecs/topology.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotecs {

struct EdgeLedgerEntry {
    uint16_t edge_id = 0;
    uint64_t attempted_sends = 0;  // every scheduled send, sent or not
    uint64_t actual_sends = 0;
    uint64_t responses_received = 0; // deduplicated by seq
    uint64_t duplicates = 0;
    uint64_t send_errors = 0;
    uint32_t step_budget_breaks = 0; // steps whose send loop was cut short
    uint32_t late_wakes = 0;         // step starts delayed by > 1 ms
    bool transport_failed = false;
    std::string failure;
    uint64_t rtt_count = 0;
    int64_t rtt_sum_ns = 0;
    std::vector<int64_t> rtt_samples_ns; // capped; count/sum stay exact
};

struct NodeLedger {
    uint16_t node_id = 0;
    int64_t epoch_wall_ns = 0;
    std::vector<EdgeLedgerEntry> edges;
};

nlohmann::json ledger_to_json(const NodeLedger& ledger);
NodeLedger ledger_from_json(const nlohmann::json& j); // throws on malformed input

struct NodeRunConfig {
    int64_t start_wall_ns = 0; // CLOCK_REALTIME instant of step 0, shared by all nodes
    int64_t drain_ns = 0;      // receive grace after the simulation duration
    uint64_t seed = 0;
    std::vector<int64_t> cloud_offsets_ns; // by cloud index: cloud_wall - local_wall
    size_t rtt_sample_cap = 10000;
    int connect_timeout_ms = 2000;
};

struct EdgeTransport {
    Protocol protocol = Protocol::Udp;
    Socket sock;
    bool connected = false;
    std::string error;
};

// UDP: bound+connected datagram socket. TCP: established connection
// (connected=false with the failure recorded when the cloud is unreachable).
EdgeTransport open_edge_transport(const EdgeInstance& edge, const CloudSpec& cloud,
                                  int connect_timeout_ms);

struct EdgeRunContext {
    uint16_t node_id = 0;
    int64_t step_ns = 0;
    int64_t step_count = 0;
    int64_t epoch_mono_ns = 0; // CLOCK_MONOTONIC instant of step 0
    int64_t stop_mono_ns = 0;  // end of the receive drain window
    const AlignedClock* clock = nullptr; // aligned to this edge's cloud
    uint64_t seed = 0;
    size_t rtt_sample_cap = 10000;
    uint64_t expected_sends = 0; // sized for the seq-dedup table
};

// Runs the three concurrent activities of one edge device and blocks until
// the drain window closes. Never throws on transport trouble; failures land
// in the ledger entry.
EdgeLedgerEntry run_edge_device(const EdgeInstance& edge, EdgeTransport& transport,
                                const EdgeRunContext& ctx);

// Opens every edge transport, runs all edges concurrently, and merges their
// ledger entries. Safe to call for several nodes in one process.
NodeLedger run_simulation_node(const NodeInstance& node, const ResolvedTopology& topo,
                               const NodeRunConfig& config);

} // namespace iotecs
