#include "iotecs/runtime.hpp"

#include "iotecs/cloud.hpp"
#include "iotecs/payload.hpp"
#include "iotecs/units.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace iotecs;
using iotecs::testing::UdpSink;
using iotecs::testing::make_topology;

namespace {

// Runs the only edge of a single-edge topology and returns its ledger entry.
EdgeLedgerEntry run_single_edge(const ResolvedTopology& topo, int64_t drain_ns,
                                uint64_t seed = 0) {
    NodeRunConfig cfg;
    cfg.start_wall_ns = wall_now_ns() + 100 * kNsPerMs;
    cfg.drain_ns = drain_ns;
    cfg.seed = seed;
    NodeLedger ledger = run_simulation_node(topo.nodes[0], topo, cfg);
    REQUIRE(ledger.edges.size() == 1);
    return ledger.edges[0];
}

} // namespace

TEST_CASE("literal payloads are exact, sized payloads deterministic") {
    DeviceInstance dev;
    dev.device_id = 3;
    dev.payload.is_literal = true;
    dev.payload.literal = {0x32, 0x33, 0x43}; // "23C"
    auto rng = device_rng(1, 0, 0, 3);
    CHECK(make_payload(dev, rng) == std::vector<uint8_t>{0x32, 0x33, 0x43});

    DeviceInstance sized;
    sized.device_id = 4;
    sized.payload.size_bytes = 8;
    auto r1 = device_rng(42, 1, 2, 4);
    auto r2 = device_rng(42, 1, 2, 4);
    auto b1 = make_payload(sized, r1);
    auto b2 = make_payload(sized, r2);
    CHECK(b1.size() == 8);
    CHECK(b1 == b2); // identical across runs with the same seed

    auto r3 = device_rng(43, 1, 2, 4);
    auto b3 = make_payload(sized, r3);
    CHECK(b1 != b3); // different seed, different bytes (overwhelmingly)

    auto r4 = device_rng(42, 1, 2, 5);
    CHECK(make_payload(sized, r4) != b1); // different device id
}

TEST_CASE("node ledger json round-trips") {
    NodeLedger ledger;
    ledger.node_id = 7;
    ledger.epoch_wall_ns = 123456789;
    EdgeLedgerEntry e;
    e.edge_id = 2;
    e.attempted_sends = 10;
    e.actual_sends = 9;
    e.responses_received = 8;
    e.duplicates = 1;
    e.step_budget_breaks = 1;
    e.transport_failed = true;
    e.failure = "boom";
    e.rtt_count = 8;
    e.rtt_sum_ns = 800;
    e.rtt_samples_ns = {100, 100, 100};
    ledger.edges.push_back(e);

    NodeLedger back = ledger_from_json(ledger_to_json(ledger));
    CHECK(back.node_id == 7);
    REQUIRE(back.edges.size() == 1);
    CHECK(back.edges[0].attempted_sends == 10);
    CHECK(back.edges[0].actual_sends == 9);
    CHECK(back.edges[0].failure == "boom");
    CHECK(back.edges[0].rtt_samples_ns == std::vector<int64_t>{100, 100, 100});
}

TEST_CASE("udp edge against an echo cloud: lossless accounting") {
    CloudConfig cfg;
    cfg.protocol = Protocol::Udp;
    cfg.bind_ip = "127.0.0.1";
    CloudServer cloud(cfg);
    cloud.start();

    // 1 device, period 1, 4 steps of 200 ms, MAX speed.
    auto topo = make_topology(cloud.data_port(), 200 * kNsPerMs, 4, {1}, Speed{0, true});
    auto entry = run_single_edge(topo, 400 * kNsPerMs);

    CHECK(entry.attempted_sends == 4);
    CHECK(entry.actual_sends == 4);
    CHECK(entry.responses_received == 4);
    CHECK(entry.step_budget_breaks == 0);
    CHECK(!entry.transport_failed);
    CHECK(entry.rtt_count == 4);
    CHECK(entry.rtt_sum_ns > 0);

    auto stats = cloud.snapshot();
    CHECK(stats.packets_received == 4);
    CHECK(stats.responses_sent == 4);
    cloud.stop();
}

TEST_CASE("schedule follows the period rule (periods 1,2,3 over 3 steps)") {
    UdpSink sink(0);
    auto topo = make_topology(sink.port(), 150 * kNsPerMs, 3, {1, 2, 3}, Speed{0, true});
    auto entry = run_single_edge(topo, 100 * kNsPerMs);

    CHECK(entry.attempted_sends == 6); // 3 + 2 + 1
    CHECK(entry.actual_sends == 6);

    precise_sleep_ns(100 * kNsPerMs);
    std::set<std::pair<uint32_t, uint16_t>> sends;
    for (const auto& seen : sink.seen()) sends.insert({seen.header.step_index, seen.header.device_id});
    std::set<std::pair<uint32_t, uint16_t>> want = {
        {0, 0}, {0, 1}, {0, 2}, // step 0: all three
        {1, 0},                 // step 1: period-1 device only
        {2, 0}, {2, 1},         // step 2: periods 1 and 2
    };
    CHECK(sends == want);
}

TEST_CASE("pacing inserts step/speed gaps between sends") {
    UdpSink sink(0);
    // step 300 ms, speed 30 -> 10 ms pause; 20 period-1 devices fit easily.
    auto topo = make_topology(sink.port(), 300 * kNsPerMs, 2, std::vector<int64_t>(20, 1),
                              Speed{30, false});
    auto entry = run_single_edge(topo, 100 * kNsPerMs);
    CHECK(entry.actual_sends == 40);

    precise_sleep_ns(100 * kNsPerMs);
    std::map<uint32_t, std::vector<std::pair<uint32_t, uint64_t>>> by_step;
    for (const auto& seen : sink.seen())
        by_step[seen.header.step_index].push_back({seen.header.seq, seen.header.send_timestamp_ns});

    int64_t gap_sum = 0;
    int gaps = 0;
    for (auto& [step, sends] : by_step) {
        std::sort(sends.begin(), sends.end());
        for (size_t i = 1; i < sends.size(); i++) {
            gap_sum += static_cast<int64_t>(sends[i].second - sends[i - 1].second);
            gaps++;
        }
    }
    REQUIRE(gaps > 0);
    double mean_gap = static_cast<double>(gap_sum) / gaps;
    CHECK(mean_gap >= 10.0 * kNsPerMs);
    CHECK(mean_gap <= 12.5 * kNsPerMs);
}

TEST_CASE("step budget break abandons the remainder of the step") {
    UdpSink sink(0);
    // step 100 ms, speed 2 -> pause 50 ms: at most 2-3 sends fit per step;
    // 10 period-1 devices leave a shortfall every step.
    auto topo =
        make_topology(sink.port(), 100 * kNsPerMs, 2, std::vector<int64_t>(10, 1), Speed{2, false});
    auto entry = run_single_edge(topo, 100 * kNsPerMs);

    CHECK(entry.attempted_sends == 20); // conservation: all scheduled sends counted
    CHECK(entry.actual_sends < entry.attempted_sends);
    CHECK(entry.step_budget_breaks == 2); // every step broke
    uint64_t shortfall = entry.attempted_sends - entry.actual_sends;
    CHECK(shortfall > 0);
    CHECK(entry.actual_sends == sink.received());
}

TEST_CASE("responses are deduplicated by seq") {
    UdpSink sink(2); // echoes every packet twice
    auto topo = make_topology(sink.port(), 150 * kNsPerMs, 3, {1}, Speed{0, true});
    auto entry = run_single_edge(topo, 300 * kNsPerMs);

    CHECK(entry.actual_sends == 3);
    CHECK(entry.responses_received == 3); // duplicates not double-counted
    CHECK(entry.duplicates == 3);
}

TEST_CASE("fault-injecting sink: lost echoes reduce responses only") {
    UdpSink sink(1, 4); // echo only the first 4 packets
    auto topo = make_topology(sink.port(), 100 * kNsPerMs, 10, {1}, Speed{0, true});
    auto entry = run_single_edge(topo, 200 * kNsPerMs);

    CHECK(entry.attempted_sends == 10);
    CHECK(entry.actual_sends == 10);
    CHECK(entry.responses_received == 4);
}

TEST_CASE("tcp edge against the tcp cloud") {
    CloudConfig cfg;
    cfg.protocol = Protocol::Tcp;
    cfg.bind_ip = "127.0.0.1";
    CloudServer cloud(cfg);
    cloud.start();

    auto topo = make_topology(cloud.data_port(), 150 * kNsPerMs, 3, {1, 2}, Speed{0, true},
                              Protocol::Tcp);
    auto entry = run_single_edge(topo, 400 * kNsPerMs);

    CHECK(entry.attempted_sends == 5); // 3 + 2
    CHECK(entry.actual_sends == 5);
    CHECK(entry.responses_received == 5);
    CHECK(!entry.transport_failed);
    cloud.stop();
}

TEST_CASE("unreachable tcp cloud: all sends attempted, none actual") {
    uint16_t dead_port;
    {
        Socket probe = Socket::tcp();
        probe.bind_to("127.0.0.1", 0);
        dead_port = probe.local_port();
    } // closed again: nothing listens here

    auto topo = make_topology(dead_port, 100 * kNsPerMs, 4, {1}, Speed{0, true}, Protocol::Tcp);
    auto entry = run_single_edge(topo, 50 * kNsPerMs);

    CHECK(entry.transport_failed);
    CHECK(!entry.failure.empty());
    CHECK(entry.attempted_sends == 4);
    CHECK(entry.actual_sends == 0);
    CHECK(entry.responses_received == 0);
}

TEST_CASE("mqtt transport is refused at run time") {
    auto topo = make_topology(9, 100 * kNsPerMs, 1, {1}, Speed{0, true}, Protocol::Mqtt);
    EdgeTransport t = open_edge_transport(topo.nodes[0].edges[0], topo.clouds[0], 100);
    CHECK(!t.connected);
    CHECK(t.error.find("MQTT") != std::string::npos);
}

TEST_CASE("edge compute activity busy-spins per step") {
    UdpSink sink(0);
    auto topo = make_topology(sink.port(), 100 * kNsPerMs, 3, {1}, Speed{0, true}, Protocol::Udp,
                              20 * kNsPerMs);
    int64_t t0 = mono_now_ns();
    auto entry = run_single_edge(topo, 50 * kNsPerMs);
    int64_t elapsed = mono_now_ns() - t0;
    CHECK(entry.actual_sends == 3);
    // 3 steps x 100 ms plus drain; the workload must not stretch the wall
    // time materially beyond the schedule.
    CHECK(elapsed >= 300 * kNsPerMs);
}

TEST_CASE("a node runs all its edges concurrently") {
    CloudConfig cfg;
    cfg.protocol = Protocol::Udp;
    cfg.bind_ip = "127.0.0.1";
    CloudServer cloud(cfg);
    cloud.start();

    auto topo = make_topology(cloud.data_port(), 200 * kNsPerMs, 3, {1}, Speed{0, true});
    // Clone the edge into ten instances.
    auto& node = topo.nodes[0];
    EdgeInstance base = node.edges[0];
    for (uint16_t i = 1; i < 10; i++) {
        EdgeInstance e = base;
        e.edge_id = i;
        node.edges.push_back(std::move(e));
    }

    NodeRunConfig run_cfg;
    run_cfg.start_wall_ns = wall_now_ns() + 100 * kNsPerMs;
    run_cfg.drain_ns = 400 * kNsPerMs;
    int64_t t0 = mono_now_ns();
    NodeLedger ledger = run_simulation_node(node, topo, run_cfg);
    int64_t elapsed = mono_now_ns() - t0;

    REQUIRE(ledger.edges.size() == 10);
    for (const auto& e : ledger.edges) {
        CHECK(e.attempted_sends == 3);
        CHECK(e.actual_sends == 3);
        CHECK(e.responses_received == 3);
    }
    // Concurrent, not sequential: 10 edges x 600 ms schedule must finish in
    // roughly one schedule length, far under the sequential 6 s.
    CHECK(elapsed < 3 * kNsPerSec);

    auto stats = cloud.snapshot();
    CHECK(stats.packets_received == 30);
    CHECK(stats.per_source.size() == 10);
    cloud.stop();
}
