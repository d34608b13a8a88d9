#include "iotecs/orchestrator.hpp"

#include "iotecs/control.hpp"
#include "iotecs/deploy.hpp"
#include "iotecs/report.hpp"
#include "iotecs/units.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace iotecs;
using iotecs::testing::make_topology;

namespace {

CloudStatsSnapshot snap(uint64_t received, uint64_t processed, uint64_t responses) {
    CloudStatsSnapshot s;
    s.packets_received = received;
    s.packets_processed = processed;
    s.responses_sent = responses;
    return s;
}

NodeLedger ledger_with(uint64_t attempted, uint64_t actual, uint64_t responses) {
    NodeLedger ledger;
    EdgeLedgerEntry e;
    e.attempted_sends = attempted;
    e.actual_sends = actual;
    e.responses_received = responses;
    ledger.edges.push_back(e);
    return ledger;
}

std::map<EdgeKey, uint64_t> expect_one(uint64_t n) { return {{EdgeKey{0, 0}, n}}; }

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("iotecs_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("compute_metrics: lossless case yields zero drops") {
    auto m = compute_metrics(expect_one(800), {ledger_with(800, 800, 800)}, {},
                             snap(800, 800, 800));
    CHECK(m.valid);
    CHECK(m.sim_drop == 0);
    CHECK(m.cloud_drop == 0);
    CHECK(m.cloud_drop_in == 0);
    CHECK(m.cloud_drop_out == 0);
    CHECK(m.in_flight_discarded == 0);
}

TEST_CASE("compute_metrics: overload magnitude case") {
    // 48000 sent, 977 received and answered: cloudDrop = 47023.
    auto m = compute_metrics(expect_one(48000), {ledger_with(48000, 48000, 977)}, {},
                             snap(977, 977, 977));
    CHECK(m.sim_drop == 0);
    CHECK(m.cloud_drop_in == 47023);
    CHECK(m.cloud_drop_out == 0);
    CHECK(m.cloud_drop == 47023);
    CHECK(m.in_flight_discarded == 0);
}

TEST_CASE("compute_metrics: lost echoes land in cloud_drop_out") {
    // Cloud received all 100 but only answered 90.
    auto m = compute_metrics(expect_one(100), {ledger_with(100, 100, 90)}, {},
                             snap(100, 100, 90));
    CHECK(m.cloud_drop_in == 0);
    CHECK(m.cloud_drop_out == 10);
    CHECK(m.in_flight_discarded == 0);
}

TEST_CASE("compute_metrics: late responses counted separately") {
    // Cloud answered everything but the edges collected only 95.
    auto m = compute_metrics(expect_one(100), {ledger_with(100, 100, 95)}, {},
                             snap(100, 100, 100));
    CHECK(m.cloud_drop == 0);
    CHECK(m.in_flight_discarded == 5);
}

TEST_CASE("compute_metrics: accounting identity holds for arbitrary counters") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 500; i++) {
        uint64_t expected = rng() % 10000 + 1;
        uint64_t actual = rng() % (expected + 1);
        uint64_t received = rng() % (actual + 1);
        uint64_t responded = rng() % (received + 1);
        uint64_t collected = rng() % (responded + 1);

        auto m = compute_metrics(expect_one(expected), {ledger_with(expected, actual, collected)},
                                 {}, snap(received, received, responded));
        // expected = actual + simDrop
        CHECK(static_cast<int64_t>(expected) == static_cast<int64_t>(actual) + m.sim_drop);
        // actual = responses + dropIn + dropOut + inFlight
        CHECK(static_cast<int64_t>(actual) ==
              static_cast<int64_t>(m.responses_total) + m.cloud_drop_in + m.cloud_drop_out +
                  m.in_flight_discarded);
        CHECK(m.sim_drop >= 0);
        CHECK(m.cloud_drop_in >= 0);
        CHECK(m.cloud_drop_out >= 0);
        CHECK(m.in_flight_discarded >= 0);
    }
}

TEST_CASE("compute_metrics: conservation violation invalidates the repetition") {
    auto m = compute_metrics(expect_one(10), {ledger_with(7, 7, 7)}, {}, snap(7, 7, 7));
    CHECK(!m.valid);
    CHECK(m.failure.find("conservation") != std::string::npos);
}

TEST_CASE("compute_metrics: rtt-half fallback when the cloud lacks samples") {
    NodeLedger ledger = ledger_with(10, 10, 10);
    ledger.edges[0].rtt_count = 10;
    ledger.edges[0].rtt_sum_ns = 10 * 2000;
    ledger.edges[0].rtt_samples_ns.assign(10, 2000);
    CloudStatsSnapshot cloud = snap(10, 10, 10); // trans_count == 0
    auto m = compute_metrics(expect_one(10), {ledger}, {}, cloud);
    CHECK(m.trans_mode == "rtt-half");
    CHECK(m.trans_mean_ns == 1000);
    CHECK(m.trans_p50_ns == 1000);

    cloud.trans_count = 10;
    cloud.trans_mean_ns = 800;
    auto m2 = compute_metrics(expect_one(10), {ledger}, {}, cloud);
    CHECK(m2.trans_mode == "one-way-aligned");
    CHECK(m2.trans_mean_ns == 800);
}

TEST_CASE("combine_snapshots sums counters and merges by weight") {
    CloudStatsSnapshot a = snap(10, 10, 10);
    a.trans_count = 10;
    a.trans_mean_ns = 100;
    a.per_source["0/0"] = 10;
    CloudStatsSnapshot b = snap(30, 30, 30);
    b.trans_count = 30;
    b.trans_mean_ns = 300;
    b.per_source["0/0"] = 5;
    b.per_source["1/0"] = 25;

    auto c = combine_snapshots({a, b});
    CHECK(c.packets_received == 40);
    CHECK(c.trans_count == 40);
    CHECK(c.trans_mean_ns == 250); // (10*100 + 30*300) / 40
    CHECK(c.per_source["0/0"] == 15);
    CHECK(c.per_source["1/0"] == 25);
}

TEST_CASE("metrics json round-trips") {
    RepetitionMetrics m;
    m.valid = true;
    m.expected_total = 100;
    m.attempted_total = 100;
    m.actual_total = 90;
    m.sim_drop = 10;
    m.trans_mode = "one-way-aligned";
    m.trans_mean_ns = 123456;
    auto back = metrics_from_json(metrics_to_json(m));
    CHECK(back.valid);
    CHECK(back.expected_total == 100);
    CHECK(back.sim_drop == 10);
    CHECK(back.trans_mode == "one-way-aligned");
    CHECK(back.trans_mean_ns == 123456);
}

TEST_CASE("in-process run against a managed cloud: report tree and identity") {
    CloudConfig ccfg;
    ccfg.protocol = Protocol::Udp;
    ccfg.bind_ip = "127.0.0.1";
    CloudServer cloud(ccfg);
    cloud.start();

    auto topo = make_topology(cloud.data_port(), 200 * kNsPerMs, 3, {1, 1, 2}, Speed{0, true});
    // Second node instance, same shape.
    NodeInstance node2 = topo.nodes[0];
    node2.node_id = 1;
    topo.nodes.push_back(node2);

    auto out = fresh_dir("inproc");
    RunOptions opts;
    opts.repetitions = 2;
    opts.out_dir = out;
    opts.in_process_nodes = true;
    opts.quiet = true;
    opts.startup_grace_ns = 100 * kNsPerMs;
    opts.drain_ns = 400 * kNsPerMs;
    opts.control_port_offset = static_cast<int>(cloud.control_port()) -
                               static_cast<int>(cloud.data_port());
    opts.worker_exe = "/unused";

    RunReport report = run_simulation(topo, opts);
    CHECK(report.repetitions == 2);
    CHECK(report.failed_repetitions == 0);
    REQUIRE(report.per_repetition.size() == 2);
    for (const auto& m : report.per_repetition) {
        CHECK(m.valid);
        CHECK(m.expected_total == 2 * (3 + 3 + 2)); // two nodes x (2x period-1 + period-2)
        CHECK(m.sim_drop == 0);
        CHECK(m.cloud_drop == 0);
        CHECK(static_cast<int64_t>(m.actual_total) ==
              static_cast<int64_t>(m.responses_total) + m.cloud_drop_in + m.cloud_drop_out +
                  m.in_flight_discarded);
        CHECK(m.trans_mode == "one-way-aligned");
    }

    CHECK(std::filesystem::exists(out / "topology.json"));
    CHECK(std::filesystem::exists(out / "report.json"));
    CHECK(std::filesystem::exists(out / "report.csv"));
    for (int rep = 0; rep < 2; rep++) {
        auto rep_dir = out / ("rep_" + std::to_string(rep));
        CHECK(std::filesystem::exists(rep_dir / "node_0.json"));
        CHECK(std::filesystem::exists(rep_dir / "node_1.json"));
        CHECK(std::filesystem::exists(rep_dir / "cloud.json"));
        CHECK(std::filesystem::exists(rep_dir / "metrics.json"));
    }

    // The report round-trips through the loader and renders one CSV row.
    auto runs = load_runs(out);
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].report.digest_hex == report.digest_hex);
    CHECK(runs[0].report.per_repetition.size() == 2);
    std::string csv = render_csv(runs);
    CHECK(csv.find("platform_label") != std::string::npos);
    CHECK(csv.find("Native") != std::string::npos);

    cloud.stop();
}

TEST_CASE("cleanup is idempotent") {
    auto out = fresh_dir("cleanup");
    std::filesystem::create_directories(out / "rep_0");
    std::ofstream(out / "rep_0" / "node_0.log") << "log line\n";
    std::ofstream(out / "rep_0" / "node_0.json") << "{}\n";
    std::filesystem::create_directories(out / ".scratch");

    int removed = cleanup_run_dir(out);
    CHECK(removed >= 2);
    CHECK(!std::filesystem::exists(out / "rep_0" / "node_0.log"));
    CHECK(std::filesystem::exists(out / "rep_0" / "node_0.json")); // results stay
    CHECK(cleanup_run_dir(out) == 0);
}

TEST_CASE("mixed topology digests in one run dir are rejected") {
    auto out = fresh_dir("mixed");
    for (int rep = 0; rep < 2; rep++) {
        auto rep_dir = out / ("rep_" + std::to_string(rep));
        std::filesystem::create_directories(rep_dir);
        RepetitionMetrics m;
        m.valid = true;
        nlohmann::json j = metrics_to_json(m);
        j["topology_digest"] = rep == 0 ? "aaaa" : "bbbb";
        std::ofstream(rep_dir / "metrics.json") << j.dump();
    }
    CHECK_THROWS_WITH_AS(load_runs(out), doctest::Contains("inconsistent runs"),
                         std::runtime_error);
}

TEST_CASE("report loading rejects an empty directory") {
    auto out = fresh_dir("empty");
    CHECK_THROWS_AS(load_runs(out), std::runtime_error);
}

TEST_CASE("deploy descriptors per platform kind") {
    auto topo = make_topology(19000, kNsPerSec, 1, {1}, Speed{0, true});
    // Three nodes on three platform kinds.
    topo.nodes[0].platform.kind = PlatformKind::Docker;
    topo.nodes[0].platform.name = "P2";
    topo.nodes[0].platform.cpu = 4;
    topo.nodes[0].platform.memory = MemorySize{2, "G"};

    NodeInstance vm_node = topo.nodes[0];
    vm_node.node_id = 1;
    vm_node.platform = PlatformSpec{};
    vm_node.platform.name = "PV";
    vm_node.platform.kind = PlatformKind::Vm;
    vm_node.platform.cpu = 2;
    vm_node.platform.memory = MemorySize{1, "G"};
    vm_node.platform.ip = "10.1.1.1";
    vm_node.platform.username = "u";
    vm_node.platform.password = "p";
    topo.nodes.push_back(vm_node);

    NodeInstance native_node = topo.nodes[0];
    native_node.node_id = 2;
    native_node.platform = PlatformSpec{};
    native_node.platform.name = "PN";
    native_node.platform.kind = PlatformKind::Native;
    topo.nodes.push_back(native_node);

    NodeInstance free_docker = topo.nodes[0];
    free_docker.node_id = 3;
    free_docker.platform = PlatformSpec{};
    free_docker.platform.name = "PU";
    free_docker.platform.kind = PlatformKind::Docker;
    topo.nodes.push_back(free_docker);

    auto out = fresh_dir("deploy");
    emit_deploy_descriptors(topo, out, "/usr/bin/iotecs", "topology.json");

    // Constrained docker: cpu and memory limits present.
    {
        std::ifstream in(out / "node_0.json");
        auto j = nlohmann::json::parse(in);
        CHECK(j["image"] == "iotecs-node:latest");
        CHECK(j["cpus"] == 4);
        CHECK(j["memory"] == "2G");
        CHECK(j["args"].is_array());
    }
    // Unconstrained docker: no limits.
    {
        std::ifstream in(out / "node_3.json");
        auto j = nlohmann::json::parse(in);
        CHECK(!j.contains("cpus"));
        CHECK(!j.contains("memory"));
    }
    // VM manifest.
    {
        std::ifstream in(out / "node_1.json");
        auto j = nlohmann::json::parse(in);
        CHECK(j["kind"] == "vm");
        CHECK(j["cpu"] == 2);
        CHECK(j["host_ip"] == "10.1.1.1");
    }
    // Native: a launch line.
    {
        std::ifstream in(out / "node_2.sh");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(text.find("/usr/bin/iotecs node-worker") != std::string::npos);
        CHECK(text.find("--node 2") != std::string::npos);
    }
}

TEST_CASE("run_simulation refuses MQTT topologies") {
    auto topo = make_topology(19001, kNsPerSec, 1, {1}, Speed{0, true}, Protocol::Mqtt);
    RunOptions opts;
    opts.out_dir = fresh_dir("mqtt");
    CHECK_THROWS_AS(run_simulation(topo, opts), std::invalid_argument);
}

TEST_CASE("run_simulation aborts when the control channel is unreachable") {
    uint16_t dead_port;
    {
        Socket probe = Socket::tcp();
        probe.bind_to("127.0.0.1", 0);
        dead_port = probe.local_port();
    }
    auto topo = make_topology(dead_port, kNsPerSec, 1, {1}, Speed{0, true});
    RunOptions opts;
    opts.out_dir = fresh_dir("noctl");
    opts.in_process_nodes = true;
    opts.quiet = true;
    opts.worker_exe = "/unused";
    CHECK_THROWS_AS(run_simulation(topo, opts), ControlError);
}
