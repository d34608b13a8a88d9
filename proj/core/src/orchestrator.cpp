#include "iotecs/orchestrator.hpp"

#include "iotecs/control.hpp"
#include "iotecs/deploy.hpp"
#include "iotecs/report.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace iotecs {

namespace fs = std::filesystem;

nlohmann::json metrics_to_json(const RepetitionMetrics& m) {
    nlohmann::json j;
    j["valid"] = m.valid;
    if (!m.failure.empty()) j["failure"] = m.failure;
    j["expected_total"] = m.expected_total;
    j["attempted_total"] = m.attempted_total;
    j["actual_total"] = m.actual_total;
    j["responses_total"] = m.responses_total;
    j["sim_drop"] = m.sim_drop;
    j["cloud_drop"] = m.cloud_drop;
    j["cloud_drop_in"] = m.cloud_drop_in;
    j["cloud_drop_out"] = m.cloud_drop_out;
    j["in_flight_discarded"] = m.in_flight_discarded;
    j["cloud_received"] = m.cloud_received;
    j["cloud_processed"] = m.cloud_processed;
    j["cloud_responses_sent"] = m.cloud_responses_sent;
    j["cloud_malformed"] = m.cloud_malformed;
    j["trans_mode"] = m.trans_mode;
    j["trans_count"] = m.trans_count;
    j["trans_negative"] = m.trans_negative;
    j["trans_mean_ns"] = m.trans_mean_ns;
    j["trans_p50_ns"] = m.trans_p50_ns;
    j["trans_p95_ns"] = m.trans_p95_ns;
    j["trans_p99_ns"] = m.trans_p99_ns;
    j["rtt_count"] = m.rtt_count;
    j["rtt_mean_ns"] = m.rtt_mean_ns;
    j["step_budget_breaks"] = m.step_budget_breaks;
    j["late_wakes"] = m.late_wakes;
    j["send_errors"] = m.send_errors;
    j["duplicates"] = m.duplicates;
    j["epoch_offset_ns"] = m.epoch_offset_ns;
    j["wall_duration_ns"] = m.wall_duration_ns;
    return j;
}

RepetitionMetrics metrics_from_json(const nlohmann::json& j) {
    RepetitionMetrics m;
    m.valid = j.at("valid").get<bool>();
    m.failure = j.value("failure", "");
    m.expected_total = j.at("expected_total").get<uint64_t>();
    m.attempted_total = j.at("attempted_total").get<uint64_t>();
    m.actual_total = j.at("actual_total").get<uint64_t>();
    m.responses_total = j.at("responses_total").get<uint64_t>();
    m.sim_drop = j.at("sim_drop").get<int64_t>();
    m.cloud_drop = j.at("cloud_drop").get<int64_t>();
    m.cloud_drop_in = j.at("cloud_drop_in").get<int64_t>();
    m.cloud_drop_out = j.at("cloud_drop_out").get<int64_t>();
    m.in_flight_discarded = j.at("in_flight_discarded").get<int64_t>();
    m.cloud_received = j.value("cloud_received", 0ull);
    m.cloud_processed = j.value("cloud_processed", 0ull);
    m.cloud_responses_sent = j.value("cloud_responses_sent", 0ull);
    m.cloud_malformed = j.value("cloud_malformed", 0ull);
    m.trans_mode = j.value("trans_mode", "");
    m.trans_count = j.value("trans_count", 0ull);
    m.trans_negative = j.value("trans_negative", 0ull);
    m.trans_mean_ns = j.value("trans_mean_ns", int64_t{0});
    m.trans_p50_ns = j.value("trans_p50_ns", int64_t{0});
    m.trans_p95_ns = j.value("trans_p95_ns", int64_t{0});
    m.trans_p99_ns = j.value("trans_p99_ns", int64_t{0});
    m.rtt_count = j.value("rtt_count", 0ull);
    m.rtt_mean_ns = j.value("rtt_mean_ns", int64_t{0});
    m.step_budget_breaks = j.value("step_budget_breaks", 0ull);
    m.late_wakes = j.value("late_wakes", 0ull);
    m.send_errors = j.value("send_errors", 0ull);
    m.duplicates = j.value("duplicates", 0ull);
    m.epoch_offset_ns = j.value("epoch_offset_ns", int64_t{0});
    m.wall_duration_ns = j.value("wall_duration_ns", int64_t{0});
    return m;
}

static nlohmann::json config_to_json(const RunConfigSummary& c) {
    nlohmann::json j;
    j["platform_label"] = c.platform_label;
    j["node_count"] = c.node_count;
    j["edge_count"] = c.edge_count;
    j["device_count"] = c.device_count;
    j["speed"] = c.speed_label;
    j["protocol"] = c.protocol_label;
    j["compute_ns"] = c.compute_ns;
    j["udp_rcvbuf"] = c.udp_rcvbuf;
    j["step_ns"] = c.step_ns;
    j["duration_ns"] = c.duration_ns;
    j["step_count"] = c.step_count;
    return j;
}

static RunConfigSummary config_from_json(const nlohmann::json& j) {
    RunConfigSummary c;
    c.platform_label = j.value("platform_label", "");
    c.node_count = j.value("node_count", 0);
    c.edge_count = j.value("edge_count", 0);
    c.device_count = j.value("device_count", 0);
    c.speed_label = j.value("speed", "");
    c.protocol_label = j.value("protocol", "");
    c.compute_ns = j.value("compute_ns", int64_t{0});
    c.udp_rcvbuf = j.value("udp_rcvbuf", 0);
    c.step_ns = j.value("step_ns", int64_t{0});
    c.duration_ns = j.value("duration_ns", int64_t{0});
    c.step_count = j.value("step_count", int64_t{0});
    return c;
}

nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["topology_digest"] = r.digest_hex;
    j["repetitions"] = r.repetitions;
    j["failed_repetitions"] = r.failed_repetitions;
    j["config"] = config_to_json(r.config);
    j["per_repetition"] = nlohmann::json::array();
    for (const auto& m : r.per_repetition) j["per_repetition"].push_back(metrics_to_json(m));
    nlohmann::json agg;
    agg["sim_drop_mean"] = r.sim_drop_mean;
    agg["cloud_drop_mean"] = r.cloud_drop_mean;
    agg["cloud_drop_in_mean"] = r.cloud_drop_in_mean;
    agg["cloud_drop_out_mean"] = r.cloud_drop_out_mean;
    agg["in_flight_discarded_mean"] = r.in_flight_discarded_mean;
    agg["trans_time_ms_mean"] = r.trans_time_ms_mean;
    agg["trans_time_p50_ms_mean"] = r.trans_time_p50_ms_mean;
    agg["trans_time_p95_ms_mean"] = r.trans_time_p95_ms_mean;
    agg["trans_time_p99_ms_mean"] = r.trans_time_p99_ms_mean;
    j["aggregate"] = agg;
    return j;
}

RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.digest_hex = j.at("topology_digest").get<std::string>();
    r.repetitions = j.at("repetitions").get<int>();
    r.failed_repetitions = j.value("failed_repetitions", 0);
    r.config = config_from_json(j.at("config"));
    for (const auto& jm : j.at("per_repetition")) r.per_repetition.push_back(metrics_from_json(jm));
    const auto& agg = j.at("aggregate");
    r.sim_drop_mean = agg.value("sim_drop_mean", 0.0);
    r.cloud_drop_mean = agg.value("cloud_drop_mean", 0.0);
    r.cloud_drop_in_mean = agg.value("cloud_drop_in_mean", 0.0);
    r.cloud_drop_out_mean = agg.value("cloud_drop_out_mean", 0.0);
    r.in_flight_discarded_mean = agg.value("in_flight_discarded_mean", 0.0);
    r.trans_time_ms_mean = agg.value("trans_time_ms_mean", 0.0);
    r.trans_time_p50_ms_mean = agg.value("trans_time_p50_ms_mean", 0.0);
    r.trans_time_p95_ms_mean = agg.value("trans_time_p95_ms_mean", 0.0);
    r.trans_time_p99_ms_mean = agg.value("trans_time_p99_ms_mean", 0.0);
    return r;
}

CloudStatsSnapshot combine_snapshots(const std::vector<CloudStatsSnapshot>& snaps) {
    CloudStatsSnapshot out;
    if (snaps.empty()) return out;
    out = snaps[0];
    for (size_t i = 1; i < snaps.size(); i++) {
        const auto& s = snaps[i];
        out.packets_received += s.packets_received;
        out.packets_processed += s.packets_processed;
        out.responses_sent += s.responses_sent;
        out.malformed += s.malformed;
        out.trans_negative += s.trans_negative;
        for (const auto& [k, v] : s.per_source) out.per_source[k] += v;
        // Weighted merge; percentiles become approximations across clouds.
        uint64_t total = out.trans_count + s.trans_count;
        if (total > 0) {
            auto merge = [&](int64_t a, int64_t b) {
                return static_cast<int64_t>(
                    (static_cast<double>(a) * static_cast<double>(out.trans_count) +
                     static_cast<double>(b) * static_cast<double>(s.trans_count)) /
                    static_cast<double>(total));
            };
            out.trans_mean_ns = merge(out.trans_mean_ns, s.trans_mean_ns);
            out.trans_p50_ns = merge(out.trans_p50_ns, s.trans_p50_ns);
            out.trans_p95_ns = merge(out.trans_p95_ns, s.trans_p95_ns);
            out.trans_p99_ns = merge(out.trans_p99_ns, s.trans_p99_ns);
        }
        out.trans_count = total;
        out.epoch_ns = std::max(out.epoch_ns, s.epoch_ns);
    }
    return out;
}

RepetitionMetrics compute_metrics(const std::map<EdgeKey, uint64_t>& expected,
                                  const std::vector<NodeLedger>& ledgers,
                                  const CloudStatsSnapshot& cloud_before,
                                  const CloudStatsSnapshot& cloud_after) {
    RepetitionMetrics m;
    for (const auto& [key, count] : expected) m.expected_total += count;

    uint64_t rtt_count = 0;
    int64_t rtt_sum = 0;
    std::vector<int64_t> rtt_samples;
    for (const auto& ledger : ledgers) {
        for (const auto& e : ledger.edges) {
            m.attempted_total += e.attempted_sends;
            m.actual_total += e.actual_sends;
            m.responses_total += e.responses_received;
            m.step_budget_breaks += e.step_budget_breaks;
            m.late_wakes += e.late_wakes;
            m.send_errors += e.send_errors;
            m.duplicates += e.duplicates;
            rtt_count += e.rtt_count;
            rtt_sum += e.rtt_sum_ns;
            rtt_samples.insert(rtt_samples.end(), e.rtt_samples_ns.begin(),
                               e.rtt_samples_ns.end());
        }
    }

    m.cloud_received = cloud_after.packets_received - cloud_before.packets_received;
    m.cloud_processed = cloud_after.packets_processed - cloud_before.packets_processed;
    m.cloud_responses_sent = cloud_after.responses_sent - cloud_before.responses_sent;
    m.cloud_malformed = cloud_after.malformed - cloud_before.malformed;

    m.sim_drop = static_cast<int64_t>(m.expected_total) - static_cast<int64_t>(m.actual_total);
    m.cloud_drop_in =
        static_cast<int64_t>(m.actual_total) - static_cast<int64_t>(m.cloud_received);
    m.cloud_drop_out =
        static_cast<int64_t>(m.cloud_received) - static_cast<int64_t>(m.cloud_responses_sent);
    m.in_flight_discarded =
        static_cast<int64_t>(m.cloud_responses_sent) - static_cast<int64_t>(m.responses_total);
    m.cloud_drop = m.cloud_drop_in + m.cloud_drop_out;

    m.rtt_count = rtt_count;
    m.rtt_mean_ns = rtt_count ? rtt_sum / static_cast<int64_t>(rtt_count) : 0;

    uint64_t cloud_trans = cloud_after.trans_count - cloud_before.trans_count;
    if (cloud_trans > 0) {
        // Senders stamp packets in the cloud's clock domain (offset exchanged
        // over the control channel), so the cloud-side aggregates are the
        // one-way transit times directly.
        m.trans_mode = "one-way-aligned";
        m.trans_count = cloud_trans;
        m.trans_negative = cloud_after.trans_negative - cloud_before.trans_negative;
        m.trans_mean_ns = cloud_after.trans_mean_ns;
        m.trans_p50_ns = cloud_after.trans_p50_ns;
        m.trans_p95_ns = cloud_after.trans_p95_ns;
        m.trans_p99_ns = cloud_after.trans_p99_ns;
    } else if (rtt_count > 0) {
        m.trans_mode = "rtt-half";
        m.trans_count = rtt_count;
        m.trans_mean_ns = m.rtt_mean_ns / 2;
        if (!rtt_samples.empty()) {
            std::sort(rtt_samples.begin(), rtt_samples.end());
            auto pick = [&](double q) {
                size_t rank = static_cast<size_t>(q * static_cast<double>(rtt_samples.size()));
                if (rank >= rtt_samples.size()) rank = rtt_samples.size() - 1;
                return rtt_samples[rank] / 2;
            };
            m.trans_p50_ns = pick(0.50);
            m.trans_p95_ns = pick(0.95);
            m.trans_p99_ns = pick(0.99);
        }
    } else {
        m.trans_mode = "none";
    }

    m.valid = m.attempted_total == m.expected_total;
    if (!m.valid)
        m.failure = "conservation violated: attempted " + std::to_string(m.attempted_total) +
                    " != expected " + std::to_string(m.expected_total);
    return m;
}

RunConfigSummary summarize_config(const ResolvedTopology& topo, const CloudStatsSnapshot& cloud) {
    RunConfigSummary c;
    c.node_count = static_cast<int>(topo.nodes.size());
    c.edge_count = static_cast<int>(topo.edge_count());
    c.device_count = static_cast<int>(topo.device_count());
    c.step_ns = topo.step_ns;
    c.duration_ns = topo.duration_ns;
    c.step_count = topo.step_count;
    c.compute_ns = cloud.compute_ns;
    c.udp_rcvbuf = cloud.udp_rcvbuf;

    std::set<std::string> platforms;
    std::set<std::string> speeds;
    std::set<std::string> protocols;
    for (const auto& node : topo.nodes) {
        std::string label = to_string(node.platform.kind);
        if (node.platform.kind == PlatformKind::Docker && node.platform.is_constrained())
            label = "ConstrainedDocker";
        platforms.insert(label);
        for (const auto& edge : node.edges) {
            speeds.insert(edge.speed.is_max ? "MAX" : std::to_string(edge.speed.packets_per_step));
            protocols.insert(to_string(edge.protocol));
        }
    }
    auto join = [](const std::set<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += "+";
            out += s;
        }
        return out;
    };
    c.platform_label = join(platforms);
    c.speed_label = speeds.size() == 1 ? *speeds.begin() : "mixed";
    c.protocol_label = join(protocols);
    return c;
}

namespace {

std::string self_exe_path() {
    char buf[4096];
    ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return "";
    buf[n] = '\0';
    return buf;
}

pid_t spawn_process(const std::vector<std::string>& argv, const fs::path& log_path) {
    pid_t pid = ::fork();
    if (pid != 0) return pid;
    // Child.
    int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
        ::dup2(fd, 1);
        ::dup2(fd, 2);
        ::close(fd);
    }
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(args[0], args.data());
    ::_exit(127);
}

struct NodeChild {
    pid_t pid = -1;
    uint16_t node_id = 0;
    fs::path ledger_path;
    fs::path log_path;
    bool exited = false;
    int exit_status = -1;
};

// Waits for all children until the monotonic deadline, then escalates
// SIGTERM -> SIGKILL.
void reap_children(std::vector<NodeChild>& children, int64_t deadline_mono_ns) {
    auto pending = [&] {
        return std::any_of(children.begin(), children.end(),
                           [](const NodeChild& c) { return !c.exited; });
    };
    auto poll_once = [&] {
        for (auto& c : children) {
            if (c.exited) continue;
            int status = 0;
            pid_t rc = ::waitpid(c.pid, &status, WNOHANG);
            if (rc == c.pid) {
                c.exited = true;
                c.exit_status = status;
            }
        }
    };
    while (pending() && mono_now_ns() < deadline_mono_ns) {
        poll_once();
        if (!pending()) return;
        precise_sleep_ns(20 * 1000 * 1000);
    }
    poll_once();
    if (!pending()) return;
    for (auto& c : children)
        if (!c.exited) ::kill(c.pid, SIGTERM);
    int64_t term_deadline = mono_now_ns() + 500 * 1000 * 1000;
    while (pending() && mono_now_ns() < term_deadline) {
        poll_once();
        precise_sleep_ns(20 * 1000 * 1000);
    }
    for (auto& c : children) {
        if (!c.exited) {
            ::kill(c.pid, SIGKILL);
            int status = 0;
            ::waitpid(c.pid, &status, 0);
            c.exited = true;
            c.exit_status = status;
        }
    }
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

struct CloudHandles {
    std::vector<std::unique_ptr<CloudServer>> servers; // auto-cloud only
    std::vector<std::unique_ptr<ControlClient>> controls;
    std::vector<int64_t> offsets_ns; // per cloud: cloud_wall - local_wall
};

Protocol cloud_protocol(const ResolvedTopology& topo, int cloud_index) {
    std::set<Protocol> protos;
    for (const auto& node : topo.nodes)
        for (const auto& edge : node.edges)
            if (edge.cloud_index == cloud_index) protos.insert(edge.protocol);
    if (protos.empty()) return Protocol::Udp;
    if (protos.size() > 1)
        throw std::invalid_argument("cloud '" + topo.clouds[cloud_index].name +
                                    "' is targeted over multiple protocols");
    return *protos.begin();
}

} // namespace

int cleanup_run_dir(const fs::path& out_dir) {
    int removed = 0;
    std::error_code ec;
    if (!fs::exists(out_dir, ec)) return 0;
    for (const auto& rep : fs::directory_iterator(out_dir, ec)) {
        if (!rep.is_directory()) continue;
        std::string name = rep.path().filename().string();
        if (name == ".scratch") {
            removed += static_cast<int>(fs::remove_all(rep.path(), ec));
            continue;
        }
        if (name.rfind("rep_", 0) != 0) continue;
        for (const auto& f : fs::directory_iterator(rep.path(), ec)) {
            if (f.path().extension() == ".log") {
                if (fs::remove(f.path(), ec)) removed++;
            }
        }
    }
    return removed;
}

RunReport run_simulation(const ResolvedTopology& topo, const RunOptions& options) {
    for (const auto& node : topo.nodes)
        for (const auto& edge : node.edges)
            if (edge.protocol == Protocol::Mqtt)
                throw std::invalid_argument(
                    "EdgeDevice '" + edge.spec_name +
                    "' uses MQTT, which the runtime does not support");

    if (options.out_dir.empty()) throw std::invalid_argument("run_simulation: out_dir is required");
    fs::create_directories(options.out_dir);

    const int64_t drain_ns = options.drain_ns >= 0 ? options.drain_ns : 2 * topo.step_ns;
    const std::string worker = options.worker_exe.empty() ? self_exe_path() : options.worker_exe;
    if (!options.in_process_nodes && worker.empty())
        throw std::runtime_error("cannot determine worker executable path");

    const fs::path topo_path = options.out_dir / "topology.json";
    write_json_file(topo_path, topology_to_json(topo));
    if (options.emit_deploy)
        emit_deploy_descriptors(topo, options.out_dir / "deploy", worker, topo_path.string());

    CloudHandles clouds;
    if (options.auto_cloud) {
        for (size_t i = 0; i < topo.clouds.size(); i++) {
            const auto& spec = topo.clouds[i];
            if (spec.ip.rfind("127.", 0) != 0)
                throw std::invalid_argument("--auto-cloud requires loopback cloud IPs; '" +
                                            spec.name + "' is " + spec.ip);
            CloudConfig cfg;
            cfg.protocol = cloud_protocol(topo, static_cast<int>(i));
            cfg.bind_ip = spec.ip;
            cfg.port = static_cast<uint16_t>(spec.port);
            cfg.control_port = static_cast<uint16_t>(spec.port + options.control_port_offset);
            cfg.compute_ns = options.auto_cloud_compute_ns;
            cfg.workers = options.auto_cloud_workers;
            cfg.udp_rcvbuf = options.auto_cloud_udp_rcvbuf;
            auto server = std::make_unique<CloudServer>(cfg);
            server->start();
            clouds.servers.push_back(std::move(server));
        }
    }
    for (const auto& spec : topo.clouds) {
        clouds.controls.push_back(std::make_unique<ControlClient>(
            spec.ip, static_cast<uint16_t>(spec.port + options.control_port_offset)));
        clouds.offsets_ns.push_back(0);
    }

    auto expected = expected_sends(topo);
    RunReport report;
    report.digest_hex = topology_digest_hex(topo);
    report.repetitions = options.repetitions;

    auto run_one = [&](int rep_index) -> RepetitionMetrics {
        const fs::path rep_dir = options.out_dir / ("rep_" + std::to_string(rep_index));
        fs::create_directories(rep_dir);

        // RESET every cloud and estimate each clock offset from the reply.
        std::vector<CloudStatsSnapshot> before;
        for (size_t i = 0; i < clouds.controls.size(); i++) {
            int64_t t0 = wall_now_ns();
            int64_t epoch = clouds.controls[i]->reset_epoch();
            int64_t t1 = wall_now_ns();
            clouds.offsets_ns[i] = epoch - (t0 + t1) / 2;
            before.push_back(clouds.controls[i]->snapshot());
        }

        std::string offsets_csv;
        for (size_t i = 0; i < clouds.offsets_ns.size(); i++) {
            if (i) offsets_csv += ",";
            offsets_csv += std::to_string(clouds.offsets_ns[i]);
        }

        const int64_t start_wall = wall_now_ns() + options.startup_grace_ns;
        const int64_t rep_wall_start = wall_now_ns();
        std::vector<NodeLedger> ledgers;
        std::string spawn_failure;

        if (options.in_process_nodes) {
            std::vector<NodeLedger> results(topo.nodes.size());
            std::vector<std::thread> threads;
            for (size_t i = 0; i < topo.nodes.size(); i++) {
                threads.emplace_back([&, i] {
                    NodeRunConfig cfg;
                    cfg.start_wall_ns = start_wall;
                    cfg.drain_ns = drain_ns;
                    cfg.seed = options.seed;
                    cfg.cloud_offsets_ns = clouds.offsets_ns;
                    results[i] = run_simulation_node(topo.nodes[i], topo, cfg);
                });
            }
            for (auto& t : threads) t.join();
            for (size_t i = 0; i < results.size(); i++) {
                write_json_file(rep_dir / ("node_" + std::to_string(results[i].node_id) + ".json"),
                                ledger_to_json(results[i]));
                ledgers.push_back(std::move(results[i]));
            }
        } else {
            std::vector<NodeChild> children;
            for (const auto& node : topo.nodes) {
                NodeChild child;
                child.node_id = node.node_id;
                child.ledger_path = rep_dir / ("node_" + std::to_string(node.node_id) + ".json");
                child.log_path = rep_dir / ("node_" + std::to_string(node.node_id) + ".log");
                std::vector<std::string> argv = {
                    worker,
                    "node-worker",
                    "--topology", topo_path.string(),
                    "--node", std::to_string(node.node_id),
                    "--out", child.ledger_path.string(),
                    "--start-wall", std::to_string(start_wall),
                    "--drain", std::to_string(drain_ns),
                    "--seed", std::to_string(options.seed),
                    "--offsets", offsets_csv,
                };
                child.pid = spawn_process(argv, child.log_path);
                if (child.pid < 0) {
                    spawn_failure = "fork failed: " + std::string(strerror(errno));
                    child.exited = true; // never passes a -1 pid to waitpid/kill
                }
                children.push_back(std::move(child));
            }

            AlignedClock local;
            int64_t deadline = local.mono_for_wall(start_wall) + topo.duration_ns + drain_ns +
                               options.kill_grace_ns;
            reap_children(children, deadline);

            for (const auto& child : children) {
                std::ifstream in(child.ledger_path);
                if (!in) {
                    spawn_failure = "node " + std::to_string(child.node_id) +
                                    " produced no ledger (exit status " +
                                    std::to_string(child.exit_status) + ")";
                    continue;
                }
                auto j = nlohmann::json::parse(in, nullptr, false);
                if (j.is_discarded()) {
                    spawn_failure =
                        "node " + std::to_string(child.node_id) + " ledger is unreadable";
                    continue;
                }
                ledgers.push_back(ledger_from_json(j));
            }
        }

        std::vector<CloudStatsSnapshot> after;
        for (auto& control : clouds.controls) after.push_back(control->snapshot());
        write_json_file(rep_dir / "cloud.json", [&] {
            nlohmann::json j;
            j["clouds"] = nlohmann::json::array();
            for (const auto& s : after) j["clouds"].push_back(snapshot_to_json(s));
            j["combined"] = snapshot_to_json(combine_snapshots(after));
            return j;
        }());

        RepetitionMetrics metrics;
        if (ledgers.size() != topo.nodes.size()) {
            metrics.valid = false;
            metrics.failure = spawn_failure.empty() ? "missing node ledgers" : spawn_failure;
            for (const auto& [key, count] : expected) metrics.expected_total += count;
        } else {
            metrics = compute_metrics(expected, ledgers, combine_snapshots(before),
                                      combine_snapshots(after));
            if (!spawn_failure.empty()) {
                metrics.valid = false;
                metrics.failure = spawn_failure;
            }
        }
        int64_t offset_sum = 0;
        for (int64_t o : clouds.offsets_ns) offset_sum += o;
        metrics.epoch_offset_ns =
            clouds.offsets_ns.empty() ? 0
                                      : offset_sum / static_cast<int64_t>(clouds.offsets_ns.size());
        metrics.wall_duration_ns = wall_now_ns() - rep_wall_start;

        nlohmann::json mj = metrics_to_json(metrics);
        mj["topology_digest"] = report.digest_hex;
        mj["repetition"] = rep_index;
        write_json_file(rep_dir / "metrics.json", mj);
        return metrics;
    };

    for (int rep = 0; rep < options.repetitions; rep++) {
        RepetitionMetrics metrics = run_one(rep);
        int retries = options.retry_failed_reps;
        while (!metrics.valid && retries-- > 0) {
            if (!options.quiet)
                std::cerr << "rep " << rep << " invalid (" << metrics.failure << "), retrying\n";
            metrics = run_one(rep);
        }
        if (!metrics.valid) report.failed_repetitions++;
        if (!options.quiet) {
            std::cerr << "rep " << rep + 1 << "/" << options.repetitions
                      << ": sim_drop=" << metrics.sim_drop << " cloud_drop=" << metrics.cloud_drop
                      << " trans_mean=" << static_cast<double>(metrics.trans_mean_ns) / 1e6
                      << "ms" << (metrics.valid ? "" : " [INVALID]") << "\n";
        }
        report.per_repetition.push_back(std::move(metrics));
    }

    // Aggregate means over valid repetitions.
    int valid = 0;
    for (const auto& m : report.per_repetition) {
        if (!m.valid) continue;
        valid++;
        report.sim_drop_mean += static_cast<double>(m.sim_drop);
        report.cloud_drop_mean += static_cast<double>(m.cloud_drop);
        report.cloud_drop_in_mean += static_cast<double>(m.cloud_drop_in);
        report.cloud_drop_out_mean += static_cast<double>(m.cloud_drop_out);
        report.in_flight_discarded_mean += static_cast<double>(m.in_flight_discarded);
        report.trans_time_ms_mean += static_cast<double>(m.trans_mean_ns) / 1e6;
        report.trans_time_p50_ms_mean += static_cast<double>(m.trans_p50_ns) / 1e6;
        report.trans_time_p95_ms_mean += static_cast<double>(m.trans_p95_ns) / 1e6;
        report.trans_time_p99_ms_mean += static_cast<double>(m.trans_p99_ns) / 1e6;
    }
    if (valid > 0) {
        report.sim_drop_mean /= valid;
        report.cloud_drop_mean /= valid;
        report.cloud_drop_in_mean /= valid;
        report.cloud_drop_out_mean /= valid;
        report.in_flight_discarded_mean /= valid;
        report.trans_time_ms_mean /= valid;
        report.trans_time_p50_ms_mean /= valid;
        report.trans_time_p95_ms_mean /= valid;
        report.trans_time_p99_ms_mean /= valid;
    }

    CloudStatsSnapshot last_cloud;
    {
        std::vector<CloudStatsSnapshot> snaps;
        for (auto& control : clouds.controls) snaps.push_back(control->snapshot());
        last_cloud = combine_snapshots(snaps);
    }
    report.config = summarize_config(topo, last_cloud);

    write_json_file(options.out_dir / "report.json", report_to_json(report));
    {
        std::ofstream csv(options.out_dir / "report.csv");
        csv << report_csv_header() << "\n" << report_csv_row(report) << "\n";
    }

    if (!options.keep_worker_logs && report.failed_repetitions == 0)
        cleanup_run_dir(options.out_dir);

    for (auto& server : clouds.servers) server->stop();
    return report;
}

} // namespace iotecs
