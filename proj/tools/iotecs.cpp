// iotecs — compile and run edge-to-cloud stress simulations.
//
// Subcommands: validate, run, cloud, expected, recommend-step, report, plus
// the internal node-worker entry the orchestrator spawns per simulation node.
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include "iotecs/control.hpp"
#include "iotecs/orchestrator.hpp"
#include "iotecs/parser.hpp"
#include "iotecs/printer.hpp"
#include "iotecs/report.hpp"
#include "iotecs/units.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

using namespace iotecs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::atomic<bool> g_stop_requested{false};

void on_signal(int) { g_stop_requested.store(true); }

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_diagnostics(const std::vector<Diagnostic>& diags, const std::string& file) {
    for (const auto& d : diags) std::cerr << format_diagnostic(d, file) << "\n";
}

// Parse + resolve + validate; prints every diagnostic. Returns the topology
// only when there are no errors.
std::optional<ResolvedTopology> compile_spec(const std::string& path, bool strict, int* exit_code) {
    auto source = read_file(path);
    if (!source) {
        std::cerr << "error: cannot read " << path << "\n";
        *exit_code = kExitValidation;
        return std::nullopt;
    }
    ParseResult parsed = parse(*source);
    print_diagnostics(parsed.diagnostics, path);
    if (!parsed.ok()) {
        *exit_code = kExitValidation;
        return std::nullopt;
    }
    ResolveResult resolved = resolve(*parsed.ast);
    print_diagnostics(resolved.diagnostics, path);
    if (!resolved.ok()) {
        *exit_code = kExitValidation;
        return std::nullopt;
    }
    auto checks = validate(*resolved.topology);
    print_diagnostics(checks, path);
    bool errors = has_errors(checks);
    bool warnings = false;
    for (const auto& d : checks) warnings |= d.severity == Severity::Warning;
    if (errors || (strict && warnings)) {
        *exit_code = kExitValidation;
        return std::nullopt;
    }
    *exit_code = kExitOk;
    return std::move(resolved.topology);
}

// Duration flag: DSL units plus a bare 0.
int64_t parse_duration_or_throw(const std::string& text, const std::string& flag) {
    std::string err;
    auto ns = parse_duration_flag_ns(text, &err);
    if (!ns) throw CLI::ValidationError(flag, err);
    return *ns;
}

std::vector<int64_t> parse_offsets_csv(const std::string& csv) {
    std::vector<int64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoll(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge-to-cloud stress simulator"};
    app.require_subcommand(1);

    // ---- validate ----------------------------------------------------------
    std::string spec_path;
    bool strict = false;
    auto* cmd_validate = app.add_subcommand("validate", "Check a spec and print diagnostics");
    cmd_validate->add_option("spec", spec_path, "Path to the .iotecs spec")->required();
    cmd_validate->add_flag("--strict", strict, "Treat warnings as errors");

    // ---- run ---------------------------------------------------------------
    std::string run_spec, out_dir, cloud_compute = "0";
    int reps = 1;
    uint64_t seed = 0;
    std::string drain;
    bool auto_cloud = false, in_process = false, keep_logs = false, run_strict = false;
    int cloud_workers = 1, udp_buf = 0, control_port_offset = 1;
    std::string startup_grace = "1s";
    auto* cmd_run = app.add_subcommand("run", "Execute a simulation and write a report tree");
    cmd_run->add_option("spec", run_spec, "Path to the .iotecs spec")->required();
    cmd_run->add_option("--out", out_dir, "Output directory for the report tree")->required();
    cmd_run->add_option("--reps", reps, "Repetitions to aggregate")->check(CLI::PositiveNumber);
    cmd_run->add_option("--seed", seed, "Seed for payload generation");
    cmd_run->add_option("--drain", drain, "Receive drain window after the duration (default 2x step)");
    cmd_run->add_flag("--auto-cloud", auto_cloud,
                      "Start baseline clouds on the spec's loopback endpoints");
    cmd_run->add_option("--cloud-compute", cloud_compute,
                        "Busy-compute per packet for --auto-cloud (e.g. 5ms, 0)");
    cmd_run->add_option("--cloud-workers", cloud_workers, "Worker count for --auto-cloud");
    cmd_run->add_option("--udp-buf", udp_buf, "UDP receive buffer for --auto-cloud (bytes)");
    cmd_run->add_option("--control-port-offset", control_port_offset,
                        "Cloud control port = data port + offset");
    cmd_run->add_option("--startup-grace", startup_grace,
                        "Delay before step 0 so node processes can initialize");
    cmd_run->add_flag("--in-process", in_process, "Run nodes as threads instead of processes");
    cmd_run->add_flag("--keep-logs", keep_logs, "Keep per-node worker logs");
    cmd_run->add_flag("--strict", run_strict, "Refuse to run when validation warns");

    // ---- cloud -------------------------------------------------------------
    std::string protocol = "udp", bind_ip = "0.0.0.0", compute = "0";
    int port = 0, control_port = 0, workers = 1, cloud_udp_buf = 0;
    int64_t compute_ns_raw = -1;
    auto* cmd_cloud = app.add_subcommand("cloud", "Serve a baseline echo cloud");
    cmd_cloud->add_option("--protocol", protocol, "udp or tcp")
        ->check(CLI::IsMember({"udp", "tcp"}));
    cmd_cloud->add_option("--port", port, "Data port (0 = ephemeral)")->required();
    cmd_cloud->add_option("--control-port", control_port,
                          "Control port (default: data port + 1)");
    cmd_cloud->add_option("--compute", compute, "Busy-compute per packet (e.g. 5ms, 0)");
    cmd_cloud->add_option("--compute-ns", compute_ns_raw, "Busy-compute per packet in raw ns")
        ->group("");
    cmd_cloud->add_option("--workers", workers, "Serialized processing workers");
    cmd_cloud->add_option("--udp-buf", cloud_udp_buf, "UDP receive buffer (bytes, 0 = OS default)");
    cmd_cloud->add_option("--bind", bind_ip, "Bind address");

    // ---- expected ----------------------------------------------------------
    std::string expected_spec;
    auto* cmd_expected =
        app.add_subcommand("expected", "Print the per-edge expected-sends oracle as JSON");
    cmd_expected->add_option("spec", expected_spec, "Path to the .iotecs spec")->required();

    // ---- recommend-step ----------------------------------------------------
    std::vector<std::string> intervals;
    auto* cmd_recommend = app.add_subcommand(
        "recommend-step", "Greatest common divisor of device intervals (e.g. 4s 6s)");
    cmd_recommend->add_option("intervals", intervals, "Durations with units")->required();

    // ---- report ------------------------------------------------------------
    std::string report_dir, format = "csv";
    auto* cmd_report = app.add_subcommand("report", "Render reports from run directories");
    cmd_report->add_option("dir", report_dir, "Run directory (or directory of runs)")->required();
    cmd_report->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    // ---- node-worker (internal) ---------------------------------------------
    std::string nw_topology, nw_out, nw_offsets = "0";
    int nw_node = 0;
    int64_t nw_start_wall = 0, nw_drain = 0;
    uint64_t nw_seed = 0;
    auto* cmd_worker = app.add_subcommand("node-worker", "");
    cmd_worker->group(""); // internal: spawned by `run`, hidden from help
    cmd_worker->add_option("--topology", nw_topology)->required();
    cmd_worker->add_option("--node", nw_node)->required();
    cmd_worker->add_option("--out", nw_out)->required();
    cmd_worker->add_option("--start-wall", nw_start_wall)->required();
    cmd_worker->add_option("--drain", nw_drain)->required();
    cmd_worker->add_option("--seed", nw_seed);
    cmd_worker->add_option("--offsets", nw_offsets);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_validate) {
            int code = kExitOk;
            compile_spec(spec_path, strict, &code);
            return code;
        }

        if (*cmd_run) {
            int code = kExitOk;
            auto topo = compile_spec(run_spec, run_strict, &code);
            if (!topo) return code;
            for (const auto& node : topo->nodes)
                for (const auto& edge : node.edges)
                    if (edge.protocol == Protocol::Mqtt) {
                        std::cerr << run_spec << ": error: EdgeDevice '" << edge.spec_name
                                  << "' uses MQTT, which the runtime does not support\n";
                        return kExitValidation;
                    }
            RunOptions options;
            options.repetitions = reps;
            options.seed = seed;
            options.out_dir = out_dir;
            options.in_process_nodes = in_process;
            options.keep_worker_logs = keep_logs;
            options.auto_cloud = auto_cloud;
            options.auto_cloud_workers = cloud_workers;
            options.auto_cloud_udp_rcvbuf = udp_buf;
            options.control_port_offset = control_port_offset;
            options.auto_cloud_compute_ns = parse_duration_or_throw(cloud_compute, "--cloud-compute");
            options.startup_grace_ns = parse_duration_or_throw(startup_grace, "--startup-grace");
            if (!drain.empty()) options.drain_ns = parse_duration_or_throw(drain, "--drain");
            RunReport report = run_simulation(*topo, options);
            nlohmann::json out = report_to_json(report);
            nlohmann::json line;
            line["out_dir"] = out_dir;
            line["topology_digest"] = report.digest_hex;
            line["repetitions"] = report.repetitions;
            line["failed_repetitions"] = report.failed_repetitions;
            line["aggregate"] = out["aggregate"];
            std::cout << line.dump() << "\n";
            return report.all_valid() ? kExitOk : kExitRuntime;
        }

        if (*cmd_cloud) {
            CloudConfig cfg;
            cfg.protocol = protocol == "udp" ? Protocol::Udp : Protocol::Tcp;
            cfg.bind_ip = bind_ip;
            cfg.port = static_cast<uint16_t>(port);
            cfg.control_port =
                static_cast<uint16_t>(control_port > 0 ? control_port : (port ? port + 1 : 0));
            cfg.compute_ns = compute_ns_raw >= 0 ? compute_ns_raw
                                                 : parse_duration_or_throw(compute, "--compute");
            cfg.workers = workers;
            cfg.udp_rcvbuf = cloud_udp_buf;
            CloudServer server(cfg);
            server.start();
            nlohmann::json ready;
            ready["protocol"] = protocol;
            ready["data_port"] = server.data_port();
            ready["control_port"] = server.control_port();
            ready["compute_ns"] = cfg.compute_ns;
            ready["workers"] = cfg.workers;
            std::cout << ready.dump() << std::endl;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop_requested.load() && !server.stopping())
                precise_sleep_ns(100 * 1000 * 1000);
            server.stop();
            return kExitOk;
        }

        if (*cmd_expected) {
            int code = kExitOk;
            auto topo = compile_spec(expected_spec, false, &code);
            if (!topo) return code;
            std::cout << expected_sends_json(*topo).dump(2) << "\n";
            return kExitOk;
        }

        if (*cmd_recommend) {
            std::vector<int64_t> ns;
            for (const auto& text : intervals) {
                std::string err;
                auto v = parse_duration_ns(text, &err);
                if (!v) {
                    std::cerr << "error: " << err << "\n";
                    return kExitValidation;
                }
                ns.push_back(*v);
            }
            std::cout << format_duration_ns(recommend_step_ns(ns)) << "\n";
            return kExitOk;
        }

        if (*cmd_report) {
            auto runs = load_runs(report_dir);
            if (format == "csv") std::cout << render_csv(runs);
            else std::cout << render_json(runs).dump(2) << "\n";
            return kExitOk;
        }

        if (*cmd_worker) {
            std::ifstream in(nw_topology);
            if (!in) {
                std::cerr << "node-worker: cannot read topology " << nw_topology << "\n";
                return kExitRuntime;
            }
            auto j = nlohmann::json::parse(in);
            ResolvedTopology topo = topology_from_json(j);
            const NodeInstance* node = nullptr;
            for (const auto& n : topo.nodes)
                if (n.node_id == nw_node) node = &n;
            if (!node) {
                std::cerr << "node-worker: no node with id " << nw_node << "\n";
                return kExitRuntime;
            }
            NodeRunConfig cfg;
            cfg.start_wall_ns = nw_start_wall;
            cfg.drain_ns = nw_drain;
            cfg.seed = nw_seed;
            cfg.cloud_offsets_ns = parse_offsets_csv(nw_offsets);
            NodeLedger ledger = run_simulation_node(*node, topo, cfg);
            std::ofstream out(nw_out);
            out << ledger_to_json(ledger).dump(2) << "\n";
            return out ? kExitOk : kExitRuntime;
        }
    } catch (const CLI::ValidationError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const ControlError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitRuntime;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
