// The simulator driver: per repetition it resets the clouds (capturing the
// epoch offset), launches one OS process per simulation node (or in-process
// threads for library use), waits out the duration plus a drain window,
// force-terminates stragglers, collects node ledgers and cloud snapshots,
// and derives SimDrop / CloudDrop / TransTime.
#pragma once

#include "iotecs/cloud.hpp"
#include "iotecs/runtime.hpp"
#include "iotecs/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotecs {

struct RunOptions {
    int repetitions = 1;
    int64_t drain_ns = -1; // -1 means 2 * step
    uint64_t seed = 0;
    std::filesystem::path out_dir;

    // Process isolation (the default): every node instance becomes one child
    // process of worker_exe running the node-worker subcommand. Empty means
    // /proc/self/exe.
    std::string worker_exe;
    bool in_process_nodes = false; // run nodes as threads instead (testing)

    // Starts baseline clouds on the spec's loopback endpoints for the run.
    bool auto_cloud = false;
    int64_t auto_cloud_compute_ns = 0;
    int auto_cloud_workers = 1;
    int auto_cloud_udp_rcvbuf = 0;

    int control_port_offset = 1; // control port = data port + offset
    int64_t startup_grace_ns = 1000 * 1000 * 1000;
    int64_t kill_grace_ns = 5LL * 1000 * 1000 * 1000;
    int retry_failed_reps = 1;
    bool keep_worker_logs = false;
    bool emit_deploy = true;
    bool quiet = false;
};

struct RepetitionMetrics {
    bool valid = false;
    std::string failure;

    uint64_t expected_total = 0;
    uint64_t attempted_total = 0;
    uint64_t actual_total = 0;
    uint64_t responses_total = 0;

    int64_t sim_drop = 0;            // expected - actual
    int64_t cloud_drop = 0;          // cloud_drop_in + cloud_drop_out
    int64_t cloud_drop_in = 0;       // actual - received by cloud
    int64_t cloud_drop_out = 0;      // received - responses sent by cloud
    int64_t in_flight_discarded = 0; // responses sent - responses collected

    uint64_t cloud_received = 0;
    uint64_t cloud_processed = 0;
    uint64_t cloud_responses_sent = 0;
    uint64_t cloud_malformed = 0;

    std::string trans_mode; // "one-way-aligned" or "rtt-half"
    uint64_t trans_count = 0;
    uint64_t trans_negative = 0;
    int64_t trans_mean_ns = 0;
    int64_t trans_p50_ns = 0;
    int64_t trans_p95_ns = 0;
    int64_t trans_p99_ns = 0;

    uint64_t rtt_count = 0;
    int64_t rtt_mean_ns = 0;
    uint64_t step_budget_breaks = 0;
    uint64_t late_wakes = 0;
    uint64_t send_errors = 0;
    uint64_t duplicates = 0;

    int64_t epoch_offset_ns = 0;
    int64_t wall_duration_ns = 0;
};

nlohmann::json metrics_to_json(const RepetitionMetrics& m);
RepetitionMetrics metrics_from_json(const nlohmann::json& j);

struct RunConfigSummary {
    std::string platform_label;
    int node_count = 0;
    int edge_count = 0;
    int device_count = 0;
    std::string speed_label; // "250", "MAX" or "mixed"
    std::string protocol_label;
    int64_t compute_ns = 0;
    int udp_rcvbuf = 0;
    int64_t step_ns = 0;
    int64_t duration_ns = 0;
    int64_t step_count = 0;
};

struct RunReport {
    std::string digest_hex;
    int repetitions = 0;
    int failed_repetitions = 0;
    RunConfigSummary config;
    std::vector<RepetitionMetrics> per_repetition;

    // Arithmetic means over valid repetitions.
    double sim_drop_mean = 0;
    double cloud_drop_mean = 0;
    double cloud_drop_in_mean = 0;
    double cloud_drop_out_mean = 0;
    double in_flight_discarded_mean = 0;
    double trans_time_ms_mean = 0;
    double trans_time_p50_ms_mean = 0;
    double trans_time_p95_ms_mean = 0;
    double trans_time_p99_ms_mean = 0;

    bool all_valid() const { return failed_repetitions == 0; }
};

nlohmann::json report_to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

// Pure metric derivation from one repetition's raw counters. The cloud
// snapshots must bracket the repetition (before taken right after RESET).
RepetitionMetrics compute_metrics(const std::map<EdgeKey, uint64_t>& expected,
                                  const std::vector<NodeLedger>& ledgers,
                                  const CloudStatsSnapshot& cloud_before,
                                  const CloudStatsSnapshot& cloud_after);

// Combines per-cloud snapshots into run totals (counters summed, transit
// aggregates merged weighted by sample count).
CloudStatsSnapshot combine_snapshots(const std::vector<CloudStatsSnapshot>& snaps);

// Fatal setup problems (unreachable control channel, unsupported protocol,
// port conflicts) throw; per-repetition trouble is retried once and then
// reported through RunReport.
RunReport run_simulation(const ResolvedTopology& topo, const RunOptions& options);

// Removes transient artifacts (worker logs, scratch dirs) from a run tree.
// Returns the number of filesystem entries removed; a second pass removes
// nothing.
int cleanup_run_dir(const std::filesystem::path& out_dir);

// Builds the summary row for reports.
RunConfigSummary summarize_config(const ResolvedTopology& topo,
                                  const CloudStatsSnapshot& cloud);

} // namespace iotecs
