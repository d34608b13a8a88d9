#include "iotecs/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace iotecs {

namespace fs = std::filesystem;

std::string report_csv_header() {
    return "platform_label,node_count,speed,compute_ns,sim_drop_mean,cloud_drop_mean,"
           "trans_time_ms_mean";
}

std::string report_csv_row(const RunReport& r) {
    std::ostringstream os;
    os << r.config.platform_label << ',' << r.config.node_count << ',' << r.config.speed_label
       << ',' << r.config.compute_ns << ',' << r.sim_drop_mean << ',' << r.cloud_drop_mean << ','
       << r.trans_time_ms_mean;
    return os.str();
}

namespace {

std::optional<nlohmann::json> read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

bool looks_like_run_dir(const fs::path& dir) {
    if (fs::exists(dir / "report.json")) return true;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_directory() && entry.path().filename().string().rfind("rep_", 0) == 0)
            return true;
    return false;
}

RunReport rebuild_aggregates(RunReport report) {
    int valid = 0;
    report.failed_repetitions = 0;
    report.sim_drop_mean = report.cloud_drop_mean = report.cloud_drop_in_mean =
        report.cloud_drop_out_mean = report.in_flight_discarded_mean = 0;
    report.trans_time_ms_mean = report.trans_time_p50_ms_mean = report.trans_time_p95_ms_mean =
        report.trans_time_p99_ms_mean = 0;
    for (const auto& m : report.per_repetition) {
        if (!m.valid) {
            report.failed_repetitions++;
            continue;
        }
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
    report.repetitions = static_cast<int>(report.per_repetition.size());
    return report;
}

LoadedRun load_single_run(const fs::path& dir) {
    LoadedRun run;
    run.dir = dir;

    // Raw per-repetition metrics are the source of truth when present.
    std::vector<fs::path> rep_dirs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_directory() && entry.path().filename().string().rfind("rep_", 0) == 0)
            rep_dirs.push_back(entry.path());
    std::sort(rep_dirs.begin(), rep_dirs.end(), [](const fs::path& a, const fs::path& b) {
        auto num = [](const fs::path& p) {
            return std::stoll(p.filename().string().substr(4));
        };
        return num(a) < num(b);
    });

    auto report_json = read_json_file(dir / "report.json");

    RunReport report;
    if (!rep_dirs.empty()) {
        std::string digest;
        for (const auto& rep_dir : rep_dirs) {
            auto mj = read_json_file(rep_dir / "metrics.json");
            if (!mj) throw std::runtime_error("missing or unreadable " +
                                              (rep_dir / "metrics.json").string());
            std::string d = mj->value("topology_digest", "");
            if (digest.empty()) digest = d;
            else if (d != digest)
                throw std::runtime_error("inconsistent runs: repetitions in " + dir.string() +
                                         " have different topology digests");
            report.per_repetition.push_back(metrics_from_json(*mj));
        }
        report.digest_hex = digest;
        if (report_json) {
            RunReport from_file = report_from_json(*report_json);
            report.config = from_file.config;
            if (!from_file.digest_hex.empty() && !digest.empty() &&
                from_file.digest_hex != digest)
                throw std::runtime_error("inconsistent runs: report.json digest differs from "
                                         "repetition metrics in " +
                                         dir.string());
        }
        report = rebuild_aggregates(std::move(report));
    } else if (report_json) {
        report = report_from_json(*report_json);
    } else {
        throw std::runtime_error("no run data in " + dir.string());
    }
    run.report = std::move(report);
    return run;
}

} // namespace

std::vector<LoadedRun> load_runs(const fs::path& dir) {
    if (!fs::exists(dir)) throw std::runtime_error("results directory does not exist: " + dir.string());
    std::vector<LoadedRun> runs;
    if (looks_like_run_dir(dir)) {
        runs.push_back(load_single_run(dir));
        return runs;
    }
    std::vector<fs::path> subdirs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_directory() && looks_like_run_dir(entry.path()))
            subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) runs.push_back(load_single_run(sub));
    if (runs.empty()) throw std::runtime_error("no run ledgers found in " + dir.string());
    return runs;
}

std::string render_csv(const std::vector<LoadedRun>& runs) {
    std::ostringstream os;
    os << report_csv_header() << "\n";
    for (const auto& run : runs) os << report_csv_row(run.report) << "\n";
    return os.str();
}

nlohmann::json render_json(const std::vector<LoadedRun>& runs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json entry = report_to_json(run.report);
        entry["dir"] = run.dir.string();
        j.push_back(std::move(entry));
    }
    return j;
}

} // namespace iotecs
