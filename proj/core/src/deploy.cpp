#include "iotecs/deploy.hpp"

#include <fstream>

#include <json.hpp>

namespace iotecs {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> worker_args(const NodeInstance& node, const std::string& topology_path) {
    return {
        "node-worker",
        "--topology", topology_path,
        "--node", std::to_string(node.node_id),
        "--out", "node_" + std::to_string(node.node_id) + ".json",
        "--start-wall", "${START_WALL}",
        "--drain", "${DRAIN_NS:-1000000000}",
        "--seed", "${SEED:-0}",
        "--offsets", "${OFFSETS:-0}",
    };
}

} // namespace

void emit_deploy_descriptors(const ResolvedTopology& topo, const fs::path& out_dir,
                             const std::string& worker_cmd, const std::string& topology_path) {
    fs::create_directories(out_dir);
    for (const auto& node : topo.nodes) {
        std::string stem = "node_" + std::to_string(node.node_id);
        const PlatformSpec& p = node.platform;
        auto args = worker_args(node, topology_path);

        if (p.kind == PlatformKind::Docker) {
            nlohmann::json j;
            j["image"] = "iotecs-node:latest";
            if (p.is_constrained()) {
                if (p.cpu) j["cpus"] = *p.cpu;
                if (p.memory) j["memory"] = p.memory->to_text();
            }
            j["args"] = args;
            j["node_id"] = node.node_id;
            j["node_spec"] = node.spec_name;
            j["platform"] = p.name;
            if (p.ip) j["host_ip"] = *p.ip;
            if (p.username) j["username"] = *p.username;
            if (p.password) j["password"] = *p.password;
            std::ofstream out(out_dir / (stem + ".json"));
            out << j.dump(2) << "\n";
        } else if (p.kind == PlatformKind::Vm) {
            nlohmann::json j;
            j["kind"] = "vm";
            if (p.cpu) j["cpu"] = *p.cpu;
            if (p.memory) j["memory"] = p.memory->to_text();
            if (p.ip) j["host_ip"] = *p.ip;
            if (p.username) j["username"] = *p.username;
            if (p.password) j["password"] = *p.password;
            j["command"] = worker_cmd;
            j["args"] = args;
            j["node_id"] = node.node_id;
            j["node_spec"] = node.spec_name;
            j["platform"] = p.name;
            std::ofstream out(out_dir / (stem + ".json"));
            out << j.dump(2) << "\n";
        } else {
            // Native: a plain launch line.
            std::ofstream out(out_dir / (stem + ".sh"));
            out << "#!/bin/sh\n";
            out << "# node " << node.node_id << " (" << node.spec_name << ") on platform '"
                << p.name << "'\n";
            out << worker_cmd;
            for (const auto& a : args) out << " " << a;
            out << "\n";
        }
    }
}

} // namespace iotecs
