#include "iotecs/topology.hpp"

#include "iotecs/units.hpp"
#include "iotecs/wire.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace iotecs {

size_t ResolvedTopology::edge_count() const {
    size_t n = 0;
    for (const auto& node : nodes) n += node.edges.size();
    return n;
}

size_t ResolvedTopology::device_count() const {
    size_t n = 0;
    for (const auto& node : nodes)
        for (const auto& edge : node.edges) n += edge.devices.size();
    return n;
}

namespace {

constexpr int64_t kMaxInstancesPerTier = 65535;

template <typename T>
std::unordered_map<std::string, const T*> index_by_name(const std::vector<T>& items) {
    std::unordered_map<std::string, const T*> map;
    for (const auto& item : items) map.emplace(item.name, &item);
    return map;
}

} // namespace

ResolveResult resolve(const SpecAst& ast) {
    ResolveResult result;
    auto& diags = result.diagnostics;

    ResolvedTopology topo;
    topo.duration_ns = ast.simulator.duration_ns;
    topo.step_ns = ast.simulator.step_ns;
    if (topo.step_ns <= 0 || topo.duration_ns <= 0) {
        diags.push_back(error_at(ast.simulator.loc, "duration and step must be strictly positive"));
        return result;
    }
    if (topo.step_ns > topo.duration_ns) {
        diags.push_back(error_at(ast.simulator.loc, "step exceeds duration (no steps would run)"));
        return result;
    }
    topo.step_count = topo.duration_ns / topo.step_ns; // floor; a partial step is dropped
    topo.clouds = ast.clouds;

    auto clouds = index_by_name(ast.clouds);
    auto devices = index_by_name(ast.devices);
    auto edges = index_by_name(ast.edge_devices);
    auto platforms = index_by_name(ast.platforms);
    auto sim_nodes = index_by_name(ast.simulation_nodes);

    std::unordered_map<std::string, int> cloud_index;
    for (size_t i = 0; i < ast.clouds.size(); i++)
        cloud_index.emplace(ast.clouds[i].name, static_cast<int>(i));

    auto expand_edge = [&](const EdgeDeviceSpec& spec, uint16_t edge_id,
                           std::optional<EdgeInstance>& out) {
        EdgeInstance edge;
        edge.edge_id = edge_id;
        edge.protocol = spec.protocol;
        edge.speed = spec.speed;
        edge.workload_ns = spec.workload_ns;
        edge.spec_name = spec.name;
        edge.spec_loc = spec.loc;
        auto ci = cloud_index.find(spec.cloud);
        if (ci == cloud_index.end()) {
            diags.push_back(error_at(spec.cloud_loc,
                                     "unknown Cloud '" + spec.cloud + "' referenced by EdgeDevice '" +
                                         spec.name + "'"));
            return;
        }
        edge.cloud_index = ci->second;
        int64_t device_id = 0;
        for (const auto& ref : spec.devices) {
            auto it = devices.find(ref.name);
            if (it == devices.end()) {
                diags.push_back(error_at(ref.loc, "unknown Device '" + ref.name +
                                                      "' referenced by EdgeDevice '" + spec.name + "'"));
                return;
            }
            for (int64_t k = 0; k < ref.count; k++) {
                if (device_id >= kMaxInstancesPerTier) {
                    diags.push_back(error_at(ref.loc,
                                             "EdgeDevice '" + spec.name + "' expands to more than " +
                                                 std::to_string(kMaxInstancesPerTier) + " devices"));
                    return;
                }
                DeviceInstance dev;
                dev.device_id = static_cast<uint16_t>(device_id++);
                dev.period_steps = it->second->period_steps;
                dev.payload = it->second->payload;
                dev.spec_name = it->second->name;
                edge.devices.push_back(std::move(dev));
            }
        }
        out = std::move(edge);
    };

    int64_t node_id = 0;
    for (const auto& node_ref : ast.simulator.simulation_nodes) {
        auto sn = sim_nodes.find(node_ref.name);
        if (sn == sim_nodes.end()) {
            diags.push_back(error_at(node_ref.loc,
                                     "unknown SimulationNode '" + node_ref.name + "' in Simulator"));
            continue;
        }
        const SimNodeSpec& node_spec = *sn->second;
        const PlatformSpec* platform = nullptr;
        if (auto p = platforms.find(node_spec.platform); p != platforms.end()) {
            platform = p->second;
        } else {
            diags.push_back(error_at(node_spec.platform_loc,
                                     "unknown Platform '" + node_spec.platform +
                                         "' referenced by SimulationNode '" + node_spec.name + "'"));
            continue;
        }
        for (int64_t k = 0; k < node_ref.count; k++) {
            if (node_id >= kMaxInstancesPerTier) {
                diags.push_back(error_at(node_ref.loc,
                                         "Simulator expands to more than " +
                                             std::to_string(kMaxInstancesPerTier) + " nodes"));
                return result;
            }
            NodeInstance node;
            node.node_id = static_cast<uint16_t>(node_id++);
            node.platform = *platform;
            node.spec_name = node_spec.name;
            int64_t edge_id = 0;
            for (const auto& edge_ref : node_spec.edge_devices) {
                auto es = edges.find(edge_ref.name);
                if (es == edges.end()) {
                    diags.push_back(error_at(edge_ref.loc,
                                             "unknown EdgeDevice '" + edge_ref.name +
                                                 "' referenced by SimulationNode '" + node_spec.name +
                                                 "'"));
                    edge_id = -1;
                    break;
                }
                for (int64_t j = 0; j < edge_ref.count; j++) {
                    if (edge_id >= kMaxInstancesPerTier) {
                        diags.push_back(error_at(edge_ref.loc,
                                                 "SimulationNode '" + node_spec.name +
                                                     "' expands to more than " +
                                                     std::to_string(kMaxInstancesPerTier) +
                                                     " edge devices"));
                        return result;
                    }
                    std::optional<EdgeInstance> edge;
                    expand_edge(*es->second, static_cast<uint16_t>(edge_id), edge);
                    if (!edge) { edge_id = -1; break; }
                    edge_id++;
                    node.edges.push_back(std::move(*edge));
                }
                if (edge_id < 0) break;
            }
            if (edge_id < 0) break;
            topo.nodes.push_back(std::move(node));
        }
    }

    if (!has_errors(diags)) result.topology = std::move(topo);
    return result;
}

std::vector<Diagnostic> validate(const ResolvedTopology& topo) {
    std::vector<Diagnostic> diags;

    // Cloud port collisions (same IP, same port).
    std::set<std::pair<std::string, int>> endpoints;
    for (const auto& c : topo.clouds) {
        if (!endpoints.insert({c.ip, c.port}).second)
            diags.push_back(error_at(c.loc, "Cloud '" + c.name + "' reuses endpoint " + c.ip + ":" +
                                                std::to_string(c.port)));
    }

    // Per-edge checks. Distinct edge specs repeat across instances; warn once
    // per spec name.
    std::set<std::string> reported_speed;
    std::set<std::string> reported_mqtt;
    std::set<std::string> reported_payload;
    for (const auto& node : topo.nodes) {
        for (const auto& edge : node.edges) {
            // Worst-case per-step demand: every device fires at step 0, so the
            // maximum over steps is the device count.
            int64_t worst_demand = static_cast<int64_t>(edge.devices.size());
            if (!edge.speed.is_max && worst_demand > edge.speed.packets_per_step &&
                reported_speed.insert(edge.spec_name).second) {
                std::ostringstream msg;
                msg << "EdgeDevice '" << edge.spec_name << "' speed "
                    << edge.speed.packets_per_step << " is below the worst-case per-step demand of "
                    << worst_demand << " packets; the step budget will be exceeded (SimDrop)";
                diags.push_back(warning_at(edge.spec_loc, msg.str()));
            }
            if (edge.protocol == Protocol::Mqtt && reported_mqtt.insert(edge.spec_name).second) {
                diags.push_back(warning_at(edge.spec_loc,
                                           "EdgeDevice '" + edge.spec_name +
                                               "' uses MQTT, which is parsed but not supported by "
                                               "the runtime; `run` will refuse this spec"));
            }
            for (const auto& dev : edge.devices) {
                int64_t bytes = dev.payload.byte_count();
                int64_t limit = edge.protocol == Protocol::Udp
                                    ? static_cast<int64_t>(kMaxUdpPacket - kHeaderSize)
                                    : 65535;
                if (bytes > limit && reported_payload.insert(edge.spec_name + "/" + dev.spec_name)
                                         .second) {
                    std::ostringstream msg;
                    msg << "Device '" << dev.spec_name << "' payload of " << bytes
                        << " bytes exceeds the " << limit << "-byte limit for "
                        << to_string(edge.protocol);
                    diags.push_back(error_at(dev.payload.loc, msg.str()));
                }
            }
        }
    }

    // Platform completeness.
    std::set<std::string> reported_platform;
    for (const auto& node : topo.nodes) {
        const PlatformSpec& p = node.platform;
        if (!reported_platform.insert(p.name).second) continue;
        if (p.kind == PlatformKind::Vm && (!p.cpu || !p.memory))
            diags.push_back(error_at(p.loc, "VM platform '" + p.name + "' requires CPU and memory"));
        if (p.kind == PlatformKind::Docker && p.is_constrained() && (!p.cpu || !p.memory))
            diags.push_back(error_at(p.loc, "constrained Docker platform '" + p.name +
                                                "' requires both CPU and memory"));
        if (p.is_remote() && (!p.username || !p.password))
            diags.push_back(error_at(p.loc, "remote platform '" + p.name +
                                                "' (IP set) requires username and password"));
    }

    return diags;
}

int64_t recommend_step_ns(const std::vector<int64_t>& intervals_ns) {
    if (intervals_ns.empty())
        throw std::invalid_argument("recommend_step_ns: empty interval list");
    int64_t g = 0;
    for (int64_t v : intervals_ns) {
        if (v <= 0) throw std::invalid_argument("recommend_step_ns: intervals must be positive");
        g = std::gcd(g, v);
    }
    return g;
}

std::map<EdgeKey, uint64_t> expected_sends(const ResolvedTopology& topo) {
    std::map<EdgeKey, uint64_t> out;
    for (const auto& node : topo.nodes) {
        for (const auto& edge : node.edges) {
            uint64_t total = 0;
            for (const auto& dev : edge.devices) {
                // |{ i in [0, stepCount) : i mod period == 0 }| = ceil(stepCount/period)
                total += static_cast<uint64_t>((topo.step_count + dev.period_steps - 1) /
                                               dev.period_steps);
            }
            out[{node.node_id, edge.edge_id}] = total;
        }
    }
    return out;
}

nlohmann::json expected_sends_json(const ResolvedTopology& topo) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, count] : expected_sends(topo))
        j[std::to_string(key.node_id) + "/" + std::to_string(key.edge_id)] = count;
    return j;
}

namespace {

std::string bytes_to_hex(const std::vector<uint8_t>& bytes) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

std::vector<uint8_t> hex_to_bytes(const std::string& hex) {
    if (hex.size() % 2 != 0) throw std::runtime_error("odd-length hex payload");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::runtime_error("invalid hex digit in payload");
    };
    std::vector<uint8_t> out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); i++)
        out[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

nlohmann::json payload_to_json(const PayloadSpec& p) {
    nlohmann::json j;
    if (p.is_literal) j["literal_hex"] = bytes_to_hex(p.literal);
    else j["size_bytes"] = p.size_bytes;
    return j;
}

PayloadSpec payload_from_json(const nlohmann::json& j) {
    PayloadSpec p;
    if (j.contains("literal_hex")) {
        p.is_literal = true;
        p.literal = hex_to_bytes(j.at("literal_hex").get<std::string>());
    } else {
        p.is_literal = false;
        p.size_bytes = j.at("size_bytes").get<int64_t>();
    }
    return p;
}

nlohmann::json platform_to_json(const PlatformSpec& p) {
    nlohmann::json j;
    j["name"] = p.name;
    j["type"] = to_string(p.kind);
    if (p.ip) j["ip"] = *p.ip;
    if (p.username) j["username"] = *p.username;
    if (p.password) j["password"] = *p.password;
    if (p.cpu) j["cpu"] = *p.cpu;
    if (p.memory) j["memory"] = p.memory->to_text();
    return j;
}

PlatformSpec platform_from_json(const nlohmann::json& j) {
    PlatformSpec p;
    p.name = j.at("name").get<std::string>();
    std::string kind = j.at("type").get<std::string>();
    if (kind == "Native") p.kind = PlatformKind::Native;
    else if (kind == "VM") p.kind = PlatformKind::Vm;
    else if (kind == "Docker") p.kind = PlatformKind::Docker;
    else throw std::runtime_error("unknown platform type: " + kind);
    if (j.contains("ip")) p.ip = j.at("ip").get<std::string>();
    if (j.contains("username")) p.username = j.at("username").get<std::string>();
    if (j.contains("password")) p.password = j.at("password").get<std::string>();
    if (j.contains("cpu")) p.cpu = j.at("cpu").get<int64_t>();
    if (j.contains("memory")) {
        std::string m = j.at("memory").get<std::string>();
        MemorySize mem;
        size_t i = 0;
        while (i < m.size() && std::isdigit(static_cast<unsigned char>(m[i]))) i++;
        mem.magnitude = std::stoll(m.substr(0, i));
        mem.unit = m.substr(i);
        p.memory = mem;
    }
    return p;
}

Protocol protocol_from_json(const std::string& s) {
    if (s == "UDP") return Protocol::Udp;
    if (s == "TCP") return Protocol::Tcp;
    if (s == "MQTT") return Protocol::Mqtt;
    throw std::runtime_error("unknown protocol: " + s);
}

} // namespace

nlohmann::json topology_to_json(const ResolvedTopology& topo) {
    nlohmann::json j;
    j["duration_ns"] = topo.duration_ns;
    j["step_ns"] = topo.step_ns;
    j["step_count"] = topo.step_count;
    j["clouds"] = nlohmann::json::array();
    for (const auto& c : topo.clouds)
        j["clouds"].push_back({{"name", c.name}, {"ip", c.ip}, {"port", c.port}});
    j["nodes"] = nlohmann::json::array();
    for (const auto& node : topo.nodes) {
        nlohmann::json jn;
        jn["node_id"] = node.node_id;
        jn["spec_name"] = node.spec_name;
        jn["platform"] = platform_to_json(node.platform);
        jn["edges"] = nlohmann::json::array();
        for (const auto& edge : node.edges) {
            nlohmann::json je;
            je["edge_id"] = edge.edge_id;
            je["spec_name"] = edge.spec_name;
            je["protocol"] = to_string(edge.protocol);
            if (edge.speed.is_max) je["speed"] = "MAX";
            else je["speed"] = edge.speed.packets_per_step;
            je["workload_ns"] = edge.workload_ns;
            je["cloud_index"] = edge.cloud_index;
            je["devices"] = nlohmann::json::array();
            for (const auto& dev : edge.devices) {
                nlohmann::json jd;
                jd["device_id"] = dev.device_id;
                jd["spec_name"] = dev.spec_name;
                jd["period_steps"] = dev.period_steps;
                jd["payload"] = payload_to_json(dev.payload);
                je["devices"].push_back(std::move(jd));
            }
            jn["edges"].push_back(std::move(je));
        }
        j["nodes"].push_back(std::move(jn));
    }
    return j;
}

ResolvedTopology topology_from_json(const nlohmann::json& j) {
    ResolvedTopology topo;
    topo.duration_ns = j.at("duration_ns").get<int64_t>();
    topo.step_ns = j.at("step_ns").get<int64_t>();
    topo.step_count = j.at("step_count").get<int64_t>();
    for (const auto& jc : j.at("clouds")) {
        CloudSpec c;
        c.name = jc.at("name").get<std::string>();
        c.ip = jc.at("ip").get<std::string>();
        c.port = jc.at("port").get<int>();
        topo.clouds.push_back(std::move(c));
    }
    for (const auto& jn : j.at("nodes")) {
        NodeInstance node;
        node.node_id = jn.at("node_id").get<uint16_t>();
        node.spec_name = jn.value("spec_name", "");
        node.platform = platform_from_json(jn.at("platform"));
        for (const auto& je : jn.at("edges")) {
            EdgeInstance edge;
            edge.edge_id = je.at("edge_id").get<uint16_t>();
            edge.spec_name = je.value("spec_name", "");
            edge.protocol = protocol_from_json(je.at("protocol").get<std::string>());
            if (je.at("speed").is_string()) {
                edge.speed = Speed{0, true};
            } else {
                edge.speed = Speed{je.at("speed").get<int64_t>(), false};
            }
            edge.workload_ns = je.at("workload_ns").get<int64_t>();
            edge.cloud_index = je.at("cloud_index").get<int>();
            if (edge.cloud_index < 0 || edge.cloud_index >= static_cast<int>(topo.clouds.size()))
                throw std::runtime_error("cloud_index out of range");
            for (const auto& jd : je.at("devices")) {
                DeviceInstance dev;
                dev.device_id = jd.at("device_id").get<uint16_t>();
                dev.spec_name = jd.value("spec_name", "");
                dev.period_steps = jd.at("period_steps").get<int64_t>();
                if (dev.period_steps < 1) throw std::runtime_error("period_steps must be >= 1");
                dev.payload = payload_from_json(jd.at("payload"));
                edge.devices.push_back(std::move(dev));
            }
            node.edges.push_back(std::move(edge));
        }
        topo.nodes.push_back(std::move(node));
    }
    return topo;
}

uint64_t topology_digest(const ResolvedTopology& topo) {
    std::string dump = topology_to_json(topo).dump();
    uint64_t h = 1469598103934665603ull; // FNV offset basis
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull; // FNV prime
    }
    return h;
}

std::string topology_digest_hex(const ResolvedTopology& topo) {
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(topology_digest(topo)));
    return std::string(buf);
}

} // namespace iotecs
