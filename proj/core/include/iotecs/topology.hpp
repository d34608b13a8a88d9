// Expansion of a parsed spec into numbered instances, static validation
// beyond syntax, the recommended-step query and the expected-sends oracle.
#pragma once

#include "iotecs/ast.hpp"
#include "iotecs/diagnostics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotecs {

struct DeviceInstance {
    uint16_t device_id = 0;
    int64_t period_steps = 1;
    PayloadSpec payload;
    std::string spec_name;
};

struct EdgeInstance {
    uint16_t edge_id = 0;
    Protocol protocol = Protocol::Udp;
    Speed speed;
    int64_t workload_ns = 0;
    int cloud_index = 0; // into ResolvedTopology::clouds
    std::vector<DeviceInstance> devices;
    std::string spec_name;
    SourceLoc spec_loc;
};

struct NodeInstance {
    uint16_t node_id = 0;
    PlatformSpec platform;
    std::vector<EdgeInstance> edges;
    std::string spec_name;
};

struct ResolvedTopology {
    int64_t duration_ns = 0;
    int64_t step_ns = 0;
    int64_t step_count = 0; // floor(duration / step)
    std::vector<NodeInstance> nodes;
    std::vector<CloudSpec> clouds;

    size_t edge_count() const;
    size_t device_count() const;
};

struct ResolveResult {
    std::optional<ResolvedTopology> topology;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return topology.has_value(); }
};

// Expands every Type[k] reference into k numbered instances. IDs are dense
// from 0 in document order; at most 65535 instances per tier.
ResolveResult resolve(const SpecAst& ast);

// Static checks on a resolved topology:
//   - warning when a finite speed cannot drain the worst-case per-step demand
//   - warning for MQTT edges (parsed, rejected by `run`)
//   - errors for cloud port collisions, incomplete platform specs and
//     payloads exceeding the wire format's limits
std::vector<Diagnostic> validate(const ResolvedTopology& topo);

// GCD of the intervals, in nanoseconds. Throws std::invalid_argument on an
// empty list or non-positive entries.
int64_t recommend_step_ns(const std::vector<int64_t>& intervals_ns);

struct EdgeKey {
    uint16_t node_id = 0;
    uint16_t edge_id = 0;
    auto operator<=>(const EdgeKey&) const = default;
};

// Per-edge scheduled send counts: sum over devices of ceil(stepCount/period).
// Ground truth for SimDrop accounting.
std::map<EdgeKey, uint64_t> expected_sends(const ResolvedTopology& topo);

// {"node/edge": count, ...}
nlohmann::json expected_sends_json(const ResolvedTopology& topo);

nlohmann::json topology_to_json(const ResolvedTopology& topo);
ResolvedTopology topology_from_json(const nlohmann::json& j); // throws on malformed input

// FNV-1a over the canonical JSON encoding; stable across processes.
uint64_t topology_digest(const ResolvedTopology& topo);
std::string topology_digest_hex(const ResolvedTopology& topo);

} // namespace iotecs
