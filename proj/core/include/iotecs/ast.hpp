// Parsed form of a .iotecs document. Structural equality ignores source
// locations so that pretty-print round-trips compare clean.
#pragma once

#include "iotecs/diagnostics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iotecs {

enum class Protocol { Udp, Tcp, Mqtt };
enum class PlatformKind { Native, Vm, Docker };

const char* to_string(Protocol p);
const char* to_string(PlatformKind k);

struct CloudSpec {
    std::string name;
    std::string ip;   // dotted quad
    int port = 0;     // 1..65535
    SourceLoc loc;

    friend bool operator==(const CloudSpec& a, const CloudSpec& b) {
        return a.name == b.name && a.ip == b.ip && a.port == b.port;
    }
};

// Either exact literal bytes or a size whose content is generated at run time.
struct PayloadSpec {
    bool is_literal = false;
    std::vector<uint8_t> literal;
    int64_t size_bytes = 0;
    SourceLoc loc;

    int64_t byte_count() const {
        return is_literal ? static_cast<int64_t>(literal.size()) : size_bytes;
    }
    friend bool operator==(const PayloadSpec& a, const PayloadSpec& b) {
        if (a.is_literal != b.is_literal) return false;
        return a.is_literal ? a.literal == b.literal : a.size_bytes == b.size_bytes;
    }
};

struct DeviceSpec {
    std::string name;
    int64_t period_steps = 1;
    PayloadSpec payload;
    SourceLoc loc;

    friend bool operator==(const DeviceSpec& a, const DeviceSpec& b) {
        return a.name == b.name && a.period_steps == b.period_steps && a.payload == b.payload;
    }
};

// Packets per simulation step; MAX = unpaced.
struct Speed {
    int64_t packets_per_step = 0;
    bool is_max = false;

    friend bool operator==(const Speed& a, const Speed& b) {
        return a.is_max == b.is_max && (a.is_max || a.packets_per_step == b.packets_per_step);
    }
};

// "E1[7]" — a named reference with an instance count.
struct CountedRef {
    std::string name;
    int64_t count = 1;
    SourceLoc loc;

    friend bool operator==(const CountedRef& a, const CountedRef& b) {
        return a.name == b.name && a.count == b.count;
    }
};

struct EdgeDeviceSpec {
    std::string name;
    Protocol protocol = Protocol::Udp;
    Speed speed;
    std::string cloud;
    SourceLoc cloud_loc;
    std::vector<CountedRef> devices;
    int64_t workload_ns = 0; // default 0 when the field is omitted
    SourceLoc loc;

    friend bool operator==(const EdgeDeviceSpec& a, const EdgeDeviceSpec& b) {
        return a.name == b.name && a.protocol == b.protocol && a.speed == b.speed &&
               a.cloud == b.cloud && a.devices == b.devices && a.workload_ns == b.workload_ns;
    }
};

// Kept as written ("2G"), not converted; consumed by deploy descriptors.
struct MemorySize {
    int64_t magnitude = 0;
    std::string unit; // K, M or G

    std::string to_text() const { return std::to_string(magnitude) + unit; }
    friend bool operator==(const MemorySize& a, const MemorySize& b) {
        return a.magnitude == b.magnitude && a.unit == b.unit;
    }
};

struct PlatformSpec {
    std::string name;
    PlatformKind kind = PlatformKind::Native;
    std::optional<std::string> ip;
    std::optional<std::string> username;
    std::optional<std::string> password; // stored verbatim; see README on secrets
    std::optional<int64_t> cpu;
    std::optional<MemorySize> memory;
    SourceLoc loc;

    bool is_remote() const { return ip.has_value(); }
    bool is_constrained() const { return cpu.has_value() || memory.has_value(); }
    friend bool operator==(const PlatformSpec& a, const PlatformSpec& b) {
        return a.name == b.name && a.kind == b.kind && a.ip == b.ip &&
               a.username == b.username && a.password == b.password && a.cpu == b.cpu &&
               a.memory == b.memory;
    }
};

struct SimNodeSpec {
    std::string name;
    std::string platform;
    SourceLoc platform_loc;
    std::vector<CountedRef> edge_devices;
    SourceLoc loc;

    friend bool operator==(const SimNodeSpec& a, const SimNodeSpec& b) {
        return a.name == b.name && a.platform == b.platform && a.edge_devices == b.edge_devices;
    }
};

struct SimulatorSpec {
    int64_t duration_ns = 0;
    int64_t step_ns = 0;
    std::vector<CountedRef> simulation_nodes;
    SourceLoc loc;

    friend bool operator==(const SimulatorSpec& a, const SimulatorSpec& b) {
        return a.duration_ns == b.duration_ns && a.step_ns == b.step_ns &&
               a.simulation_nodes == b.simulation_nodes;
    }
};

struct SpecAst {
    std::vector<CloudSpec> clouds;
    std::vector<DeviceSpec> devices;
    std::vector<EdgeDeviceSpec> edge_devices;
    std::vector<PlatformSpec> platforms;
    std::vector<SimNodeSpec> simulation_nodes;
    SimulatorSpec simulator;

    friend bool operator==(const SpecAst& a, const SpecAst& b) {
        return a.clouds == b.clouds && a.devices == b.devices &&
               a.edge_devices == b.edge_devices && a.platforms == b.platforms &&
               a.simulation_nodes == b.simulation_nodes && a.simulator == b.simulator;
    }
};

} // namespace iotecs
