#include "iotecs/printer.hpp"

#include "iotecs/units.hpp"

#include <cctype>
#include <sstream>

namespace iotecs {

namespace {

bool is_plain_ident(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

void print_string_literal(std::ostream& os, const std::vector<uint8_t>& bytes) {
    os << '"';
    for (uint8_t b : bytes) {
        switch (b) {
        case '"': os << "\\\""; break;
        case '\\': os << "\\\\"; break;
        case '\n': os << "\\n"; break;
        case '\t': os << "\\t"; break;
        case '\r': os << "\\r"; break;
        case '\0': os << "\\0"; break;
        default:
            if (b < 0x20 || b >= 0x7f) {
                static const char* hex = "0123456789abcdef";
                os << "\\x" << hex[b >> 4] << hex[b & 0xf];
            } else {
                os << static_cast<char>(b);
            }
        }
    }
    os << '"';
}

void print_text_value(std::ostream& os, const std::string& s) {
    if (is_plain_ident(s)) {
        os << s;
    } else {
        print_string_literal(os, std::vector<uint8_t>(s.begin(), s.end()));
    }
}

void print_counted_list(std::ostream& os, const std::vector<CountedRef>& refs) {
    os << '{';
    for (size_t i = 0; i < refs.size(); i++) {
        if (i) os << ',';
        os << refs[i].name << '[' << refs[i].count << ']';
    }
    os << '}';
}

} // namespace

std::string format_payload_size(int64_t bytes) {
    if (bytes % (1000 * 1000) == 0) return std::to_string(bytes / (1000 * 1000)) + "MB";
    if (bytes % 1000 == 0) return std::to_string(bytes / 1000) + "kB";
    return std::to_string(bytes) + "B";
}

std::string pretty_print(const SpecAst& ast) {
    std::ostringstream os;

    for (const auto& c : ast.clouds) {
        os << "Cloud: " << c.name << " {\n";
        os << "    IP: " << c.ip << "\n";
        os << "    port: " << c.port << "\n";
        os << "}\n";
    }
    for (const auto& d : ast.devices) {
        os << "Device: " << d.name << " {\n";
        os << "    period: " << d.period_steps << "\n";
        os << "    payload: ";
        if (d.payload.is_literal) print_string_literal(os, d.payload.literal);
        else os << format_payload_size(d.payload.size_bytes);
        os << "\n}\n";
    }
    for (const auto& e : ast.edge_devices) {
        os << "EdgeDevice: " << e.name << " {\n";
        os << "    protocol: " << to_string(e.protocol) << "\n";
        os << "    speed: ";
        if (e.speed.is_max) os << "MAX";
        else os << e.speed.packets_per_step;
        os << "\n";
        os << "    cloud: " << e.cloud << "\n";
        os << "    devices: ";
        print_counted_list(os, e.devices);
        os << "\n";
        if (e.workload_ns != 0) os << "    workload: " << format_duration_ns(e.workload_ns) << "\n";
        os << "}\n";
    }
    for (const auto& p : ast.platforms) {
        os << "Platform: " << p.name << " {\n";
        os << "    type: " << to_string(p.kind) << "\n";
        if (p.ip) os << "    IP: " << *p.ip << "\n";
        if (p.username) {
            os << "    username: ";
            print_text_value(os, *p.username);
            os << "\n";
        }
        if (p.password) {
            os << "    password: ";
            print_text_value(os, *p.password);
            os << "\n";
        }
        if (p.cpu) os << "    CPU: " << *p.cpu << "\n";
        if (p.memory) os << "    memory: " << p.memory->to_text() << "\n";
        os << "}\n";
    }
    for (const auto& sn : ast.simulation_nodes) {
        os << "SimulationNode: " << sn.name << " {\n";
        os << "    platform: " << sn.platform << "\n";
        os << "    EdgeDevices: ";
        print_counted_list(os, sn.edge_devices);
        os << "\n}\n";
    }
    os << "Simulator: {\n";
    os << "    duration: " << format_duration_ns(ast.simulator.duration_ns) << "\n";
    os << "    step: " << format_duration_ns(ast.simulator.step_ns) << "\n";
    os << "    simulationNodes: ";
    print_counted_list(os, ast.simulator.simulation_nodes);
    os << "\n}\n";

    return os.str();
}

} // namespace iotecs
