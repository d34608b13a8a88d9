#include "iotecs/parser.hpp"

#include "iotecs/lexer.hpp"
#include "iotecs/units.hpp"

#include <set>
#include <unordered_set>

namespace iotecs {

const char* to_string(Protocol p) {
    switch (p) {
    case Protocol::Udp: return "UDP";
    case Protocol::Tcp: return "TCP";
    case Protocol::Mqtt: return "MQTT";
    }
    return "?";
}

const char* to_string(PlatformKind k) {
    switch (k) {
    case PlatformKind::Native: return "Native";
    case PlatformKind::Vm: return "VM";
    case PlatformKind::Docker: return "Docker";
    }
    return "?";
}

namespace {

const std::unordered_set<std::string> kBlockKeywords = {
    "Cloud", "Device", "EdgeDevice", "Platform", "SimulationNode", "Simulator",
};

class Parser {
public:
    explicit Parser(std::string_view source)
        : tokens_(Lexer::tokenize(source)) {}

    ParseResult run() {
        while (!at(TokKind::End)) parse_block();
        finish();
        ParseResult result;
        result.diagnostics = std::move(diags_);
        if (!has_errors(result.diagnostics)) result.ast = std::move(ast_);
        return result;
    }

private:
    // --- token plumbing -------------------------------------------------

    const Token& cur() const { return tokens_[pos_]; }
    const Token& ahead(size_t n = 1) const {
        size_t i = pos_ + n;
        return tokens_[i < tokens_.size() ? i : tokens_.size() - 1];
    }
    bool at(TokKind k) const { return cur().kind == k; }
    Token take() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    bool accept(TokKind k) {
        if (!at(k)) return false;
        take();
        return true;
    }

    std::optional<Token> expect(TokKind k, const std::string& what) {
        if (at(k)) return take();
        error_here("expected " + what + describe_current());
        return std::nullopt;
    }

    std::string describe_current() const {
        const Token& t = cur();
        switch (t.kind) {
        case TokKind::End: return " but reached end of input";
        case TokKind::Invalid: return " (" + t.text + ")";
        case TokKind::String: return " but found string literal";
        default: return " but found '" + t.text + "'";
        }
    }

    void error_here(std::string msg) { diags_.push_back(error_at(cur().loc, std::move(msg))); }
    void error_loc(SourceLoc loc, std::string msg) { diags_.push_back(error_at(loc, std::move(msg))); }

    // Skips to the next top-level block keyword, consuming balanced braces.
    void recover_to_block() {
        int depth = 0;
        while (!at(TokKind::End)) {
            if (at(TokKind::LBrace)) depth++;
            if (at(TokKind::RBrace)) {
                if (depth == 0) { take(); return; }
                depth--;
            }
            if (depth == 0 && at(TokKind::Ident) && kBlockKeywords.count(cur().text)) return;
            take();
        }
    }

    // Skips a field value during recovery (single token or balanced braces).
    void skip_value() {
        if (at(TokKind::LBrace)) {
            int depth = 0;
            while (!at(TokKind::End)) {
                if (at(TokKind::LBrace)) depth++;
                if (at(TokKind::RBrace) && --depth == 0) { take(); return; }
                take();
            }
            return;
        }
        if (!at(TokKind::RBrace) && !at(TokKind::End)) take();
    }

    // --- value parsers ---------------------------------------------------

    std::optional<int64_t> parse_int_value(const std::string& field) {
        if (at(TokKind::Int)) return take().int_value;
        error_here("expected integer for '" + field + "'" + describe_current());
        skip_value();
        return std::nullopt;
    }

    std::optional<std::string> parse_ip_value() {
        SourceLoc loc = cur().loc;
        int octets[4];
        for (int i = 0; i < 4; i++) {
            if (!at(TokKind::Int)) {
                error_here("expected IPv4 dotted-quad address");
                skip_value();
                return std::nullopt;
            }
            Token t = take();
            if (t.int_value < 0 || t.int_value > 255) {
                error_loc(t.loc, "IPv4 octet out of range 0-255");
                return std::nullopt;
            }
            octets[i] = static_cast<int>(t.int_value);
            if (i < 3 && !accept(TokKind::Dot)) {
                error_here("expected '.' in IPv4 address");
                return std::nullopt;
            }
        }
        (void)loc;
        return std::to_string(octets[0]) + "." + std::to_string(octets[1]) + "." +
               std::to_string(octets[2]) + "." + std::to_string(octets[3]);
    }

    std::optional<int64_t> parse_duration_value(const std::string& field) {
        if (!at(TokKind::Scaled)) {
            error_here("expected duration with unit (ms, s, m or h) for '" + field + "'" +
                       describe_current());
            skip_value();
            return std::nullopt;
        }
        Token t = take();
        std::string err;
        auto ns = parse_duration_ns(t.text, &err);
        if (!ns) error_loc(t.loc, err);
        return ns;
    }

    // workload accepts the bare literal 0 in addition to a unit form.
    std::optional<int64_t> parse_workload_value() {
        if (at(TokKind::Int) && cur().int_value == 0) {
            take();
            return 0;
        }
        return parse_duration_value("workload");
    }

    std::optional<PayloadSpec> parse_payload_value() {
        PayloadSpec payload;
        payload.loc = cur().loc;
        if (at(TokKind::String)) {
            Token t = take();
            payload.is_literal = true;
            payload.literal = std::move(t.bytes);
            return payload;
        }
        if (at(TokKind::Scaled)) {
            Token t = take();
            std::string err;
            auto bytes = parse_payload_size_bytes(t.text, &err);
            if (!bytes) {
                error_loc(t.loc, err);
                return std::nullopt;
            }
            payload.is_literal = false;
            payload.size_bytes = *bytes;
            return payload;
        }
        error_here("expected payload size (e.g. 60B) or string literal" + describe_current());
        skip_value();
        return std::nullopt;
    }

    std::optional<Speed> parse_speed_value() {
        if (at(TokKind::Ident) && cur().text == "MAX") {
            take();
            return Speed{0, true};
        }
        if (at(TokKind::Int)) {
            Token t = take();
            if (t.int_value < 1) {
                error_loc(t.loc, "speed must be at least 1 packet per step (or MAX)");
                return std::nullopt;
            }
            return Speed{t.int_value, false};
        }
        error_here("expected packets-per-step integer or MAX for 'speed'" + describe_current());
        skip_value();
        return std::nullopt;
    }

    std::optional<MemorySize> parse_memory_value() {
        if (!at(TokKind::Scaled)) {
            error_here("expected memory size with unit K, M or G (e.g. 2G)" + describe_current());
            skip_value();
            return std::nullopt;
        }
        Token t = take();
        if (t.suffix != "K" && t.suffix != "M" && t.suffix != "G") {
            error_loc(t.loc, "unknown memory unit '" + t.suffix + "' (expected K, M or G)");
            return std::nullopt;
        }
        if (t.int_value < 1) {
            error_loc(t.loc, "memory size must be positive");
            return std::nullopt;
        }
        return MemorySize{t.int_value, t.suffix};
    }

    // Bare identifier or quoted string.
    std::optional<std::string> parse_text_value(const std::string& field) {
        if (at(TokKind::Ident)) return take().text;
        if (at(TokKind::String)) {
            Token t = take();
            return std::string(t.bytes.begin(), t.bytes.end());
        }
        error_here("expected identifier or string for '" + field + "'" + describe_current());
        skip_value();
        return std::nullopt;
    }

    std::optional<std::string> parse_ref_value(const std::string& field, SourceLoc* out_loc) {
        if (!at(TokKind::Ident)) {
            error_here("expected a name reference for '" + field + "'" + describe_current());
            skip_value();
            return std::nullopt;
        }
        Token t = take();
        if (out_loc) *out_loc = t.loc;
        return t.text;
    }

    // {Name[count], Name[count], ...}
    std::optional<std::vector<CountedRef>> parse_counted_list(const std::string& field) {
        if (!expect(TokKind::LBrace, "'{' to open the " + field + " list")) {
            skip_value();
            return std::nullopt;
        }
        std::vector<CountedRef> refs;
        bool bad = false;
        for (;;) {
            if (accept(TokKind::RBrace)) break;
            auto name = expect(TokKind::Ident, "a name in the " + field + " list");
            if (!name) { recover_list(); bad = true; break; }
            CountedRef ref;
            ref.name = name->text;
            ref.loc = name->loc;
            if (!expect(TokKind::LBracket, "'[' with an instance count after '" + ref.name + "'")) {
                recover_list();
                bad = true;
                break;
            }
            auto count = expect(TokKind::Int, "an instance count");
            if (!count) { recover_list(); bad = true; break; }
            if (count->int_value < 1) {
                error_loc(count->loc, "instance count must be at least 1");
                bad = true;
            }
            ref.count = count->int_value;
            if (!expect(TokKind::RBracket, "']'")) { recover_list(); bad = true; break; }
            refs.push_back(std::move(ref));
            if (accept(TokKind::Comma)) continue;
            if (accept(TokKind::RBrace)) break;
            error_here("expected ',' or '}' in the " + field + " list" + describe_current());
            recover_list();
            bad = true;
            break;
        }
        if (bad) return std::nullopt;
        if (refs.empty()) {
            error_here("the " + field + " list must not be empty");
            return std::nullopt;
        }
        return refs;
    }

    void recover_list() {
        while (!at(TokKind::End) && !at(TokKind::RBrace)) take();
        accept(TokKind::RBrace);
    }

    // --- field loop -------------------------------------------------------

    // Calls handle(field_name, loc) for every "name: value" pair in a block.
    // handle returns false when it did not consume the value (unknown field).
    template <typename Handler>
    void parse_fields(const std::string& block, Handler&& handle) {
        std::set<std::string> seen;
        while (!accept(TokKind::RBrace)) {
            if (at(TokKind::End)) {
                error_here("unterminated " + block + " block (missing '}')");
                return;
            }
            auto field = expect(TokKind::Ident, "a field name");
            if (!field) { recover_to_block(); return; }
            if (!expect(TokKind::Colon, "':' after field '" + field->text + "'")) {
                recover_to_block();
                return;
            }
            if (!seen.insert(field->text).second) {
                error_loc(field->loc,
                          "duplicate field '" + field->text + "' in " + block + " block");
                skip_value();
                continue;
            }
            if (!handle(field->text, field->loc)) {
                error_loc(field->loc, "unknown field '" + field->text + "' in " + block + " block");
                skip_value();
            }
        }
    }

    template <typename T>
    void require_field(const std::optional<T>& value, SourceLoc block_loc,
                       const std::string& block, const std::string& field) {
        if (!value) error_loc(block_loc, block + " block is missing required field '" + field + "'");
    }

    // --- blocks -----------------------------------------------------------

    void parse_block() {
        if (!at(TokKind::Ident)) {
            error_here("expected a block keyword (Cloud, Device, EdgeDevice, Platform, "
                       "SimulationNode or Simulator)" +
                       describe_current());
            recover_to_block();
            return;
        }
        std::string kw = cur().text;
        if (!kBlockKeywords.count(kw)) {
            error_here("unknown block keyword '" + kw + "'");
            recover_to_block();
            return;
        }
        take();
        if (kw == "Cloud") parse_cloud();
        else if (kw == "Device") parse_device();
        else if (kw == "EdgeDevice") parse_edge_device();
        else if (kw == "Platform") parse_platform();
        else if (kw == "SimulationNode") parse_sim_node();
        else parse_simulator();
    }

    // Common "': Name {'" prefix; Simulator passes want_name = false.
    bool open_block(const std::string& block, bool want_name, std::string& name, SourceLoc& loc) {
        if (!expect(TokKind::Colon, "':' after '" + block + "'")) {
            recover_to_block();
            return false;
        }
        if (want_name) {
            auto n = expect(TokKind::Ident, "a name for the " + block + " block");
            if (!n) {
                recover_to_block();
                return false;
            }
            name = n->text;
            loc = n->loc;
        } else {
            loc = cur().loc;
        }
        if (!expect(TokKind::LBrace, "'{'")) {
            recover_to_block();
            return false;
        }
        return true;
    }

    void parse_cloud() {
        CloudSpec spec;
        if (!open_block("Cloud", true, spec.name, spec.loc)) return;
        std::optional<std::string> ip;
        std::optional<int64_t> port;
        SourceLoc port_loc;
        parse_fields("Cloud", [&](const std::string& f, SourceLoc floc) {
            if (f == "IP") { ip = parse_ip_value(); return true; }
            if (f == "port") {
                port_loc = floc;
                port = parse_int_value("port");
                return true;
            }
            return false;
        });
        require_field(ip, spec.loc, "Cloud", "IP");
        require_field(port, spec.loc, "Cloud", "port");
        if (port && (*port < 1 || *port > 65535)) {
            error_loc(port_loc, "port must be in range 1-65535");
            return;
        }
        if (ip) spec.ip = *ip;
        if (port) spec.port = static_cast<int>(*port);
        ast_.clouds.push_back(std::move(spec));
    }

    void parse_device() {
        DeviceSpec spec;
        if (!open_block("Device", true, spec.name, spec.loc)) return;
        std::optional<int64_t> period;
        std::optional<PayloadSpec> payload;
        SourceLoc period_loc;
        parse_fields("Device", [&](const std::string& f, SourceLoc floc) {
            if (f == "period") {
                period_loc = floc;
                period = parse_int_value("period");
                return true;
            }
            if (f == "payload") { payload = parse_payload_value(); return true; }
            return false;
        });
        require_field(period, spec.loc, "Device", "period");
        require_field(payload, spec.loc, "Device", "payload");
        if (period && *period < 1) error_loc(period_loc, "period must be at least 1 step");
        if (period) spec.period_steps = *period;
        if (payload) spec.payload = std::move(*payload);
        ast_.devices.push_back(std::move(spec));
    }

    void parse_edge_device() {
        EdgeDeviceSpec spec;
        if (!open_block("EdgeDevice", true, spec.name, spec.loc)) return;
        std::optional<Protocol> protocol;
        std::optional<Speed> speed;
        std::optional<std::string> cloud;
        std::optional<std::vector<CountedRef>> devices;
        std::optional<int64_t> workload;
        parse_fields("EdgeDevice", [&](const std::string& f, SourceLoc) {
            if (f == "protocol") {
                if (at(TokKind::Ident)) {
                    Token t = take();
                    if (t.text == "UDP") protocol = Protocol::Udp;
                    else if (t.text == "TCP") protocol = Protocol::Tcp;
                    else if (t.text == "MQTT") protocol = Protocol::Mqtt;
                    else error_loc(t.loc, "unknown protocol '" + t.text + "' (expected UDP, TCP or MQTT)");
                } else {
                    error_here("expected UDP, TCP or MQTT for 'protocol'" + describe_current());
                    skip_value();
                }
                return true;
            }
            if (f == "speed") { speed = parse_speed_value(); return true; }
            if (f == "cloud") { cloud = parse_ref_value("cloud", &spec.cloud_loc); return true; }
            if (f == "devices") { devices = parse_counted_list("devices"); return true; }
            if (f == "workload") { workload = parse_workload_value(); return true; }
            return false;
        });
        require_field(protocol, spec.loc, "EdgeDevice", "protocol");
        require_field(speed, spec.loc, "EdgeDevice", "speed");
        require_field(cloud, spec.loc, "EdgeDevice", "cloud");
        require_field(devices, spec.loc, "EdgeDevice", "devices");
        if (protocol) spec.protocol = *protocol;
        if (speed) spec.speed = *speed;
        if (cloud) spec.cloud = *cloud;
        if (devices) spec.devices = std::move(*devices);
        spec.workload_ns = workload.value_or(0);
        ast_.edge_devices.push_back(std::move(spec));
    }

    void parse_platform() {
        PlatformSpec spec;
        if (!open_block("Platform", true, spec.name, spec.loc)) return;
        std::optional<PlatformKind> kind;
        parse_fields("Platform", [&](const std::string& f, SourceLoc) {
            if (f == "type") {
                if (at(TokKind::Ident)) {
                    Token t = take();
                    if (t.text == "Native") kind = PlatformKind::Native;
                    else if (t.text == "VM") kind = PlatformKind::Vm;
                    else if (t.text == "Docker") kind = PlatformKind::Docker;
                    else error_loc(t.loc, "unknown platform type '" + t.text +
                                           "' (expected Native, VM or Docker)");
                } else {
                    error_here("expected Native, VM or Docker for 'type'" + describe_current());
                    skip_value();
                }
                return true;
            }
            if (f == "IP") { spec.ip = parse_ip_value(); return true; }
            if (f == "username") { spec.username = parse_text_value("username"); return true; }
            if (f == "password") { spec.password = parse_text_value("password"); return true; }
            if (f == "CPU") {
                auto cpu = parse_int_value("CPU");
                if (cpu && *cpu < 1) error_here("CPU count must be at least 1");
                else if (cpu) spec.cpu = *cpu;
                return true;
            }
            if (f == "memory") { spec.memory = parse_memory_value(); return true; }
            return false;
        });
        require_field(kind, spec.loc, "Platform", "type");
        if (kind) spec.kind = *kind;
        ast_.platforms.push_back(std::move(spec));
    }

    void parse_sim_node() {
        SimNodeSpec spec;
        if (!open_block("SimulationNode", true, spec.name, spec.loc)) return;
        std::optional<std::string> platform;
        std::optional<std::vector<CountedRef>> edges;
        parse_fields("SimulationNode", [&](const std::string& f, SourceLoc) {
            if (f == "platform") {
                platform = parse_ref_value("platform", &spec.platform_loc);
                return true;
            }
            if (f == "EdgeDevices") { edges = parse_counted_list("EdgeDevices"); return true; }
            return false;
        });
        require_field(platform, spec.loc, "SimulationNode", "platform");
        require_field(edges, spec.loc, "SimulationNode", "EdgeDevices");
        if (platform) spec.platform = *platform;
        if (edges) spec.edge_devices = std::move(*edges);
        ast_.simulation_nodes.push_back(std::move(spec));
    }

    void parse_simulator() {
        SimulatorSpec spec;
        std::string unused;
        SourceLoc loc = cur().loc;
        if (!open_block("Simulator", false, unused, loc)) return;
        spec.loc = loc;
        std::optional<int64_t> duration, step;
        std::optional<std::vector<CountedRef>> nodes;
        parse_fields("Simulator", [&](const std::string& f, SourceLoc) {
            if (f == "duration") { duration = parse_duration_value("duration"); return true; }
            if (f == "step") { step = parse_duration_value("step"); return true; }
            if (f == "simulationNodes") {
                nodes = parse_counted_list("simulationNodes");
                return true;
            }
            return false;
        });
        require_field(duration, spec.loc, "Simulator", "duration");
        require_field(step, spec.loc, "Simulator", "step");
        require_field(nodes, spec.loc, "Simulator", "simulationNodes");
        if (duration) spec.duration_ns = *duration;
        if (step) spec.step_ns = *step;
        if (nodes) spec.simulation_nodes = std::move(*nodes);
        if (simulator_count_++ == 0) {
            ast_.simulator = std::move(spec);
        } else {
            error_loc(spec.loc, "duplicate Simulator block (a document has exactly one)");
        }
    }

    // --- document-level checks ---------------------------------------------

    template <typename T>
    void check_unique(const std::vector<T>& items, const std::string& kind) {
        std::set<std::string> names;
        for (const auto& item : items) {
            if (!names.insert(item.name).second)
                error_loc(item.loc, "duplicate " + kind + " name '" + item.name + "'");
        }
    }

    void finish() {
        if (simulator_count_ == 0)
            diags_.push_back(error_at(SourceLoc{1, 1}, "no Simulator block in document"));
        check_unique(ast_.clouds, "Cloud");
        check_unique(ast_.devices, "Device");
        check_unique(ast_.edge_devices, "EdgeDevice");
        check_unique(ast_.platforms, "Platform");
        check_unique(ast_.simulation_nodes, "SimulationNode");
    }

    std::vector<Token> tokens_;
    size_t pos_ = 0;
    SpecAst ast_;
    std::vector<Diagnostic> diags_;
    int simulator_count_ = 0;
};

} // namespace

ParseResult parse(std::string_view source) {
    return Parser(source).run();
}

} // namespace iotecs
