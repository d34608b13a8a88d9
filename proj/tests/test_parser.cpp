#include "iotecs/parser.hpp"

#include "iotecs/lexer.hpp"
#include "iotecs/printer.hpp"
#include "iotecs/units.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace iotecs;

namespace {

// The worked example document: two clouds, a simulator, two node types on
// two platforms, two edge types, two device types.
const char* kExampleDoc = R"(
Cloud:C1 {
    IP:192.168.0.2
    port:1883
}
Cloud:C2 {
    IP:192.168.0.3
    port:2605
}
Simulator: {
    duration:10s
    step:1s
    simulationNodes:{SN1[5],SN2[1]}
}
SimulationNode: SN1 {
    platform:P1
    EdgeDevices:{E1[7],E2[3]}
}
SimulationNode: SN2 {
    platform:P2
    EdgeDevices:{E1[30]}
}
Platform: P1{
    type: Native
}
Platform: P2{
    type: Docker
    IP: 192.168.0.4
    username: user2
    password: password2
    CPU: 4
    memory: 2G
}
EdgeDevice: E1 {
    protocol:TCP
    speed:100
    cloud:C1
    devices:{D1[100]}
}
EdgeDevice: E2 {
    protocol:TCP
    speed:1000
    cloud:C2
    devices:{D1[10],D2[20]}
    workload:20ms
}
Device: D1 {
    period:1
    payload:60B
}
Device: D2 {
    period:2
    payload:100B
}
)";

int count_lines(const std::string& s) {
    int lines = 1;
    for (char c : s)
        if (c == '\n') lines++;
    return lines;
}

} // namespace

TEST_CASE("example document parses") {
    ParseResult r = parse(kExampleDoc);
    REQUIRE(r.ok());
    const SpecAst& ast = *r.ast;

    CHECK(ast.clouds.size() == 2);
    CHECK(ast.clouds[0].name == "C1");
    CHECK(ast.clouds[0].ip == "192.168.0.2");
    CHECK(ast.clouds[0].port == 1883);

    CHECK(ast.simulator.duration_ns == 10 * kNsPerSec);
    CHECK(ast.simulator.step_ns == 1 * kNsPerSec);
    REQUIRE(ast.simulator.simulation_nodes.size() == 2);
    CHECK(ast.simulator.simulation_nodes[0].name == "SN1");
    CHECK(ast.simulator.simulation_nodes[0].count == 5);
    CHECK(ast.simulator.simulation_nodes[1].count == 1);

    REQUIRE(ast.devices.size() == 2);
    CHECK(ast.devices[1].name == "D2");
    CHECK(ast.devices[1].period_steps == 2);
    CHECK(!ast.devices[1].payload.is_literal);
    CHECK(ast.devices[1].payload.size_bytes == 100);

    REQUIRE(ast.edge_devices.size() == 2);
    const auto& e2 = ast.edge_devices[1];
    CHECK(e2.protocol == Protocol::Tcp);
    CHECK(e2.speed.packets_per_step == 1000);
    CHECK(!e2.speed.is_max);
    CHECK(e2.cloud == "C2");
    CHECK(e2.workload_ns == 20 * kNsPerMs);
    REQUIRE(e2.devices.size() == 2);
    CHECK(e2.devices[0].count == 10);
    CHECK(e2.devices[1].count == 20);
    CHECK(ast.edge_devices[0].workload_ns == 0); // defaults when omitted

    REQUIRE(ast.platforms.size() == 2);
    const auto& p2 = ast.platforms[1];
    CHECK(p2.kind == PlatformKind::Docker);
    CHECK(p2.ip == "192.168.0.4");
    CHECK(p2.username == "user2");
    CHECK(p2.password == "password2");
    CHECK(p2.cpu == 4);
    REQUIRE(p2.memory.has_value());
    CHECK(p2.memory->magnitude == 2);
    CHECK(p2.memory->unit == "G");
}

TEST_CASE("literal payload keeps exact bytes") {
    std::string doc = R"(
Device: D1 { period:1 payload:"23C" }
Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }
)";
    ParseResult r = parse(doc);
    REQUIRE(r.ok());
    const auto& payload = r.ast->devices[0].payload;
    CHECK(payload.is_literal);
    CHECK(payload.literal == std::vector<uint8_t>{0x32, 0x33, 0x43});
}

TEST_CASE("string escapes") {
    std::string doc = "Device: D1 { period:1 payload:\"a\\n\\t\\\\\\\"\\x7f\" }\n"
                      "Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }\n";
    ParseResult r = parse(doc);
    REQUIRE(r.ok());
    CHECK(r.ast->devices[0].payload.literal ==
          std::vector<uint8_t>{'a', '\n', '\t', '\\', '"', 0x7f});
}

TEST_CASE("empty document reports the missing Simulator block") {
    ParseResult r = parse("");
    CHECK(!r.ok());
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.diagnostics[0].message.find("no Simulator block") != std::string::npos);
}

TEST_CASE("duplicate names are rejected per kind") {
    std::string doc = R"(
Device: D1 { period:1 payload:8B }
Device: D1 { period:2 payload:8B }
Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }
)";
    ParseResult r = parse(doc);
    CHECK(!r.ok());
    bool found = false;
    for (const auto& d : r.diagnostics)
        found |= d.message.find("duplicate Device name 'D1'") != std::string::npos;
    CHECK(found);
}

TEST_CASE("two Simulator blocks are rejected") {
    std::string doc = R"(
Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }
Simulator: { duration:2s step:1s simulationNodes:{SN1[1]} }
)";
    ParseResult r = parse(doc);
    CHECK(!r.ok());
}

TEST_CASE("unknown unit suffix is a located error") {
    std::string doc = "Simulator: {\n    duration:10x\n    step:1s\n    simulationNodes:{SN1[1]}\n}\n";
    ParseResult r = parse(doc);
    REQUIRE(!r.ok());
    bool found = false;
    for (const auto& d : r.diagnostics) {
        if (d.message.find("unknown time unit") != std::string::npos) {
            found = true;
            CHECK(d.loc.line == 2);
            CHECK(d.loc.column == 14);
        }
    }
    CHECK(found);
}

TEST_CASE("syntax errors carry locations and do not abort parsing") {
    std::string doc = "Cloud C1 { IP:1.2.3.4 port:80 }\n"
                      "Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }\n";
    ParseResult r = parse(doc); // missing ':' after Cloud
    CHECK(!r.ok());
    for (const auto& d : r.diagnostics) {
        CHECK(d.loc.line >= 1);
        CHECK(d.loc.column >= 1);
    }
}

TEST_CASE("field constraints") {
    CHECK(!parse("Cloud:C1 { IP:1.2.3.4 port:70000 }\n"
                 "Simulator: { duration:1s step:1s simulationNodes:{S[1]} }").ok());
    CHECK(!parse("Cloud:C1 { IP:1.2.3.400 port:80 }\n"
                 "Simulator: { duration:1s step:1s simulationNodes:{S[1]} }").ok());
    CHECK(!parse("Device: D1 { period:0 payload:8B }\n"
                 "Simulator: { duration:1s step:1s simulationNodes:{S[1]} }").ok());
    CHECK(!parse("Device: D1 { period:1 payload:0B }\n"
                 "Simulator: { duration:1s step:1s simulationNodes:{S[1]} }").ok());
    CHECK(!parse("Simulator: { duration:1s step:1s simulationNodes:{S[0]} }").ok());
    CHECK(!parse("Simulator: { duration:1s step:1s simulationNodes:{} }").ok());
    CHECK(!parse("Simulator: { duration:1s duration:2s step:1s simulationNodes:{S[1]} }").ok());
    CHECK(!parse("Simulator: { duration:1s step:1s }").ok()); // missing field
    // speed must be >= 1 or MAX
    CHECK(!parse("EdgeDevice: E { protocol:UDP speed:0 cloud:C devices:{D[1]} }\n"
                 "Simulator: { duration:1s step:1s simulationNodes:{S[1]} }").ok());
}

TEST_CASE("workload accepts a bare zero") {
    std::string doc = R"(
EdgeDevice: E1 { protocol:UDP speed:MAX cloud:C1 devices:{D1[1]} workload:0 }
Simulator: { duration:1s step:1s simulationNodes:{SN1[1]} }
)";
    ParseResult r = parse(doc);
    REQUIRE(r.ok());
    CHECK(r.ast->edge_devices[0].workload_ns == 0);
    CHECK(r.ast->edge_devices[0].speed.is_max);
}

TEST_CASE("comments are skipped") {
    std::string doc = "// a comment\nSimulator: { // trailing\n"
                      "    duration:1s step:1s simulationNodes:{SN1[1]}\n}\n";
    CHECK(parse(doc).ok());
}

TEST_CASE("pretty-print round-trips the example document") {
    ParseResult first = parse(kExampleDoc);
    REQUIRE(first.ok());
    std::string printed = pretty_print(*first.ast);
    ParseResult second = parse(printed);
    REQUIRE(second.ok());
    CHECK(*first.ast == *second.ast);
    // Canonical form is a fixed point.
    CHECK(pretty_print(*second.ast) == printed);
}

namespace {

// Random valid AST generator for the round-trip property.
SpecAst random_ast(std::mt19937_64& rng) {
    auto range = [&](int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(hi - lo + 1));
    };
    SpecAst ast;
    int clouds = static_cast<int>(range(1, 3));
    for (int i = 0; i < clouds; i++) {
        CloudSpec c;
        c.name = "C" + std::to_string(i);
        c.ip = std::to_string(range(1, 250)) + "." + std::to_string(range(0, 255)) + "." +
               std::to_string(range(0, 255)) + "." + std::to_string(range(1, 250));
        c.port = static_cast<int>(range(1, 65535));
        ast.clouds.push_back(c);
    }
    int devices = static_cast<int>(range(1, 4));
    for (int i = 0; i < devices; i++) {
        DeviceSpec d;
        d.name = "D" + std::to_string(i);
        d.period_steps = range(1, 9);
        if (rng() % 2) {
            d.payload.is_literal = true;
            int len = static_cast<int>(range(0, 12));
            for (int k = 0; k < len; k++)
                d.payload.literal.push_back(static_cast<uint8_t>(rng() % 256));
        } else {
            d.payload.size_bytes = range(1, 4000);
        }
        ast.devices.push_back(d);
    }
    int edges = static_cast<int>(range(1, 3));
    for (int i = 0; i < edges; i++) {
        EdgeDeviceSpec e;
        e.name = "E" + std::to_string(i);
        e.protocol = rng() % 2 ? Protocol::Udp : Protocol::Tcp;
        if (rng() % 3 == 0) e.speed.is_max = true;
        else e.speed.packets_per_step = range(1, 2000);
        e.cloud = "C" + std::to_string(range(0, clouds - 1));
        int refs = static_cast<int>(range(1, devices));
        for (int k = 0; k < refs; k++)
            e.devices.push_back({"D" + std::to_string(k), range(1, 20), {}});
        e.workload_ns = rng() % 2 ? 0 : range(1, 500) * kNsPerMs;
        ast.edge_devices.push_back(e);
    }
    PlatformSpec native;
    native.name = "P0";
    native.kind = PlatformKind::Native;
    ast.platforms.push_back(native);
    if (rng() % 2) {
        PlatformSpec docker;
        docker.name = "P1";
        docker.kind = PlatformKind::Docker;
        docker.ip = "10.0.0.9";
        docker.username = "user";
        docker.password = "pa ss\"word"; // forces quoting
        docker.cpu = range(1, 8);
        docker.memory = MemorySize{range(1, 16), "G"};
        ast.platforms.push_back(docker);
    }
    int nodes = static_cast<int>(range(1, 3));
    for (int i = 0; i < nodes; i++) {
        SimNodeSpec sn;
        sn.name = "SN" + std::to_string(i);
        sn.platform = "P" + std::to_string(rng() % ast.platforms.size());
        int refs = static_cast<int>(range(1, edges));
        for (int k = 0; k < refs; k++)
            sn.edge_devices.push_back({"E" + std::to_string(k), range(1, 10), {}});
        ast.simulation_nodes.push_back(sn);
    }
    ast.simulator.step_ns = range(1, 1000) * kNsPerMs;
    ast.simulator.duration_ns = ast.simulator.step_ns * range(1, 20);
    for (int i = 0; i < nodes; i++)
        ast.simulator.simulation_nodes.push_back({"SN" + std::to_string(i), range(1, 6), {}});
    return ast;
}

} // namespace

TEST_CASE("round-trip property: parse(pretty(ast)) == ast") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 200; i++) {
        SpecAst ast = random_ast(rng);
        std::string text = pretty_print(ast);
        ParseResult r = parse(text);
        REQUIRE_MESSAGE(r.ok(), "failed to reparse:\n" << text);
        CHECK_MESSAGE(*r.ast == ast, "round-trip mismatch for:\n" << text);
    }
}

TEST_CASE("totality and locality: mutated documents never crash the parser") {
    std::mt19937_64 rng(99);
    std::string base = kExampleDoc;
    for (int i = 0; i < 300; i++) {
        std::string doc = base;
        int mutations = 1 + static_cast<int>(rng() % 4);
        for (int m = 0; m < mutations; m++) {
            size_t pos = rng() % doc.size();
            switch (rng() % 3) {
            case 0: doc.erase(pos, 1 + rng() % 5); break;
            case 1: doc.insert(pos, 1, static_cast<char>(' ' + rng() % 90)); break;
            default: doc[pos] = static_cast<char>(' ' + rng() % 90); break;
            }
        }
        ParseResult r = parse(doc); // must not throw or crash
        int lines = count_lines(doc);
        for (const auto& d : r.diagnostics) {
            CHECK(d.loc.line >= 1);
            CHECK(d.loc.line <= lines);
            CHECK(d.loc.column >= 1);
        }
    }
}

TEST_CASE("diagnostic formatting") {
    Diagnostic d = error_at({3, 7}, "boom");
    CHECK(format_diagnostic(d, "spec.iotecs") == "spec.iotecs:3:7: error: boom");
    Diagnostic w = warning_at({1, 1}, "hm");
    CHECK(format_diagnostic(w, "x") == "x:1:1: warning: hm");
}

TEST_CASE("lexer token shapes") {
    auto toks = Lexer::tokenize("duration:10s speed:MAX ip:1.2.3.4 n:42 s:\"ab\"");
    REQUIRE(toks.size() >= 10);
    CHECK(toks[0].kind == TokKind::Ident);
    CHECK(toks[2].kind == TokKind::Scaled);
    CHECK(toks[2].int_value == 10);
    CHECK(toks[2].suffix == "s");
}
