#include "iotecs/parser.hpp"
#include "iotecs/printer.hpp"
#include "iotecs/topology.hpp"

#include <benchmark/benchmark.h>

#include <sstream>

namespace {

// A spec with n device types, n edge types and n node types.
std::string synthetic_spec(int n) {
    std::ostringstream os;
    os << "Cloud:C0 { IP:127.0.0.1 port:19000 }\n";
    for (int i = 0; i < n; i++)
        os << "Device: D" << i << " { period:" << (i % 4 + 1) << " payload:8B }\n";
    for (int i = 0; i < n; i++) {
        os << "EdgeDevice: E" << i << " { protocol:UDP speed:250 cloud:C0 devices:{";
        for (int d = 0; d <= i % 3; d++) os << (d ? "," : "") << "D" << (i + d) % n << "[20]";
        os << "} }\n";
    }
    os << "Platform: P0 { type: Native }\n";
    for (int i = 0; i < n; i++) {
        os << "SimulationNode: SN" << i << " { platform:P0 EdgeDevices:{E" << i << "[10]} }\n";
    }
    os << "Simulator: { duration:2s step:500ms simulationNodes:{";
    for (int i = 0; i < n; i++) os << (i ? "," : "") << "SN" << i << "[2]";
    os << "} }\n";
    return os.str();
}

void BM_Parse(benchmark::State& state) {
    std::string source = synthetic_spec(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto result = iotecs::parse(source);
        benchmark::DoNotOptimize(result);
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(source.size()));
}
BENCHMARK(BM_Parse)->Arg(4)->Arg(32)->Arg(128);

void BM_PrettyPrintRoundTrip(benchmark::State& state) {
    auto parsed = iotecs::parse(synthetic_spec(32));
    for (auto _ : state) {
        std::string text = iotecs::pretty_print(*parsed.ast);
        auto again = iotecs::parse(text);
        benchmark::DoNotOptimize(again);
    }
}
BENCHMARK(BM_PrettyPrintRoundTrip);

void BM_Resolve(benchmark::State& state) {
    auto parsed = iotecs::parse(synthetic_spec(static_cast<int>(state.range(0))));
    for (auto _ : state) {
        auto topo = iotecs::resolve(*parsed.ast);
        benchmark::DoNotOptimize(topo);
    }
}
BENCHMARK(BM_Resolve)->Arg(4)->Arg(32)->Arg(128);

void BM_ExpectedSends(benchmark::State& state) {
    auto parsed = iotecs::parse(synthetic_spec(128));
    auto topo = iotecs::resolve(*parsed.ast);
    for (auto _ : state) {
        auto sends = iotecs::expected_sends(*topo.topology);
        benchmark::DoNotOptimize(sends);
    }
}
BENCHMARK(BM_ExpectedSends);

void BM_TopologyDigest(benchmark::State& state) {
    auto parsed = iotecs::parse(synthetic_spec(128));
    auto topo = iotecs::resolve(*parsed.ast);
    for (auto _ : state) {
        benchmark::DoNotOptimize(iotecs::topology_digest(*topo.topology));
    }
}
BENCHMARK(BM_TopologyDigest);

} // namespace
