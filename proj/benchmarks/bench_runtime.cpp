#include "iotecs/payload.hpp"
#include "iotecs/timing.hpp"
#include "iotecs/wire.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_HeaderEncode(benchmark::State& state) {
    iotecs::PacketHeader h;
    h.node_id = 3;
    h.edge_id = 7;
    h.seq = 12345;
    h.send_timestamp_ns = 1'700'000'000'000'000'000ull;
    uint8_t buf[iotecs::kHeaderSize];
    for (auto _ : state) {
        iotecs::encode_header(h, buf);
        benchmark::DoNotOptimize(buf);
    }
}
BENCHMARK(BM_HeaderEncode);

void BM_HeaderDecode(benchmark::State& state) {
    iotecs::PacketHeader h;
    h.seq = 999;
    uint8_t buf[iotecs::kHeaderSize];
    iotecs::encode_header(h, buf);
    for (auto _ : state) {
        iotecs::PacketHeader out;
        benchmark::DoNotOptimize(iotecs::decode_header(buf, sizeof(buf), out));
    }
}
BENCHMARK(BM_HeaderDecode);

void BM_MakePayload(benchmark::State& state) {
    iotecs::DeviceInstance dev;
    dev.payload.size_bytes = state.range(0);
    auto rng = iotecs::device_rng(42, 0, 0, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(iotecs::make_payload(dev, rng));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_MakePayload)->Arg(8)->Arg(1000)->Arg(65000);

// Calibration: how much the busy-compute loop overshoots small targets.
void BM_BusyCompute(benchmark::State& state) {
    int64_t target = state.range(0);
    int64_t overshoot_sum = 0;
    int64_t calls = 0;
    for (auto _ : state) {
        int64_t actual = iotecs::busy_compute_ns(target);
        overshoot_sum += actual - target;
        calls++;
    }
    state.counters["overshoot_ns"] =
        benchmark::Counter(static_cast<double>(overshoot_sum) / static_cast<double>(calls));
}
BENCHMARK(BM_BusyCompute)->Arg(1000)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMicrosecond);

void BM_PreciseSleep(benchmark::State& state) {
    int64_t target = state.range(0);
    for (auto _ : state) iotecs::precise_sleep_ns(target);
}
BENCHMARK(BM_PreciseSleep)->Arg(100000)->Arg(2000000)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
