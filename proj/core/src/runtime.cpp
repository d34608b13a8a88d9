#include "iotecs/runtime.hpp"

#include "iotecs/payload.hpp"
#include "iotecs/wire.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

namespace iotecs {

nlohmann::json ledger_to_json(const NodeLedger& ledger) {
    nlohmann::json j;
    j["node_id"] = ledger.node_id;
    j["epoch_wall_ns"] = ledger.epoch_wall_ns;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : ledger.edges) {
        nlohmann::json je;
        je["edge_id"] = e.edge_id;
        je["attempted_sends"] = e.attempted_sends;
        je["actual_sends"] = e.actual_sends;
        je["responses_received"] = e.responses_received;
        je["duplicates"] = e.duplicates;
        je["send_errors"] = e.send_errors;
        je["step_budget_breaks"] = e.step_budget_breaks;
        je["late_wakes"] = e.late_wakes;
        je["transport_failed"] = e.transport_failed;
        if (!e.failure.empty()) je["failure"] = e.failure;
        je["rtt_count"] = e.rtt_count;
        je["rtt_sum_ns"] = e.rtt_sum_ns;
        je["rtt_samples_ns"] = e.rtt_samples_ns;
        j["edges"].push_back(std::move(je));
    }
    return j;
}

NodeLedger ledger_from_json(const nlohmann::json& j) {
    NodeLedger ledger;
    ledger.node_id = j.at("node_id").get<uint16_t>();
    ledger.epoch_wall_ns = j.at("epoch_wall_ns").get<int64_t>();
    for (const auto& je : j.at("edges")) {
        EdgeLedgerEntry e;
        e.edge_id = je.at("edge_id").get<uint16_t>();
        e.attempted_sends = je.at("attempted_sends").get<uint64_t>();
        e.actual_sends = je.at("actual_sends").get<uint64_t>();
        e.responses_received = je.at("responses_received").get<uint64_t>();
        e.duplicates = je.value("duplicates", 0ull);
        e.send_errors = je.value("send_errors", 0ull);
        e.step_budget_breaks = je.value("step_budget_breaks", 0u);
        e.late_wakes = je.value("late_wakes", 0u);
        e.transport_failed = je.value("transport_failed", false);
        e.failure = je.value("failure", "");
        e.rtt_count = je.value("rtt_count", 0ull);
        e.rtt_sum_ns = je.value("rtt_sum_ns", int64_t{0});
        if (je.contains("rtt_samples_ns"))
            e.rtt_samples_ns = je.at("rtt_samples_ns").get<std::vector<int64_t>>();
        ledger.edges.push_back(std::move(e));
    }
    return ledger;
}

EdgeTransport open_edge_transport(const EdgeInstance& edge, const CloudSpec& cloud,
                                  int connect_timeout_ms) {
    EdgeTransport t;
    t.protocol = edge.protocol;
    try {
        switch (edge.protocol) {
        case Protocol::Udp: {
            t.sock = Socket::udp();
            sockaddr_in addr = make_sockaddr(cloud.ip, static_cast<uint16_t>(cloud.port));
            if (::connect(t.sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
                t.error = std::strerror(errno);
                return t;
            }
            t.connected = true;
            return t;
        }
        case Protocol::Tcp: {
            t.sock = Socket::tcp();
            std::string err;
            if (!t.sock.connect_to(cloud.ip, static_cast<uint16_t>(cloud.port), connect_timeout_ms,
                                   &err)) {
                t.error = err.empty() ? "connect failed" : err;
                return t;
            }
            t.sock.set_nodelay();
            t.connected = true;
            return t;
        }
        case Protocol::Mqtt:
            t.error = "MQTT is not supported by the runtime";
            return t;
        }
    } catch (const std::exception& ex) {
        t.error = ex.what();
    }
    return t;
}

namespace {

// Counters shared by the send and receive activities of one edge.
struct SharedCounters {
    std::atomic<uint64_t> attempted{0};
    std::atomic<uint64_t> actual{0};
    std::atomic<uint64_t> responses{0};
    std::atomic<uint64_t> duplicates{0};
    std::atomic<uint64_t> send_errors{0};
    std::atomic<uint32_t> breaks{0};
    std::atomic<uint32_t> late_wakes{0};
    std::atomic<bool> transport_failed{false};

    std::mutex mu;
    std::string failure;
    uint64_t rtt_count = 0;
    int64_t rtt_sum = 0;
    std::vector<int64_t> rtt_samples;

    void record_failure(const std::string& what) {
        std::lock_guard<std::mutex> lock(mu);
        if (failure.empty()) failure = what;
    }
    void record_rtt(int64_t ns, size_t cap) {
        std::lock_guard<std::mutex> lock(mu);
        rtt_count++;
        rtt_sum += ns;
        if (rtt_samples.size() < cap) rtt_samples.push_back(ns);
    }
};

constexpr int64_t kLateWakeThresholdNs = 1 * 1000 * 1000;

void send_activity(const EdgeInstance& edge, EdgeTransport& transport, const EdgeRunContext& ctx,
                   SharedCounters& counters) {
    // Payloads are fixed per device for the whole run; regenerated exactly
    // from the seed.
    std::vector<std::vector<uint8_t>> payloads;
    payloads.reserve(edge.devices.size());
    for (const auto& dev : edge.devices) {
        auto rng = device_rng(ctx.seed, ctx.node_id, edge.edge_id, dev.device_id);
        payloads.push_back(make_payload(dev, rng));
    }

    StepClock clock(ctx.epoch_mono_ns, ctx.step_ns);
    const int64_t pause_ns =
        edge.speed.is_max ? 0 : ctx.step_ns / std::max<int64_t>(edge.speed.packets_per_step, 1);
    uint32_t seq = 0;
    uint8_t frame[kHeaderSize + kMaxPayload];

    for (int64_t i = 0; i < ctx.step_count; i++) {
        auto wake = clock.wait_for_step(i);
        if (wake.late_ns > kLateWakeThresholdNs) counters.late_wakes.fetch_add(1);
        const int64_t step_start = wake.mono_ns;
        const int64_t step_end = step_start + ctx.step_ns;
        bool broke = false;

        for (size_t d = 0; d < edge.devices.size(); d++) {
            const auto& dev = edge.devices[d];
            if (i % dev.period_steps != 0) continue;
            counters.attempted.fetch_add(1);

            if (counters.transport_failed.load(std::memory_order_relaxed)) continue;
            if (broke) continue;
            if (mono_now_ns() - step_start >= ctx.step_ns) {
                // Step budget exhausted: abandon the rest of this step's sends.
                broke = true;
                counters.breaks.fetch_add(1);
                continue;
            }

            PacketHeader hdr;
            hdr.node_id = ctx.node_id;
            hdr.edge_id = edge.edge_id;
            hdr.device_id = dev.device_id;
            hdr.step_index = static_cast<uint32_t>(i);
            hdr.seq = seq;
            hdr.send_timestamp_ns = static_cast<uint64_t>(ctx.clock->now_ns());
            hdr.payload_len = static_cast<uint16_t>(payloads[d].size());
            encode_header(hdr, frame);
            std::memcpy(frame + kHeaderSize, payloads[d].data(), payloads[d].size());
            const size_t frame_len = kHeaderSize + payloads[d].size();

            bool sent = false;
            if (transport.protocol == Protocol::Udp) {
                sent = transport.sock.send_some(frame, frame_len) ==
                       static_cast<ssize_t>(frame_len);
                if (!sent) counters.send_errors.fetch_add(1);
            } else {
                std::string err;
                sent = transport.sock.send_all_deadline(frame, frame_len, step_end, &err);
                if (!sent) {
                    counters.send_errors.fetch_add(1);
                    // A stream failure is terminal: remaining sends are
                    // attempted-but-unsent.
                    counters.transport_failed.store(true);
                    counters.record_failure("TCP send failed: " + err);
                }
            }
            if (sent) {
                counters.actual.fetch_add(1);
                seq++;
            }

            if (pause_ns > 0 && sent) {
                // The pacing sleep is clipped to the step boundary so it can
                // never overrun the step.
                int64_t target = std::min(mono_now_ns() + pause_ns, step_end);
                precise_sleep_until_mono(target);
            }
        }
    }
}

void receive_activity(const EdgeInstance& edge, EdgeTransport& transport,
                      const EdgeRunContext& ctx, SharedCounters& counters) {
    std::vector<uint8_t> buf(kHeaderSize + kMaxPayload);
    std::vector<uint8_t> seen(ctx.expected_sends, 0);
    std::vector<uint8_t> stream; // TCP reassembly

    auto handle_packet = [&](const uint8_t* data, size_t len) {
        PacketHeader hdr;
        if (decode_header(data, len, hdr) != DecodeError::Ok) return;
        if (hdr.node_id != ctx.node_id || hdr.edge_id != edge.edge_id) return;
        if (hdr.seq < seen.size() && !seen[hdr.seq]) {
            seen[hdr.seq] = 1;
            counters.responses.fetch_add(1);
            int64_t rtt = ctx.clock->now_ns() - static_cast<int64_t>(hdr.send_timestamp_ns);
            if (rtt >= 0) counters.record_rtt(rtt, ctx.rtt_sample_cap);
        } else {
            counters.duplicates.fetch_add(1);
        }
    };

    while (mono_now_ns() < ctx.stop_mono_ns) {
        int64_t remaining_ms = (ctx.stop_mono_ns - mono_now_ns()) / 1000000;
        int wait_ms = static_cast<int>(std::clamp<int64_t>(remaining_ms, 1, 50));
        if (!transport.sock.poll_readable(wait_ms)) continue;

        if (transport.protocol == Protocol::Udp) {
            ssize_t n = transport.sock.recv_some(buf.data(), buf.size());
            if (n > 0) handle_packet(buf.data(), static_cast<size_t>(n));
        } else {
            ssize_t n = transport.sock.recv_some(buf.data(), buf.size());
            if (n == 0) return; // peer closed; nothing more will arrive
            if (n < 0) continue;
            stream.insert(stream.end(), buf.data(), buf.data() + n);
            size_t off = 0;
            while (stream.size() - off >= kHeaderSize) {
                PacketHeader hdr;
                if (decode_header(stream.data() + off, stream.size() - off, hdr) !=
                    DecodeError::Ok) {
                    // Poisoned stream; drop the buffer and resynchronize on
                    // whatever arrives next (best effort).
                    off = stream.size();
                    break;
                }
                size_t want = kHeaderSize + hdr.payload_len;
                if (stream.size() - off < want) break;
                handle_packet(stream.data() + off, want);
                off += want;
            }
            stream.erase(stream.begin(), stream.begin() + static_cast<long>(off));
        }
    }
}

void compute_activity(const EdgeInstance& edge, const EdgeRunContext& ctx,
                      SharedCounters& counters) {
    (void)counters;
    StepClock clock(ctx.epoch_mono_ns, ctx.step_ns);
    for (int64_t i = 0; i < ctx.step_count; i++) {
        if (mono_now_ns() >= ctx.stop_mono_ns) return;
        clock.wait_for_step(i);
        busy_compute_ns(edge.workload_ns);
    }
}

} // namespace

EdgeLedgerEntry run_edge_device(const EdgeInstance& edge, EdgeTransport& transport,
                                const EdgeRunContext& ctx) {
    SharedCounters counters;
    if (!transport.connected) {
        counters.transport_failed.store(true);
        counters.record_failure(transport.error.empty() ? "transport not connected"
                                                        : transport.error);
    }

    std::thread sender(send_activity, std::cref(edge), std::ref(transport), std::cref(ctx),
                       std::ref(counters));
    std::thread receiver;
    if (transport.connected)
        receiver = std::thread(receive_activity, std::cref(edge), std::ref(transport),
                               std::cref(ctx), std::ref(counters));
    std::thread computer;
    if (edge.workload_ns > 0)
        computer = std::thread(compute_activity, std::cref(edge), std::cref(ctx),
                               std::ref(counters));

    sender.join();
    if (receiver.joinable()) receiver.join();
    if (computer.joinable()) computer.join();

    EdgeLedgerEntry entry;
    entry.edge_id = edge.edge_id;
    entry.attempted_sends = counters.attempted.load();
    entry.actual_sends = counters.actual.load();
    entry.responses_received = counters.responses.load();
    entry.duplicates = counters.duplicates.load();
    entry.send_errors = counters.send_errors.load();
    entry.step_budget_breaks = counters.breaks.load();
    entry.late_wakes = counters.late_wakes.load();
    entry.transport_failed = counters.transport_failed.load();
    entry.failure = counters.failure;
    entry.rtt_count = counters.rtt_count;
    entry.rtt_sum_ns = counters.rtt_sum;
    entry.rtt_samples_ns = std::move(counters.rtt_samples);
    return entry;
}

NodeLedger run_simulation_node(const NodeInstance& node, const ResolvedTopology& topo,
                               const NodeRunConfig& config) {
    // One aligned clock per cloud; offsets shift timestamps into the cloud's
    // wall-clock domain so one-way transit times are directly comparable.
    std::vector<AlignedClock> clocks;
    clocks.reserve(topo.clouds.size());
    for (size_t i = 0; i < topo.clouds.size(); i++) {
        int64_t offset =
            i < config.cloud_offsets_ns.size() ? config.cloud_offsets_ns[i] : 0;
        clocks.emplace_back(offset);
    }
    AlignedClock local; // offset-free, for epoch conversion

    auto expected = expected_sends(topo);

    // Initialize every edge (transport setup) before any of them runs.
    std::vector<EdgeTransport> transports(node.edges.size());
    for (size_t i = 0; i < node.edges.size(); i++) {
        const auto& edge = node.edges[i];
        transports[i] = open_edge_transport(edge, topo.clouds[edge.cloud_index],
                                            config.connect_timeout_ms);
    }

    int64_t epoch_mono = local.mono_for_wall(config.start_wall_ns);
    int64_t stop_mono = epoch_mono + topo.duration_ns + config.drain_ns;

    NodeLedger ledger;
    ledger.node_id = node.node_id;
    ledger.epoch_wall_ns = config.start_wall_ns;
    ledger.edges.resize(node.edges.size());

    std::vector<std::thread> threads;
    threads.reserve(node.edges.size());
    for (size_t i = 0; i < node.edges.size(); i++) {
        const auto& edge = node.edges[i];
        EdgeRunContext ctx;
        ctx.node_id = node.node_id;
        ctx.step_ns = topo.step_ns;
        ctx.step_count = topo.step_count;
        ctx.epoch_mono_ns = epoch_mono;
        ctx.stop_mono_ns = stop_mono;
        ctx.clock = &clocks[edge.cloud_index];
        ctx.seed = config.seed;
        ctx.rtt_sample_cap = config.rtt_sample_cap;
        ctx.expected_sends = expected[{node.node_id, edge.edge_id}];
        threads.emplace_back([&, i, ctx]() {
            ledger.edges[i] = run_edge_device(node.edges[i], transports[i], ctx);
        });
    }
    for (auto& t : threads) t.join();
    return ledger;
}

} // namespace iotecs
