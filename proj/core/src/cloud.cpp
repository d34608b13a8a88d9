#include "iotecs/cloud.hpp"

#include "iotecs/wire.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>

namespace iotecs {

namespace {

int64_t percentile(std::vector<int64_t>& sorted, double q) {
    if (sorted.empty()) return 0;
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    if (rank == 0) rank = 1;
    return sorted[std::min(rank - 1, sorted.size() - 1)];
}

} // namespace

nlohmann::json snapshot_to_json(const CloudStatsSnapshot& s) {
    nlohmann::json j;
    j["packets_received"] = s.packets_received;
    j["packets_processed"] = s.packets_processed;
    j["responses_sent"] = s.responses_sent;
    j["malformed"] = s.malformed;
    j["per_source"] = s.per_source;
    j["trans_count"] = s.trans_count;
    j["trans_negative"] = s.trans_negative;
    j["trans_mean_ns"] = s.trans_mean_ns;
    j["trans_p50_ns"] = s.trans_p50_ns;
    j["trans_p95_ns"] = s.trans_p95_ns;
    j["trans_p99_ns"] = s.trans_p99_ns;
    j["epoch_ns"] = s.epoch_ns;
    j["compute_ns"] = s.compute_ns;
    j["workers"] = s.workers;
    j["udp_rcvbuf"] = s.udp_rcvbuf;
    j["protocol"] = s.protocol;
    return j;
}

CloudStatsSnapshot snapshot_from_json(const nlohmann::json& j) {
    CloudStatsSnapshot s;
    s.packets_received = j.at("packets_received").get<uint64_t>();
    s.packets_processed = j.at("packets_processed").get<uint64_t>();
    s.responses_sent = j.at("responses_sent").get<uint64_t>();
    s.malformed = j.value("malformed", 0ull);
    if (j.contains("per_source"))
        s.per_source = j.at("per_source").get<std::map<std::string, uint64_t>>();
    s.trans_count = j.value("trans_count", 0ull);
    s.trans_negative = j.value("trans_negative", 0ull);
    s.trans_mean_ns = j.value("trans_mean_ns", int64_t{0});
    s.trans_p50_ns = j.value("trans_p50_ns", int64_t{0});
    s.trans_p95_ns = j.value("trans_p95_ns", int64_t{0});
    s.trans_p99_ns = j.value("trans_p99_ns", int64_t{0});
    s.epoch_ns = j.value("epoch_ns", int64_t{0});
    s.compute_ns = j.value("compute_ns", int64_t{0});
    s.workers = j.value("workers", 0);
    s.udp_rcvbuf = j.value("udp_rcvbuf", 0);
    s.protocol = j.value("protocol", "");
    return s;
}

CloudServer::CloudServer(CloudConfig config) : config_(std::move(config)) {}

CloudServer::~CloudServer() {
    stop();
}

void CloudServer::start() {
    if (config_.port != 0 && config_.port == config_.control_port)
        throw std::invalid_argument("data port and control port must differ");

    if (config_.protocol == Protocol::Udp) {
        udp_sock_ = Socket::udp();
        if (config_.udp_rcvbuf > 0) udp_sock_.set_rcvbuf(config_.udp_rcvbuf);
        udp_sock_.bind_to(config_.bind_ip, config_.port);
        data_port_ = udp_sock_.local_port();
    } else {
        tcp_listener_ = Socket::tcp();
        tcp_listener_.set_reuseaddr();
        tcp_listener_.bind_to(config_.bind_ip, config_.port);
        tcp_listener_.listen_on();
        data_port_ = tcp_listener_.local_port();
    }

    control_listener_ = Socket::tcp();
    control_listener_.set_reuseaddr();
    control_listener_.bind_to(config_.bind_ip, config_.control_port);
    control_listener_.listen_on();
    control_port_ = control_listener_.local_port();

    started_.store(true);
    int workers = std::max(config_.workers, 1);
    if (config_.protocol == Protocol::Udp) {
        for (int i = 0; i < workers; i++) threads_.emplace_back(&CloudServer::udp_worker, this);
    } else {
        threads_.emplace_back(&CloudServer::tcp_accept_loop, this);
        for (int i = 0; i < workers; i++) threads_.emplace_back(&CloudServer::tcp_worker, this);
    }
    threads_.emplace_back(&CloudServer::control_loop, this);
}

void CloudServer::stop() {
    if (!started_.load()) return;
    bool expected = false;
    if (!stop_.compare_exchange_strong(expected, true)) {
        // Already stopping; just wait for threads below.
    }
    queue_cv_.notify_all();
    queue_space_cv_.notify_all();
    for (auto& t : threads_)
        if (t.joinable()) t.join();
    {
        std::lock_guard<std::mutex> lock(conn_threads_mu_);
        for (auto& t : conn_threads_)
            if (t.joinable()) t.join();
        conn_threads_.clear();
    }
    threads_.clear();
    started_.store(false);
    stopped_cv_.notify_all();
}

void CloudServer::wait() {
    std::unique_lock<std::mutex> lock(stopped_mu_);
    while (!stop_.load())
        stopped_cv_.wait_for(lock, std::chrono::milliseconds(100));
    // Join from the waiter's context so `wait()` returning means "fully done".
    lock.unlock();
    stop();
}

// Validates the frame and updates received/malformed/per-source/transit.
// Returns false when the packet must be dropped.
bool CloudServer::account_received(const uint8_t* data, size_t len) {
    PacketHeader hdr;
    if (decode_header(data, len, hdr) != DecodeError::Ok ||
        len != kHeaderSize + hdr.payload_len) {
        malformed_.fetch_add(1);
        return false;
    }
    packets_received_.fetch_add(1);
    int64_t transit = clock_.now_ns() - static_cast<int64_t>(hdr.send_timestamp_ns);
    {
        std::lock_guard<std::mutex> lock(stats_mu_);
        per_source_[{hdr.node_id, hdr.edge_id}]++;
        if (transit >= 0) {
            if (trans_samples_.size() < config_.max_trans_samples)
                trans_samples_.push_back(transit);
        }
    }
    if (transit < 0) trans_negative_.fetch_add(1);
    return true;
}

void CloudServer::process_packet(const uint8_t* data, size_t len, const sockaddr_in* udp_peer,
                                 Socket* udp_sock, TcpConn* tcp_conn) {
    busy_compute_ns(config_.compute_ns);
    packets_processed_.fetch_add(1);
    // Echo the packet back verbatim.
    if (udp_peer) {
        if (udp_sock->send_to(data, len, *udp_peer) == static_cast<ssize_t>(len))
            responses_sent_.fetch_add(1);
    } else if (tcp_conn && !tcp_conn->dead.load()) {
        std::lock_guard<std::mutex> lock(tcp_conn->write_mu);
        int64_t deadline = mono_now_ns() + 5LL * 1000 * 1000 * 1000;
        if (tcp_conn->sock.send_all_deadline(data, len, deadline)) {
            responses_sent_.fetch_add(1);
        } else {
            tcp_conn->dead.store(true);
        }
    }
}

void CloudServer::udp_worker() {
    std::vector<uint8_t> buf(kMaxUdpPacket);
    while (!stop_.load()) {
        if (!udp_sock_.poll_readable(50)) continue;
        sockaddr_in peer{};
        ssize_t n = udp_sock_.recv_from(buf.data(), buf.size(), peer);
        if (n <= 0) continue;
        if (!account_received(buf.data(), static_cast<size_t>(n))) continue;
        process_packet(buf.data(), static_cast<size_t>(n), &peer, &udp_sock_, nullptr);
    }
}

void CloudServer::tcp_accept_loop() {
    while (!stop_.load()) {
        auto conn = tcp_listener_.accept_timeout(100);
        if (!conn) continue;
        auto shared = std::make_shared<TcpConn>();
        shared->sock = std::move(*conn);
        shared->sock.set_nodelay();
        std::lock_guard<std::mutex> lock(conn_threads_mu_);
        conn_threads_.emplace_back(&CloudServer::tcp_reader, this, shared);
    }
}

void CloudServer::tcp_reader(std::shared_ptr<TcpConn> conn) {
    std::vector<uint8_t> buf(64 * 1024);
    std::vector<uint8_t> stream;
    bool poisoned = false;
    while (!stop_.load() && !conn->dead.load()) {
        if (!conn->sock.poll_readable(50)) continue;
        ssize_t n = conn->sock.recv_some(buf.data(), buf.size());
        if (n == 0) break;
        if (n < 0) continue;
        if (poisoned) continue; // count nothing we cannot frame
        stream.insert(stream.end(), buf.data(), buf.data() + n);
        size_t off = 0;
        while (stream.size() - off >= kHeaderSize) {
            PacketHeader hdr;
            if (decode_header(stream.data() + off, stream.size() - off, hdr) != DecodeError::Ok) {
                malformed_.fetch_add(1);
                poisoned = true; // framing lost for good on a stream
                off = stream.size();
                break;
            }
            size_t want = kHeaderSize + hdr.payload_len;
            if (stream.size() - off < want) break;
            if (account_received(stream.data() + off, want)) {
                WorkItem item;
                item.conn = conn;
                item.packet.assign(stream.begin() + static_cast<long>(off),
                                   stream.begin() + static_cast<long>(off + want));
                std::unique_lock<std::mutex> lock(queue_mu_);
                queue_space_cv_.wait(lock, [&] {
                    return stop_.load() || queue_.size() < config_.queue_capacity;
                });
                if (stop_.load()) return;
                queue_.push_back(std::move(item));
                queue_cv_.notify_one();
            }
            off += want;
        }
        stream.erase(stream.begin(), stream.begin() + static_cast<long>(off));
    }
}

void CloudServer::tcp_worker() {
    while (true) {
        WorkItem item;
        {
            std::unique_lock<std::mutex> lock(queue_mu_);
            queue_cv_.wait(lock, [&] { return stop_.load() || !queue_.empty(); });
            if (queue_.empty()) {
                if (stop_.load()) return;
                continue;
            }
            item = std::move(queue_.front());
            queue_.pop_front();
            queue_space_cv_.notify_one();
        }
        process_packet(item.packet.data(), item.packet.size(), nullptr, nullptr, item.conn.get());
    }
}

CloudStatsSnapshot CloudServer::snapshot() {
    CloudStatsSnapshot s;
    s.packets_received = packets_received_.load();
    s.packets_processed = packets_processed_.load();
    s.responses_sent = responses_sent_.load();
    s.malformed = malformed_.load();
    s.trans_negative = trans_negative_.load();
    {
        std::lock_guard<std::mutex> lock(stats_mu_);
        for (const auto& [key, count] : per_source_)
            s.per_source[std::to_string(key.first) + "/" + std::to_string(key.second)] = count;
        std::vector<int64_t> samples = trans_samples_;
        s.trans_count = samples.size();
        if (!samples.empty()) {
            int64_t sum = 0;
            for (int64_t v : samples) sum += v;
            s.trans_mean_ns = sum / static_cast<int64_t>(samples.size());
            std::sort(samples.begin(), samples.end());
            s.trans_p50_ns = percentile(samples, 0.50);
            s.trans_p95_ns = percentile(samples, 0.95);
            s.trans_p99_ns = percentile(samples, 0.99);
        }
    }
    s.epoch_ns = clock_.now_ns();
    s.compute_ns = config_.compute_ns;
    s.workers = std::max(config_.workers, 1);
    s.udp_rcvbuf = config_.protocol == Protocol::Udp && udp_sock_.valid() ? udp_sock_.rcvbuf() : 0;
    s.protocol = to_string(config_.protocol);
    return s;
}

int64_t CloudServer::reset() {
    std::lock_guard<std::mutex> lock(stats_mu_);
    packets_received_.store(0);
    packets_processed_.store(0);
    responses_sent_.store(0);
    malformed_.store(0);
    trans_negative_.store(0);
    per_source_.clear();
    trans_samples_.clear();
    return clock_.now_ns();
}

void CloudServer::control_loop() {
    while (!stop_.load()) {
        auto conn = control_listener_.accept_timeout(100);
        if (!conn) continue;
        std::lock_guard<std::mutex> lock(conn_threads_mu_);
        conn_threads_.emplace_back(&CloudServer::handle_control_conn, this, std::move(*conn));
    }
}

nlohmann::json CloudServer::handle_command(const std::string& cmd) {
    if (cmd == "RESET") {
        int64_t epoch = reset();
        return {{"ok", true}, {"epoch_ns", epoch}};
    }
    if (cmd == "SNAPSHOT") {
        nlohmann::json j = snapshot_to_json(snapshot());
        j["ok"] = true;
        return j;
    }
    if (cmd == "STOP") {
        return {{"ok", true}, {"stopping", true}};
    }
    return {{"ok", false}, {"error", "unknown command '" + cmd + "'"}};
}

void CloudServer::handle_control_conn(Socket conn) {
    LineReader reader(conn.fd());
    while (!stop_.load()) {
        auto line = reader.read_line(200);
        if (!line) {
            if (reader.eof()) return;
            continue; // timeout keeps the connection open
        }
        if (line->empty()) continue;
        std::string cmd = *line;
        // Accept both a bare command token and {"cmd": "..."}.
        if (!cmd.empty() && cmd.front() == '{') {
            auto parsed = nlohmann::json::parse(cmd, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("cmd")) {
                send_line(conn, R"({"error":"malformed request","ok":false})");
                continue;
            }
            cmd = parsed["cmd"].get<std::string>();
        }
        nlohmann::json reply = handle_command(cmd);
        send_line(conn, reply.dump());
        if (cmd == "STOP") {
            stop_.store(true);
            queue_cv_.notify_all();
            queue_space_cv_.notify_all();
            stopped_cv_.notify_all();
            return;
        }
    }
}

} // namespace iotecs
