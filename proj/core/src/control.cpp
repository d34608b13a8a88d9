#include "iotecs/control.hpp"

namespace iotecs {

ControlClient::ControlClient(const std::string& ip, uint16_t port, int timeout_ms)
    : sock_(Socket::tcp()), reader_(-1), timeout_ms_(timeout_ms) {
    std::string err;
    if (!sock_.connect_to(ip, port, timeout_ms, &err))
        throw ControlError("cannot reach cloud control channel at " + ip + ":" +
                           std::to_string(port) + ": " + err);
    sock_.set_nodelay();
    reader_ = LineReader(sock_.fd());
}

nlohmann::json ControlClient::request(const std::string& cmd) {
    if (!send_line(sock_, cmd, timeout_ms_))
        throw ControlError("control send failed for " + cmd);
    auto line = reader_.read_line(timeout_ms_);
    if (!line) throw ControlError("control reply timeout for " + cmd);
    auto reply = nlohmann::json::parse(*line, nullptr, false);
    if (reply.is_discarded()) throw ControlError("malformed control reply: " + *line);
    if (reply.contains("ok") && !reply["ok"].get<bool>())
        throw ControlError("control command " + cmd + " rejected: " +
                           reply.value("error", "unknown error"));
    return reply;
}

int64_t ControlClient::reset_epoch() {
    return request("RESET").at("epoch_ns").get<int64_t>();
}

CloudStatsSnapshot ControlClient::snapshot() {
    return snapshot_from_json(request("SNAPSHOT"));
}

void ControlClient::stop_server() {
    request("STOP");
}

} // namespace iotecs
