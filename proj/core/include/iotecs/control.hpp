// Client side of the cloud control channel.
#pragma once

#include "iotecs/cloud.hpp"
#include "iotecs/net.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace iotecs {

struct ControlError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ControlClient {
public:
    // Throws ControlError when the control port is unreachable.
    ControlClient(const std::string& ip, uint16_t port, int timeout_ms = 3000);

    // Sends one command line, returns the parsed JSON reply. Throws
    // ControlError on I/O failure, timeout or an {"ok":false} reply.
    nlohmann::json request(const std::string& cmd);

    int64_t reset_epoch();          // RESET -> server clock ns
    CloudStatsSnapshot snapshot();  // SNAPSHOT
    void stop_server();             // STOP

private:
    Socket sock_;
    LineReader reader_;
    int timeout_ms_;
};

} // namespace iotecs
