// Fixed binary packet header shared by edges and clouds. Big-endian,
// self-delimiting (payload_len makes TCP framing trivial), identical for UDP
// datagrams and TCP streams. The cloud echoes packets back verbatim.
//
// Layout (27 bytes):
//   magic "EC" (2) | version (1) | node_id (2) | edge_id (2) | device_id (2)
//   | step_index (4) | seq (4) | send_timestamp_ns (8) | payload_len (2)
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace iotecs {

inline constexpr uint8_t kMagic0 = 'E';
inline constexpr uint8_t kMagic1 = 'C';
inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kHeaderSize = 27;
inline constexpr size_t kMaxUdpPacket = 65507;
inline constexpr size_t kMaxPayload = 65535;

struct PacketHeader {
    uint16_t node_id = 0;
    uint16_t edge_id = 0;
    uint16_t device_id = 0;
    uint32_t step_index = 0;
    uint32_t seq = 0;
    uint64_t send_timestamp_ns = 0;
    uint16_t payload_len = 0;

    friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

enum class DecodeError {
    Ok,
    Truncated,
    BadMagic,
    BadVersion,
};

const char* to_string(DecodeError e);

// out must have room for kHeaderSize bytes.
void encode_header(const PacketHeader& h, uint8_t* out);

// Validates magic and version. Does not inspect the payload.
DecodeError decode_header(const uint8_t* data, size_t len, PacketHeader& out);

std::vector<uint8_t> encode_packet(const PacketHeader& h, const uint8_t* payload, size_t len);

} // namespace iotecs
