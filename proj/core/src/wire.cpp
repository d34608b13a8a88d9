#include "iotecs/wire.hpp"

#include <cstring>

namespace iotecs {

const char* to_string(DecodeError e) {
    switch (e) {
    case DecodeError::Ok: return "ok";
    case DecodeError::Truncated: return "truncated";
    case DecodeError::BadMagic: return "bad magic";
    case DecodeError::BadVersion: return "bad version";
    }
    return "?";
}

namespace {

void put_u16(uint8_t*& p, uint16_t v) {
    *p++ = static_cast<uint8_t>(v >> 8);
    *p++ = static_cast<uint8_t>(v);
}
void put_u32(uint8_t*& p, uint32_t v) {
    *p++ = static_cast<uint8_t>(v >> 24);
    *p++ = static_cast<uint8_t>(v >> 16);
    *p++ = static_cast<uint8_t>(v >> 8);
    *p++ = static_cast<uint8_t>(v);
}
void put_u64(uint8_t*& p, uint64_t v) {
    put_u32(p, static_cast<uint32_t>(v >> 32));
    put_u32(p, static_cast<uint32_t>(v));
}
uint16_t get_u16(const uint8_t*& p) {
    uint16_t v = static_cast<uint16_t>(p[0] << 8 | p[1]);
    p += 2;
    return v;
}
uint32_t get_u32(const uint8_t*& p) {
    uint32_t v = static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
                 static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
    p += 4;
    return v;
}
uint64_t get_u64(const uint8_t*& p) {
    uint64_t hi = get_u32(p);
    return hi << 32 | get_u32(p);
}

} // namespace

void encode_header(const PacketHeader& h, uint8_t* out) {
    uint8_t* p = out;
    *p++ = kMagic0;
    *p++ = kMagic1;
    *p++ = kWireVersion;
    put_u16(p, h.node_id);
    put_u16(p, h.edge_id);
    put_u16(p, h.device_id);
    put_u32(p, h.step_index);
    put_u32(p, h.seq);
    put_u64(p, h.send_timestamp_ns);
    put_u16(p, h.payload_len);
}

DecodeError decode_header(const uint8_t* data, size_t len, PacketHeader& out) {
    if (len < kHeaderSize) return DecodeError::Truncated;
    if (data[0] != kMagic0 || data[1] != kMagic1) return DecodeError::BadMagic;
    if (data[2] != kWireVersion) return DecodeError::BadVersion;
    const uint8_t* p = data + 3;
    out.node_id = get_u16(p);
    out.edge_id = get_u16(p);
    out.device_id = get_u16(p);
    out.step_index = get_u32(p);
    out.seq = get_u32(p);
    out.send_timestamp_ns = get_u64(p);
    out.payload_len = get_u16(p);
    return DecodeError::Ok;
}

std::vector<uint8_t> encode_packet(const PacketHeader& h, const uint8_t* payload, size_t len) {
    std::vector<uint8_t> out(kHeaderSize + len);
    PacketHeader withLen = h;
    withLen.payload_len = static_cast<uint16_t>(len);
    encode_header(withLen, out.data());
    if (len) std::memcpy(out.data() + kHeaderSize, payload, len);
    return out;
}

} // namespace iotecs
