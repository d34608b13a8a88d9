#include "iotecs/payload.hpp"

namespace iotecs {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

std::mt19937_64 device_rng(uint64_t run_seed, uint16_t node_id, uint16_t edge_id,
                           uint16_t device_id) {
    uint64_t ids = static_cast<uint64_t>(node_id) << 32 | static_cast<uint64_t>(edge_id) << 16 |
                   device_id;
    return std::mt19937_64(splitmix64(run_seed) ^ splitmix64(ids));
}

std::vector<uint8_t> make_payload(const DeviceInstance& dev, std::mt19937_64& rng) {
    if (dev.payload.is_literal) return dev.payload.literal;
    std::vector<uint8_t> bytes(static_cast<size_t>(dev.payload.size_bytes));
    size_t i = 0;
    while (i < bytes.size()) {
        uint64_t word = rng();
        for (int b = 0; b < 8 && i < bytes.size(); b++) {
            bytes[i++] = static_cast<uint8_t>(word);
            word >>= 8;
        }
    }
    return bytes;
}

} // namespace iotecs
