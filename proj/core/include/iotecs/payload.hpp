// Payload generation: literal payloads verbatim, size-form payloads as
// deterministic pseudo-random bytes derived from the run seed and the
// instance IDs.
#pragma once

#include "iotecs/topology.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace iotecs {

// Mixes the run seed with the (node, edge, device) triple so every device
// gets an independent, reproducible stream.
std::mt19937_64 device_rng(uint64_t run_seed, uint16_t node_id, uint16_t edge_id,
                           uint16_t device_id);

std::vector<uint8_t> make_payload(const DeviceInstance& dev, std::mt19937_64& rng);

} // namespace iotecs
