// Unit parsing for durations and payload sizes. Exact integer arithmetic only.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace iotecs {

inline constexpr int64_t kNsPerUs = 1000;
inline constexpr int64_t kNsPerMs = 1000 * 1000;
inline constexpr int64_t kNsPerSec = 1000 * 1000 * 1000;
inline constexpr int64_t kNsPerMin = 60 * kNsPerSec;
inline constexpr int64_t kNsPerHour = 60 * kNsPerMin;

// "500ms" -> 500000000. Units: ms, s, m, h. Magnitude must be a positive
// integer; rejects zero, missing unit, unknown unit, and overflow.
std::optional<int64_t> parse_duration_ns(std::string_view token, std::string* error = nullptr);

// Same grammar as parse_duration_ns but additionally accepts a bare "0"
// (used by CLI flags such as --compute 0).
std::optional<int64_t> parse_duration_flag_ns(std::string_view token, std::string* error = nullptr);

// "8B" -> 8, "1kB" -> 1000, "1MB" -> 1000000. Units are decimal (SI):
// kB = 1000 B and MB = 1000 kB, NOT 1024-based. Rejects zero sizes.
std::optional<int64_t> parse_payload_size_bytes(std::string_view token, std::string* error = nullptr);

// Renders ns using the largest unit that divides it exactly: 2000000000 -> "2s".
std::string format_duration_ns(int64_t ns);

} // namespace iotecs
