#include "iotecs/units.hpp"

#include "iotecs/diagnostics.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace iotecs {

std::string format_diagnostic(const Diagnostic& d, std::string_view file) {
    std::ostringstream os;
    os << file << ':' << d.loc.line << ':' << d.loc.column << ": "
       << (d.severity == Severity::Error ? "error" : "warning") << ": " << d.message;
    return os.str();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

namespace {

void set_error(std::string* error, std::string msg) {
    if (error) *error = std::move(msg);
}

// Splits "123abc" into magnitude and suffix. Returns false on malformed input.
bool split_scaled(std::string_view token, int64_t& magnitude, std::string_view& suffix,
                  std::string* error) {
    if (token.empty()) {
        set_error(error, "empty token");
        return false;
    }
    size_t i = 0;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) i++;
    if (i == 0) {
        set_error(error, "expected integer magnitude in '" + std::string(token) + "'");
        return false;
    }
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + i, magnitude);
    if (ec != std::errc{} || ptr != token.data() + i) {
        set_error(error, "magnitude out of range in '" + std::string(token) + "'");
        return false;
    }
    suffix = token.substr(i);
    return true;
}

std::optional<int64_t> scale_checked(int64_t magnitude, int64_t factor, std::string* error) {
    if (magnitude > INT64_MAX / factor) {
        set_error(error, "value overflows 64-bit nanoseconds");
        return std::nullopt;
    }
    return magnitude * factor;
}

} // namespace

std::optional<int64_t> parse_duration_ns(std::string_view token, std::string* error) {
    int64_t magnitude = 0;
    std::string_view suffix;
    if (!split_scaled(token, magnitude, suffix, error)) return std::nullopt;
    if (suffix.empty()) {
        set_error(error, "missing time unit in '" + std::string(token) + "' (expected ms, s, m or h)");
        return std::nullopt;
    }
    int64_t factor = 0;
    if (suffix == "ms") factor = kNsPerMs;
    else if (suffix == "s") factor = kNsPerSec;
    else if (suffix == "m") factor = kNsPerMin;
    else if (suffix == "h") factor = kNsPerHour;
    else {
        set_error(error, "unknown time unit '" + std::string(suffix) + "' (expected ms, s, m or h)");
        return std::nullopt;
    }
    if (magnitude <= 0) {
        set_error(error, "duration must be strictly positive");
        return std::nullopt;
    }
    return scale_checked(magnitude, factor, error);
}

std::optional<int64_t> parse_duration_flag_ns(std::string_view token, std::string* error) {
    if (token == "0") return 0;
    return parse_duration_ns(token, error);
}

std::optional<int64_t> parse_payload_size_bytes(std::string_view token, std::string* error) {
    int64_t magnitude = 0;
    std::string_view suffix;
    if (!split_scaled(token, magnitude, suffix, error)) return std::nullopt;
    int64_t factor = 0;
    if (suffix == "B") factor = 1;
    else if (suffix == "kB") factor = 1000;
    else if (suffix == "MB") factor = 1000 * 1000;
    else if (suffix.empty()) {
        set_error(error, "missing size unit in '" + std::string(token) + "' (expected B, kB or MB)");
        return std::nullopt;
    } else {
        set_error(error, "unknown size unit '" + std::string(suffix) + "' (expected B, kB or MB)");
        return std::nullopt;
    }
    if (magnitude <= 0) {
        set_error(error, "payload size must be at least 1 byte");
        return std::nullopt;
    }
    return scale_checked(magnitude, factor, error);
}

std::string format_duration_ns(int64_t ns) {
    if (ns == 0) return "0";
    struct Unit { int64_t factor; const char* name; };
    static constexpr Unit units[] = {
        {kNsPerHour, "h"}, {kNsPerMin, "m"}, {kNsPerSec, "s"}, {kNsPerMs, "ms"},
    };
    for (const auto& u : units)
        if (ns % u.factor == 0) return std::to_string(ns / u.factor) + u.name;
    return std::to_string(ns) + "ns";
}

} // namespace iotecs
