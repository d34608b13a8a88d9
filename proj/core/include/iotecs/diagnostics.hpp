// Located diagnostics shared by the frontend and the static checks.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace iotecs {

enum class Severity { Error, Warning };

// 1-based position in the source text; {0,0} means "no location".
struct SourceLoc {
    int line = 0;
    int column = 0;
};

struct Diagnostic {
    Severity severity = Severity::Error;
    SourceLoc loc;
    std::string message;
};

inline Diagnostic error_at(SourceLoc loc, std::string message) {
    return Diagnostic{Severity::Error, loc, std::move(message)};
}

inline Diagnostic warning_at(SourceLoc loc, std::string message) {
    return Diagnostic{Severity::Warning, loc, std::move(message)};
}

// "file:line:col: severity: message"
std::string format_diagnostic(const Diagnostic& d, std::string_view file);

bool has_errors(const std::vector<Diagnostic>& diags);

} // namespace iotecs
