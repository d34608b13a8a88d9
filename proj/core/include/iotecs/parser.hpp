// Parser for .iotecs documents: keyword-field blocks, free field order,
// each field at most once. Never throws on bad input — collects located
// diagnostics instead.
#pragma once

#include "iotecs/ast.hpp"
#include "iotecs/diagnostics.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace iotecs {

struct ParseResult {
    std::optional<SpecAst> ast; // set iff no error diagnostics
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return ast.has_value(); }
};

ParseResult parse(std::string_view source);

} // namespace iotecs
