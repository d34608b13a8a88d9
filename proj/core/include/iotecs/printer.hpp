// Canonical textual form of a SpecAst. Re-parsing the output yields a
// structurally identical AST.
#pragma once

#include "iotecs/ast.hpp"

#include <string>

namespace iotecs {

std::string pretty_print(const SpecAst& ast);

// Inverse of parse_payload_size_bytes using the largest exact decimal unit.
std::string format_payload_size(int64_t bytes);

} // namespace iotecs
