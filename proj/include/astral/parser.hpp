// Recursive-descent parser for the specification subset.
#pragma once

#include <string_view>

#include "astral/spec.hpp"

namespace astral {

enum class SourceKind { System, ImplBlockText };

// Determined by the leading keyword: GLOBAL SPECIFICATION vs IMPLEMENTATION.
SourceKind classify_source(std::string_view text);

// All throw AstralError with line/column and an expected-token set on
// malformed input; duplicate declarations / duplicate mappings are errors.
SystemSpec parse_system(std::string_view text, const std::string& file = "");
ImplBlock parse_impl_block(std::string_view text, const std::string& file = "");
EnvSchedule parse_schedule(std::string_view text, const std::string& file = "");

// Single-expression entry point used by tests and golden files.
ExprPtr parse_expr_text(std::string_view text, const std::string& file = "");

}  // namespace astral
