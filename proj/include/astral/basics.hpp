// Shared primitives: interned symbols, source locations, diagnostics.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace astral {

// Interned identifier. Symbols are process-wide and never freed; lookups
// after interning are lock-free.
using Sym = uint32_t;

Sym intern(std::string_view name);
const std::string& sym_name(Sym s);

struct SourceLoc {
  int line = 0;  // 1-based; 0 = unknown
  int col = 0;
  std::string to_string() const;
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string file;
  SourceLoc loc;
  std::string code;  // short stable identifier, e.g. "duration-non-null"
  std::string message;

  // Line-oriented form: `SEVERITY file:line:col CODE message`
  std::string render() const;
};

using DiagnosticList = std::vector<Diagnostic>;

std::string render_diagnostics(const DiagnosticList& ds);

// Hard failure during parsing/evaluation. Diagnostics are preferred for
// anything the caller is expected to enumerate; errors are for misuse and
// unevaluable inputs.
struct AstralError : std::runtime_error {
  SourceLoc loc;
  explicit AstralError(const std::string& msg, SourceLoc where = {})
      : std::runtime_error(msg), loc(where) {}
};

}  // namespace astral
