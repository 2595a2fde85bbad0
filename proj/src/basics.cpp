#include "astral/basics.hpp"

#include <deque>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace astral {

namespace {
struct Interner {
  std::mutex mu;
  std::unordered_map<std::string_view, Sym> index;
  std::deque<std::string> names;  // deque: stable addresses for string_view keys
};
Interner& interner() {
  static Interner it;
  return it;
}
}  // namespace

Sym intern(std::string_view name) {
  Interner& it = interner();
  std::lock_guard<std::mutex> lock(it.mu);
  auto found = it.index.find(name);
  if (found != it.index.end()) return found->second;
  it.names.emplace_back(name);
  Sym s = static_cast<Sym>(it.names.size() - 1);
  it.index.emplace(std::string_view(it.names.back()), s);
  return s;
}

const std::string& sym_name(Sym s) {
  // Reads are safe: entries are append-only and a deque never moves them.
  return interner().names[s];
}

std::string SourceLoc::to_string() const {
  std::ostringstream os;
  os << line << ":" << col;
  return os.str();
}

std::string Diagnostic::render() const {
  std::ostringstream os;
  os << (severity == Severity::Error ? "ERROR" : "WARNING") << " "
     << (file.empty() ? "<input>" : file) << ":" << loc.line << ":" << loc.col
     << " " << code << " " << message;
  return os.str();
}

std::string render_diagnostics(const DiagnosticList& ds) {
  std::string out;
  for (const auto& d : ds) {
    out += d.render();
    out += '\n';
  }
  return out;
}

}  // namespace astral
