// Shared helpers for the unit suites.
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "astral/corpus.hpp"
#include "astral/parser.hpp"

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string fixture(const std::string& name) {
  return std::string(ASTRAL_FIXTURES_DIR) + "/" + name;
}

inline astral::SystemSpec load_system(const std::string& path) {
  return astral::parse_system(read_file(path), path);
}

inline astral::ImplBlock load_block(const std::string& path) {
  return astral::parse_impl_block(read_file(path), path);
}
