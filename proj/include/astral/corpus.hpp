// The shipped example corpus and its expected verdicts.
#pragma once

#include "astral/checker.hpp"

namespace astral {

struct CorpusEntry {
  std::string name;
  std::string upper_file;
  std::string lower_file;
  std::string impl_file;
  CheckBounds bounds;          // recommended check bounds
  CheckBounds corr_bounds;     // reduced bounds for the correspondence pass
  bool expect_all_hold = true;
  std::string provenance;  // which case study this reproduces

  SystemSpec upper;
  SystemSpec lower;
  ImplBlock block;
};

// Root of the corpus directory: the ASTRALFORGE_CORPUS environment variable
// when set, else the build-time default.
std::string corpus_root();

// name in {mult_add, production_cell, phone_l1_parallel, central_sequential}.
// Parses and validates all three files and checks the corpus-wide pacing
// constraint (2 * serve_dur divides every service duration).
CorpusEntry load_corpus(const std::string& name);

std::vector<std::string> corpus_names();

}  // namespace astral
