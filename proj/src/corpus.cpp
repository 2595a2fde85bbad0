#include "astral/corpus.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "astral/parser.hpp"

namespace astral {

std::string corpus_root() {
  if (const char* env = std::getenv("ASTRALFORGE_CORPUS")) return env;
#ifdef ASTRAL_CORPUS_DIR
  return ASTRAL_CORPUS_DIR;
#else
  return "corpus";
#endif
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AstralError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void expect_clean(const std::string& what, const DiagnosticList& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error)
      throw AstralError(what + " is not well-formed: " + d.render());
}

// 2 * serve_dur must divide the duration of every service function.
void check_pacing(const SystemSpec& sys) {
  int64_t serve_dur = -1;
  for (const auto& c : sys.global_consts)
    if (sym_name(c.name) == "serve_dur" && c.value &&
        c.value->kind == ExKind::Lit)
      serve_dur = c.value->lit.as_int();
  if (serve_dur < 0) return;
  for (const auto& c : sys.global_consts) {
    const std::string n = sym_name(c.name);
    if (n.rfind("Dur_", 0) != 0 || c.params.size() > 0) continue;
    if (!c.value || c.value->kind != ExKind::Lit) continue;
    int64_t d = c.value->lit.as_int();
    if (d % (2 * serve_dur) != 0)
      throw AstralError("corpus pacing constraint violated: " + n + " = " +
                        std::to_string(d) + " is not a multiple of 2 * serve_dur");
  }
}

}  // namespace

std::vector<std::string> corpus_names() {
  return {"mult_add", "production_cell", "phone_l1_parallel", "central_sequential"};
}

CorpusEntry load_corpus(const std::string& name) {
  CorpusEntry e;
  e.name = name;
  const std::string root = corpus_root();
  if (name == "mult_add") {
    e.upper_file = root + "/mult_add/upper.ast";
    e.lower_file = root + "/mult_add/lower.ast";
    e.impl_file = root + "/mult_add/map.imp";
    e.bounds.horizon = 8;
    e.bounds.max_calls = 2;
    e.bounds.window_lo = 0;
    e.bounds.window_hi = 2;
    e.bounds.param_lo = -2;
    e.bounds.param_hi = 2;
    e.corr_bounds = e.bounds;
    e.corr_bounds.max_calls = 1;
    e.corr_bounds.param_lo = -1;
    e.corr_bounds.param_hi = 1;
    e.provenance = "multiply-add circuit refined into two multipliers and an adder";
  } else if (name == "production_cell") {
    e.upper_file = root + "/production_cell/upper.ast";
    e.lower_file = root + "/production_cell/lower.ast";
    e.impl_file = root + "/production_cell/map.imp";
    e.bounds.horizon = 10;
    e.bounds.max_calls = 0;
    e.bounds.window_lo = 0;
    e.bounds.window_hi = 0;
    e.corr_bounds = e.bounds;
    e.provenance = "staggered production cells producing an item every tick";
  } else if (name == "phone_l1_parallel") {
    e.upper_file = root + "/phone_l1/central_top.ast";
    e.lower_file = root + "/phone_l1/servers.ast";
    e.impl_file = root + "/phone_l1/phone_map.imp";
    e.bounds.horizon = 12;
    e.bounds.max_calls = 3;
    e.bounds.window_lo = 0;
    e.bounds.window_hi = 2;
    e.bounds.param_lo = 1;
    e.bounds.param_hi = 3;
    e.corr_bounds = e.bounds;
    e.corr_bounds.max_calls = 2;
    e.provenance =
        "phone central control split into one server per service function";
  } else if (name == "central_sequential") {
    e.upper_file = root + "/central_seq/../phone_l1/central_top.ast";
    e.lower_file = root + "/central_seq/central_seq.ast";
    e.impl_file = root + "/central_seq/central_seq_map.imp";
    e.bounds.horizon = 12;
    e.bounds.max_calls = 3;
    e.bounds.window_lo = 0;
    e.bounds.window_hi = 2;
    e.bounds.param_lo = 1;
    e.bounds.param_hi = 3;
    e.corr_bounds = e.bounds;
    e.corr_bounds.max_calls = 2;
    e.provenance = "phone central control granted sequentially, one service at "
                   "a time";
  } else {
    throw AstralError("unknown corpus name: " + name);
  }

  e.upper = parse_system(read_file(e.upper_file), e.upper_file);
  e.lower = parse_system(read_file(e.lower_file), e.lower_file);
  e.block = parse_impl_block(read_file(e.impl_file), e.impl_file);
  expect_clean(e.upper_file, validate_spec(e.upper));
  expect_clean(e.lower_file, validate_spec(e.lower));
  check_pacing(e.upper);
  check_pacing(e.lower);
  return e;
}

}  // namespace astral
