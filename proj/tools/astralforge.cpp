// astralforge: parse, validate, simulate and check refinements of the
// specification subset.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "astral/corpus.hpp"
#include "astral/parser.hpp"

using namespace astral;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AstralError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw AstralError("cannot write " + path);
  out << text;
}

uint64_t default_budget() {
  if (const char* env = std::getenv("ASTRALFORGE_BUDGET"))
    return std::strtoull(env, nullptr, 10);
  return 200000;
}

int cmd_parse(const std::string& file) {
  std::string text = read_file(file);
  if (classify_source(text) == SourceKind::ImplBlockText) {
    ImplBlock b = parse_impl_block(text, file);
    std::cout << render_impl_block(b);
  } else {
    SystemSpec s = parse_system(text, file);
    std::cout << render_system(s);
  }
  return 0;
}

int cmd_validate(const std::string& file) {
  std::string text = read_file(file);
  if (classify_source(text) == SourceKind::ImplBlockText) {
    // impl blocks validate against their upper level; standalone validation
    // is parse-only
    parse_impl_block(text, file);
    std::cout << "OK (parsed; mapping restrictions are checked against an "
                 "upper level by `check`)\n";
    return 0;
  }
  SystemSpec s = parse_system(text, file);
  DiagnosticList ds = validate_spec(s);
  std::cout << render_diagnostics(ds);
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return 1;
  std::cout << "OK\n";
  return 0;
}

int cmd_simulate(const std::string& spec_file, const std::string& sched_file,
                 int horizon, uint64_t seed, uint64_t budget) {
  SystemSpec s = parse_system(read_file(spec_file), spec_file);
  DiagnosticList ds = validate_spec(s);
  for (const auto& d : ds)
    if (d.severity == Severity::Error) {
      std::cerr << render_diagnostics(ds);
      return 2;
    }
  EnvSchedule sched;
  if (!sched_file.empty()) sched = parse_schedule(read_file(sched_file), sched_file);
  EvalBounds eb;
  eb.horizon = horizon;
  auto sys = compile_system(s, eb);
  ExploreResult res = explore(sys, sched, horizon, budget);
  if (res.traces.empty()) {
    std::cerr << "no traces\n";
    return 1;
  }
  // one trace per invocation: the seed picks among the explored branches
  std::mt19937_64 rng(seed);
  size_t pick = seed == 0 ? 0 : rng() % res.traces.size();
  std::cout << dump_trace(res.traces[pick]);
  if (!res.complete) std::cerr << "WARNING: state budget exceeded; partial result\n";
  return 0;
}

ResolvedImpl load_triple(const std::string& upper_file, const std::string& lower_file,
                         const std::string& map_file, SystemSpec& upper,
                         SystemSpec& lower, ImplBlock& block) {
  upper = parse_system(read_file(upper_file), upper_file);
  lower = parse_system(read_file(lower_file), lower_file);
  block = parse_impl_block(read_file(map_file), map_file);
  for (const SystemSpec* s : {&upper, &lower}) {
    DiagnosticList ds = validate_spec(*s);
    for (const auto& d : ds)
      if (d.severity == Severity::Error)
        throw AstralError(s->source_file + ": " + d.render());
  }
  return resolve_impl(block, upper, lower);
}

int cmd_obligations(const std::string& upper_file, const std::string& lower_file,
                    const std::string& map_file, bool sequential,
                    const std::string& out_dir, bool emit_rewrite_trace) {
  SystemSpec upper, lower;
  ImplBlock block;
  ResolvedImpl ri = load_triple(upper_file, lower_file, map_file, upper, lower, block);
  DiagnosticList wf = check_impl_wellformed(ri);
  if (!wf.empty()) {
    std::cerr << render_diagnostics(wf);
    return 2;
  }
  ObligationSet obls;
  if (sequential) {
    for (const auto& [trn, ss] : ri.seq_sel) {
      ObligationSet one = gen_sequential(ri, trn);
      for (auto& o : one.obligations) obls.obligations.push_back(std::move(o));
    }
  } else {
    obls = gen_parallel(ri);
  }
  std::filesystem::create_directories(out_dir);
  for (const auto& o : obls.obligations) {
    write_file(out_dir + "/" + obl_filename(o), render_obligation(o));
    std::cout << obl_filename(o) << "\n";
  }
  if (emit_rewrite_trace) {
    RewriteTrace rt;
    rewrite(ri.upper->invariant, ri, &rt);
    write_file(out_dir + "/invariant.rewrite-trace", rt.render());
  }
  return 0;
}

int run_check(const ResolvedImpl& ri, const CheckBounds& bounds, bool sequential,
              const std::string& out_dir) {
  Report rep = check_refinement(ri, bounds, sequential);
  std::filesystem::create_directories(out_dir);
  for (auto& [o, v] : rep.results) {
    if (v.status == VerdictStatus::Violated && v.counterexample) {
      std::string fname = std::string("cex_") + schema_name(o.schema) + "__" +
                          (o.transition ? sym_name(o.transition) : "system") +
                          ".trace";
      write_file(out_dir + "/" + fname, dump_trace(*v.counterexample));
      v.trace_file = fname;
    }
  }
  std::cout << rep.render(true);
  write_file(out_dir + "/report.json", rep.to_json());
  if (!rep.complete) return 2;
  return rep.all_hold() ? 0 : 1;
}

int cmd_check(const std::string& upper_file, const std::string& lower_file,
              const std::string& map_file, const CheckBounds& bounds, bool sequential,
              const std::string& out_dir) {
  SystemSpec upper, lower;
  ImplBlock block;
  ResolvedImpl ri = load_triple(upper_file, lower_file, map_file, upper, lower, block);
  return run_check(ri, bounds, sequential, out_dir);
}

int cmd_corpus_run(const std::string& name, const std::string& out_dir) {
  std::vector<std::string> names =
      name == "all" ? corpus_names() : std::vector<std::string>{name};
  int rc = 0;
  for (const auto& n : names) {
    std::cout << "== corpus " << n << " ==\n";
    CorpusEntry e = load_corpus(n);
    ResolvedImpl ri = resolve_impl(e.block, e.upper, e.lower);
    int one = run_check(ri, e.bounds, false, out_dir + "/" + n);
    bool ok = (one == 0) == e.expect_all_hold;
    std::cout << "corpus " << n << (ok ? " as-expected\n" : " UNEXPECTED\n");
    if (!ok) rc = 1;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded refinement checking for a real-time specification subset"};
  app.require_subcommand(1);
  bool emit_rewrite_trace = false;
  app.add_flag("--emit-rewrite-trace", emit_rewrite_trace,
               "dump rewrite traces beside generated obligations");

  std::string file;
  auto* parse_cmd = app.add_subcommand("parse", "parse a file and print it canonically");
  parse_cmd->add_option("file", file)->required();

  auto* validate_cmd = app.add_subcommand("validate", "parse and validate a file");
  validate_cmd->add_option("file", file)->required();

  std::string spec_file, sched_file, upper_file, lower_file, map_file;
  std::string out_dir = "out";
  int horizon = 8;
  uint64_t seed = 0;
  uint64_t budget = default_budget();
  auto* sim_cmd = app.add_subcommand("simulate", "explore one schedule and dump a trace");
  sim_cmd->add_option("--spec", spec_file)->required();
  sim_cmd->add_option("--sched", sched_file);
  sim_cmd->add_option("--horizon", horizon);
  sim_cmd->add_option("--seed", seed);
  sim_cmd->add_option("--budget", budget);

  bool sequential = false;
  auto* obl_cmd = app.add_subcommand("obligations", "generate .obl files");
  obl_cmd->add_option("--upper", upper_file)->required();
  obl_cmd->add_option("--lower", lower_file)->required();
  obl_cmd->add_option("--map", map_file)->required();
  obl_cmd->add_flag("--sequential", sequential);
  obl_cmd->add_option("--out", out_dir);

  CheckBounds bounds;
  bounds.state_budget = default_budget();
  auto* check_cmd = app.add_subcommand("check", "bounded refinement check");
  check_cmd->add_option("--upper", upper_file)->required();
  check_cmd->add_option("--lower", lower_file)->required();
  check_cmd->add_option("--map", map_file)->required();
  check_cmd->add_option("--horizon", bounds.horizon);
  check_cmd->add_option("--max-calls", bounds.max_calls);
  check_cmd->add_option("--window-lo", bounds.window_lo);
  check_cmd->add_option("--window-hi", bounds.window_hi);
  check_cmd->add_option("--param-lo", bounds.param_lo);
  check_cmd->add_option("--param-hi", bounds.param_hi);
  check_cmd->add_option("--budget", bounds.state_budget);
  check_cmd->add_option("--threads", bounds.threads);
  check_cmd->add_flag("--sequential", sequential);
  check_cmd->add_option("--out", out_dir);

  std::string corpus_name;
  auto* corpus_cmd = app.add_subcommand("corpus", "run shipped corpus entries");
  auto* corpus_run = corpus_cmd->add_subcommand("run", "check one entry or all");
  corpus_run->add_option("name", corpus_name)->required();
  corpus_run->add_option("--out", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse_cmd) return cmd_parse(file);
    if (*validate_cmd) return cmd_validate(file);
    if (*sim_cmd) return cmd_simulate(spec_file, sched_file, horizon, seed, budget);
    if (*obl_cmd)
      return cmd_obligations(upper_file, lower_file, map_file, sequential, out_dir,
                             emit_rewrite_trace);
    if (*check_cmd)
      return cmd_check(upper_file, lower_file, map_file, bounds, sequential, out_dir);
    if (*corpus_cmd) return cmd_corpus_run(corpus_name, out_dir);
  } catch (const AstralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
