#include <doctest.h>

#include "test_util.hpp"

using namespace astral;

TEST_CASE("the circuit upper level parses to the expected shape") {
  SystemSpec s = load_system(corpus_root() + "/mult_add/upper.ast");
  CHECK(sym_name(s.name) == "MA_Circuit");
  REQUIRE(s.instances.size() == 1);
  CHECK(sym_name(s.instances[0].name) == "the_mult_add");
  REQUIRE(s.levels.size() == 1);
  const ProcessLevel& p = s.levels[0];
  CHECK(p.exports.size() == 2);
  REQUIRE(p.constants.size() == 1);
  CHECK(sym_name(p.constants[0].name) == "dur1");
  REQUIRE(p.transitions.size() == 1);
  const TransitionDecl& tr = p.transitions[0];
  CHECK(sym_name(tr.name) == "compute");
  CHECK(tr.params.size() == 4);
  CHECK(tr.exported);
  CHECK(render_expr(tr.exit) == "output = a * b + c * d");
  CHECK(validate_spec(s).empty());
}

TEST_CASE("the circuit lower level parses; the adder entry is the paper's") {
  SystemSpec s = load_system(corpus_root() + "/mult_add/lower.ast");
  const ProcessLevel* adder = s.find_level(intern("Adder"));
  REQUIRE(adder);
  REQUIRE(adder->transitions.size() == 1);
  CHECK(render_expr(adder->transitions[0].entry) ==
        "M1.End(multiply, now) & M2.End(multiply, now)");
  CHECK(validate_spec(s).empty());
}

TEST_CASE("impl blocks parse into classified map entries") {
  ImplBlock b = load_block(corpus_root() + "/mult_add/map.imp");
  CHECK(sym_name(b.of_process) == "Mult_Add");
  CHECK(b.processes.size() == 3);
  int starts = 0, ends = 0, calls = 0, plains = 0;
  for (const auto& e : b.entries) {
    if (e.kind == MapKind::TransStart) ++starts;
    if (e.kind == MapKind::TransEnd) ++ends;
    if (e.kind == MapKind::TransCall) {
      ++calls;
      CHECK(e.params.size() == 4);
    }
    if (e.kind == MapKind::Plain) ++plains;
  }
  CHECK(starts == 1);
  CHECK(ends == 1);
  CHECK(calls == 1);
  CHECK(plains == 2);  // output, dur1
}

TEST_CASE("gate-style constant case maps parse") {
  ImplBlock b = parse_impl_block(
      "IMPLEMENTATION g OF Gate\n"
      "PROCESSES GL: GateL\n"
      "IMPL(gate_u) == gate_l\n"
      "IMPL(c: gate_u) == CASE c OF\n"
      "  open: choose e: gate_l (e = open | e = opening | e = closing)\n"
      "  closed: closed\n"
      "ESAC\n");
  REQUIRE(b.entries.size() == 2);
  CHECK(b.entries[1].kind == MapKind::ConstCase);
  CHECK(b.entries[1].case_arms.size() == 2);
}

TEST_CASE("duplicate mappings and declarations are rejected") {
  CHECK_THROWS_WITH_AS(
      parse_impl_block("IMPLEMENTATION m OF P\n"
                       "IMPL(output) == A1.sum\nIMPL(output) == A1.sum\n"),
      doctest::Contains("duplicate mapping"), AstralError);
  CHECK_THROWS_AS(parse_system("GLOBAL SPECIFICATION S\nPROCESS P\n"
                               "VARIABLE x: integer, x: integer\n"),
                  AstralError);
}

TEST_CASE("empty input fails at 1:1") {
  try {
    parse_system("");
    FAIL("expected a syntax error");
  } catch (const AstralError& e) {
    CHECK(std::string(e.what()).find("1:1") != std::string::npos);
  }
}

TEST_CASE("system specs render and reparse to equal structures") {
  for (const char* f :
       {"/mult_add/upper.ast", "/mult_add/lower.ast", "/production_cell/upper.ast",
        "/production_cell/lower.ast", "/phone_l1/central_top.ast",
        "/phone_l1/servers.ast", "/central_seq/central_seq.ast"}) {
    CAPTURE(f);
    SystemSpec s1 = load_system(corpus_root() + f);
    std::string text = render_system(s1);
    SystemSpec s2 = parse_system(text, "rendered");
    CHECK(render_system(s2) == text);
  }
}

TEST_CASE("impl blocks render and reparse") {
  for (const char* f : {"/mult_add/map.imp", "/production_cell/map.imp",
                        "/phone_l1/phone_map.imp", "/central_seq/central_seq_map.imp"}) {
    CAPTURE(f);
    ImplBlock b1 = load_block(corpus_root() + f);
    std::string text = render_impl_block(b1);
    ImplBlock b2 = parse_impl_block(text, "rendered");
    CHECK(render_impl_block(b2) == text);
  }
}

TEST_CASE("schedules parse and normalize") {
  EnvSchedule s = parse_schedule(
      "AT 2 CALL M2.multiply(3, 4)\n"
      "AT 0 CALL M1.multiply(1, 2)\n"
      "AT 0 CALL p1.Flip_Hook()\n");
  REQUIRE(s.calls.size() == 3);
  CHECK(s.calls[0].tick == 0);
  CHECK(sym_name(s.calls[0].instance) == "M1");
  CHECK(s.calls[2].tick == 2);
}

TEST_CASE("validation reports the spec's named defects") {
  // duration 0
  SystemSpec s = parse_system(
      "GLOBAL SPECIFICATION S\nPROCESSES a: P\nPROCESS P\n"
      "VARIABLE output: integer\n"
      "TRANSITION compute\nENTRY [TIME: 0] TRUE\nEXIT output = 1\n");
  DiagnosticList ds = validate_spec(s);
  bool dur = false;
  for (const auto& d : ds) dur = dur || d.code == "duration-non-null";
  CHECK(dur);

  // undeclared name in an exit
  s = parse_system(
      "GLOBAL SPECIFICATION S\nPROCESSES a: P\nPROCESS P\n"
      "VARIABLE output: integer\n"
      "TRANSITION compute\nENTRY [TIME: 1] TRUE\nEXIT outpt = 1\n");
  ds = validate_spec(s);
  bool unresolved = false;
  for (const auto& d : ds) unresolved = unresolved || d.code == "unresolved-name";
  CHECK(unresolved);

  // primed reference in an entry
  s = parse_system(
      "GLOBAL SPECIFICATION S\nPROCESSES a: P\nPROCESS P\n"
      "VARIABLE output: integer\n"
      "TRANSITION compute\nENTRY [TIME: 1] output' = 1\nEXIT output = 1\n");
  ds = validate_spec(s);
  bool primed = false;
  for (const auto& d : ds) primed = primed || d.code == "primed-in-entry";
  CHECK(primed);

  CHECK(validate_spec(load_system(fixture("seq_upper.ast"))).empty());
  CHECK(validate_spec(load_system(fixture("seq_lower.ast"))).empty());
  CHECK(validate_spec(load_system(fixture("sel_upper.ast"))).empty());
  CHECK(validate_spec(load_system(fixture("sel_lower.ast"))).empty());
}

TEST_CASE("validation is deterministic") {
  SystemSpec s = parse_system(
      "GLOBAL SPECIFICATION S\nPROCESSES a: P\nPROCESS P\n"
      "VARIABLE output: integer\n"
      "TRANSITION compute\nENTRY [TIME: 0] zz = 1\nEXIT outpt = 1\n");
  DiagnosticList d1 = validate_spec(s);
  DiagnosticList d2 = validate_spec(s);
  CHECK(render_diagnostics(d1) == render_diagnostics(d2));
  CHECK(d1.size() >= 2);
}
