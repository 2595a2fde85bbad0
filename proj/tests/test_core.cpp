#include <doctest.h>

#include "test_util.hpp"

using namespace astral;

TEST_CASE("value ordering and rendering") {
  Value a = Value::integer(3);
  Value b = Value::integer(-1);
  CHECK(b < a);
  CHECK(render_value(a) == "3");
  CHECK(render_value(Value::boolean(true)) == "TRUE");
  Value s = Value::set({Value::integer(2), Value::integer(1), Value::integer(2)});
  CHECK(render_value(s) == "{1, 2}");
  CHECK(s == Value::set({Value::integer(1), Value::integer(2)}));
  Value l = Value::list({Value::integer(2), Value::integer(1)});
  CHECK(render_value(l) == "[2, 1]");
  CHECK(compare_values(s, l) != 0);
  StructVal sv;
  sv.fields.emplace_back(intern("f1"), Value::integer(0));
  sv.fields.emplace_back(intern("f2"), Value::integer(7));
  CHECK(render_value(Value::structure(sv)) == "(f1: 0, f2: 7)");
}

TEST_CASE("expression rendering uses minimal parentheses") {
  ExprPtr e = parse_expr_text("a * b + c * d");
  CHECK(render_expr(e) == "a * b + c * d");
  e = parse_expr_text("(a + b) * c");
  CHECK(render_expr(e) == "(a + b) * c");
  e = parse_expr_text("a & (b | c) -> d");
  CHECK(render_expr(e) == "a & (b | c) -> d");
  e = parse_expr_text("~ (a & b)");
  CHECK(render_expr(e) == "~(a & b)");
  e = parse_expr_text("choose e: T (P(e))");
  CHECK(render_expr(e) == "choose e: T (P(e))");
}

TEST_CASE("expression round trips") {
  const char* samples[] = {
      "past(output, t2) = a * b + c * d",
      "FORALL t1: time, a, b: integer (Start(compute(a, b), t1) -> a <= b)",
      "M1.End(multiply, now) & M2.End(multiply, now)",
      "now - End(multiply) >= 1",
      "s SET_DIFF serving_set = s",
      "SETDEF P: Phone (P.Offhook & Phone_State(P) = Idle)",
      "IF now MOD 2 = 0 THEN PL1.Start(produce, now) ELSE PL2.Start(produce, now) FI",
      "x ~ISIN serving_set",
      "STRUCTDEF(Idle: 0, Ready_To_Dial: GDT.Ready_To_Dial(P))",
      "CASE c OF open: choose e: gate_l (e = open | e = opening) closed: closed ESAC",
      "{1, 2, 3} SUBSET v_s",
      "LISTDEF(1, 2)[i] = v_l[i]",
      "Number(P) BECOMES Number'(P) CONCAT LISTDEF(P.Next_Digit')",
      "a -> b -> c",
      "a <-> b & c",
  };
  for (const char* s : samples) {
    CAPTURE(s);
    ExprPtr e1 = parse_expr_text(s);
    std::string r1 = render_expr(e1);
    ExprPtr e2 = parse_expr_text(r1);
    CHECK(expr_equal(e1, e2));
    CHECK(render_expr(e2) == r1);
  }
}

TEST_CASE("alpha equivalence ignores bound names only") {
  ExprPtr a = parse_expr_text("FORALL t1: time (past(End(add, t1), t1) -> t1 >= 3)");
  ExprPtr b = parse_expr_text("FORALL u: time (past(End(add, u), u) -> u >= 3)");
  ExprPtr c = parse_expr_text("FORALL t1: time (past(End(add, t1), t1) -> t1 >= 4)");
  CHECK(alpha_equal(a, b));
  CHECK(!alpha_equal(a, c));
  // free names must match exactly
  ExprPtr d = parse_expr_text("x + 1");
  ExprPtr e = parse_expr_text("y + 1");
  CHECK(!alpha_equal(d, e));
}

TEST_CASE("connective flattening absorbs TRUE and splices chains") {
  ExprPtr e = parse_expr_text("(a & TRUE) & (b & c)");
  ExprPtr f = flatten_connectives(e);
  CHECK(render_expr(f) == "a & b & c");
  e = parse_expr_text("FALSE | x");
  CHECK(render_expr(flatten_connectives(e)) == "x");
  e = parse_expr_text("x & FALSE");
  CHECK(render_expr(flatten_connectives(e)) == "FALSE");
}

TEST_CASE("past normalization pushes anchors to atoms") {
  ExprPtr e = mk::past(parse_expr_text("M1.Start(multiply, now) & output = 3"),
                       parse_expr_text("t1"));
  ExprPtr n = normalize_past(e);
  CHECK(render_expr(n) == "past(M1.Start(multiply, t1), t1) & past(output, t1) = 3");
  // bound variables stay bare
  ExprPtr q = mk::quant(true, {{intern("a"), TypeExpr::builtin_type(Builtin::Integer)}},
                        mk::past(parse_expr_text("output = a"), parse_expr_text("t1")));
  CHECK(render_expr(normalize_past(q)) ==
        "FORALL a: integer (past(output, t1) = a)");
}

TEST_CASE("substitution avoids capture") {
  ExprPtr body = parse_expr_text("EXISTS x: integer (x > y)");
  ExprPtr out = substitute_names(body, {{intern("y"), parse_expr_text("x + 1")}});
  // the binder must have been freshened
  CHECK(out->binders[0].name != intern("x"));
  CHECK(render_expr(out).find("x + 1") != std::string::npos);
}

TEST_CASE("type compatibility follows the six clauses") {
  SystemSpec empty;
  TypeEnv env = type_env_of(empty, nullptr);
  auto en = [](std::vector<const char*> cs) {
    std::vector<Sym> xs;
    for (auto c : cs) xs.push_back(intern(c));
    return TypeExpr::enumerated(xs);
  };
  TypeRef e12a = en({"e1", "e2"});
  TypeRef e12b = en({"e1", "e2"});
  CHECK(compatible(e12a, e12b, env, env).compatible);

  TypeRef lr = TypeExpr::list_of(TypeExpr::builtin_type(Builtin::Real));
  TypeRef li = TypeExpr::list_of(TypeExpr::builtin_type(Builtin::Integer));
  CHECK(compatible(lr, li, env, env).compatible);

  // undefined upper type is compatible with anything
  CHECK(compatible(TypeExpr::undefined(intern("T")), li, env, env).compatible);

  // lower typedef of a compatible base
  TypeRef td = TypeExpr::typedef_alias(intern("l"), li, parse_expr_text("TRUE"));
  CHECK(compatible(lr, td, env, env).compatible);

  CHECK(!compatible(en({"open", "closed"}),
                    en({"open", "closed", "opening", "closing"}), env, env)
             .compatible);
  CHECK(!compatible(li, TypeExpr::set_of(TypeExpr::builtin_type(Builtin::Integer)),
                    env, env)
             .compatible);
  CHECK(!compatible(TypeExpr::list_of(TypeExpr::builtin_type(Builtin::Boolean)),
                    TypeExpr::builtin_type(Builtin::Integer), env, env)
             .compatible);
  TypeRef s1 = TypeExpr::structure({{intern("i1"), TypeExpr::builtin_type(Builtin::Integer)},
                                    {intern("i2"), TypeExpr::builtin_type(Builtin::Integer)}});
  TypeRef s2 = TypeExpr::structure({{intern("j1"), TypeExpr::builtin_type(Builtin::Integer)},
                                    {intern("j2"), TypeExpr::builtin_type(Builtin::Integer)}});
  CompatVerdict v = compatible(s1, s2, env, env);
  CHECK(!v.compatible);
  REQUIRE(!v.witness.empty());
  CHECK(v.witness[0].find("field identifiers differ") != std::string::npos);
}
