// Expression AST shared by specifications, mapping blocks and formulas.
//
// Identifier references are kept unresolved (Name nodes); binding to
// variables, constants, parameters or enumerator constants happens against a
// context at type-check / compile time, which lets the same node kinds serve
// upper-level text, lower-level text and mapping right-hand sides.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "astral/basics.hpp"
#include "astral/type.hpp"
#include "astral/value.hpp"

namespace astral {

enum class ExKind {
  Lit,         // integer / TRUE / FALSE literal
  Name,        // [qual.]id['][(args)]
  Now,
  Past,        // past(e, t)
  Event,       // [qual.]Start|End|Call|Change(subject[(args)][, t])
  Apply,       // operator application; & and | are n-ary
  Quantifier,  // FORALL / EXISTS binders (body)
  Choose,      // choose v: T (body)
  SetDef,      // SETDEF v: T (body)
  ListDef,     // LISTDEF(e1, ..., en)
  SetLit,      // {e1, ..., en}
  StructDef,   // STRUCTDEF(f1: e1, ..., fn: en)
  IfThenElse,  // IF c THEN a ELSE b FI
  CaseOf,      // CASE e OF k1: e1 ... ESAC
  Becomes,     // v BECOMES e          (exit assertions only)
  NoChange,    // NOCHANGE(v)          (exit assertions only)
  ImplOf,      // IMPL(e)              (mapping right-hand sides only)
  Impl0Of,     // IMPL_0(e)
};

enum class EventKind { Start, End, Call, Change };

struct Binder {
  Sym name;
  TypeRef type;
};

struct CaseArm {
  ExprPtr match;  // an explicit constant value (literal or enumerator name)
  ExprPtr body;
};

struct Expr {
  ExKind kind;
  SourceLoc loc;

  Value lit;                  // Lit
  ExprPtr qual;               // Name/Event qualifier (id-valued), may be null
  Sym id = 0;                 // Name id; Apply operator; Event subject
  bool primed = false;        // Name
  EventKind ev = EventKind::Start;
  std::vector<ExprPtr> args;  // children (see kind-specific layout below)
  ExprPtr time;               // Event time argument; null = unary "last time" term
  std::vector<Binder> binders;    // Quantifier (n), Choose/SetDef (1)
  bool is_forall = false;         // Quantifier
  std::vector<CaseArm> arms;      // CaseOf
  std::vector<Sym> field_names;   // StructDef
  // Layouts: Past{args[0]=e, args[1]=t}; Quantifier/Choose/SetDef{args[0]=body};
  // IfThenElse{args[0..2]}; CaseOf{args[0]=scrutinee}; Becomes{args[0]=lhs
  // Name, args[1]=rhs}; NoChange/ImplOf/Impl0Of{args[0]}; Event{args unused,
  // subject params in subj_args}.
  std::vector<ExprPtr> subj_args;  // Event subject parameters

  bool contains_choose = false;  // cached at construction
};

// --- construction helpers ------------------------------------------------

namespace mk {
ExprPtr lit_int(int64_t v, SourceLoc loc = {});
ExprPtr lit_bool(bool v, SourceLoc loc = {});
ExprPtr lit(Value v, SourceLoc loc = {});
ExprPtr name(Sym id, SourceLoc loc = {});
ExprPtr name(ExprPtr qual, Sym id, bool primed, std::vector<ExprPtr> args,
             SourceLoc loc = {});
ExprPtr now(SourceLoc loc = {});
ExprPtr past(ExprPtr e, ExprPtr t, SourceLoc loc = {});
ExprPtr event(ExprPtr qual, EventKind k, Sym subject, std::vector<ExprPtr> subj_args,
              ExprPtr time, SourceLoc loc = {});
ExprPtr apply(Sym op, std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr quant(bool is_forall, std::vector<Binder> bs, ExprPtr body, SourceLoc loc = {});
ExprPtr choose(Binder b, ExprPtr body, SourceLoc loc = {});
ExprPtr set_def(Binder b, ExprPtr body, SourceLoc loc = {});
ExprPtr list_def(std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr set_lit(std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr struct_def(std::vector<Sym> fields, std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr if_then_else(ExprPtr c, ExprPtr t, ExprPtr e, SourceLoc loc = {});
ExprPtr case_of(ExprPtr scrutinee, std::vector<CaseArm> arms, SourceLoc loc = {});
ExprPtr becomes(ExprPtr lhs, ExprPtr rhs, SourceLoc loc = {});
ExprPtr no_change(ExprPtr lhs, SourceLoc loc = {});
ExprPtr impl_of(ExprPtr e, SourceLoc loc = {});
ExprPtr impl0_of(ExprPtr e, SourceLoc loc = {});

// Convenience connective builders that flatten nested &/| chains and absorb
// TRUE in conjunctions / FALSE in disjunctions.
ExprPtr conj(std::vector<ExprPtr> xs);
ExprPtr disj(std::vector<ExprPtr> xs);
ExprPtr implies(ExprPtr a, ExprPtr b);
ExprPtr negate(ExprPtr a);
ExprPtr eq(ExprPtr a, ExprPtr b);
}  // namespace mk

// Pre-interned operator names.
struct Ops {
  Sym and_, or_, not_, implies, iff;
  Sym eq, ne, lt, le, gt, ge;
  Sym add, sub, mul, div_, mod, neg;
  Sym union_, set_diff, isin, not_isin, contained_in, subset, concat;
  Sym set_size, list_len, index;
};
const Ops& ops();

// --- traversal & rewriting ------------------------------------------------

// Children of a node in a fixed order (args, time, qual, subj_args, arm
// bodies...). Used by generic walks.
void for_each_child(const Expr& e, const std::function<void(const ExprPtr&)>& f);

// Structural equality, exact on bound-variable names.
bool expr_equal(const ExprPtr& a, const ExprPtr& b);

// Equality up to renaming of bound variables.
bool alpha_equal(const ExprPtr& a, const ExprPtr& b);

// Free Name identifiers (no qualifier resolution; qualified names contribute
// their qualifier's free names plus nothing for the member id).
void collect_free_names(const ExprPtr& e, std::vector<Sym>& out);
bool name_free_in(const ExprPtr& e, Sym id);

// Capture-avoiding substitution of free Name occurrences (bare, unprimed,
// argument-free names only) by replacement expressions.
ExprPtr substitute_names(const ExprPtr& e,
                         const std::vector<std::pair<Sym, ExprPtr>>& subst);

// Substitute every occurrence of `now` by the given time expression.
ExprPtr substitute_now(const ExprPtr& e, const ExprPtr& t);

// Flatten &/| chains, absorb TRUE in & and FALSE in |, collapse singleton
// connectives. Used before golden comparison and when rendering obligations.
ExprPtr flatten_connectives(const ExprPtr& e);

// Push past(...) anchors down to atoms: variables keep an explicit past
// wrapper, event predicates get their time arguments fixed, now becomes the
// anchor, literals drop the wrapper. Yields the paper's printed obligation
// shapes.
ExprPtr normalize_past(const ExprPtr& e);

// --- rendering -------------------------------------------------------------

// Canonical text with minimal parentheses; parse(render(e)) == e.
std::string render_expr(const ExprPtr& e);

// Indented multi-line form used for .obl files and rewrite traces.
std::string render_expr_pretty(const ExprPtr& e, int indent = 0);

}  // namespace astral
