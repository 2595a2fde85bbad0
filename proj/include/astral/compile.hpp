// Compiled form of systems and expressions.
//
// Front-end AST expressions are compiled into a flat node arena with
// pre-resolved references (binder frame slots, instance indices, variable
// slot bases, transition indices) and precomputed quantifier domains. The
// bounded checker evaluates millions of formula instances, so the compiled
// form also carries sound pruning directives for quantifiers (range clamps
// and event-atom candidate pinning) computed once at compile time.
#pragma once

#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "astral/spec.hpp"

namespace astral {

struct CompiledSystem;

// Bounds that make quantifier and parameter domains finite.
struct EvalBounds {
  int64_t int_lo = -2;
  int64_t int_hi = 2;
  int horizon = 8;
  int undef_domain_size = 2;     // carrier size for Undefined types
  int64_t domain_cap = 200000;   // max values materialized per domain
};

// --- compiled expressions ----------------------------------------------------

enum class COp : uint8_t {
  Lit, BoundRef, VarRead, NowRef,
  And, Or, Not, Implies, Iff,
  CmpEq, CmpNe, CmpLt, CmpLe, CmpGt, CmpGe,
  Add, Sub, Mul, Div, Mod, Neg,
  UnionOp, SetDiffOp, IsIn, NotIsIn, ContainedIn, SubsetOp, ConcatOp,
  SetSize, ListLen, Index,
  MkList, MkSet, MkStruct,
  IfElse, CaseOf,
  Quant, ChooseOp, SetDefOp,
  PastAnchor,
  EventPred,   // boolean, time argument present
  EventLast,   // unary form: time of last occurrence, 0 if none
  BecomesEq,   // exit assertions
  NoChangeEq,
};

enum class InstMode : uint8_t { None, Fixed, Dynamic, SelfInst };

// Domain of a quantifier/choose/setdef binder or of a transition parameter,
// materialized at compile time. Sets are ordered by (size, lexicographic).
struct CDomain {
  ValueVec values;
  bool is_int_range = false;  // fast membership for integer ranges
  int64_t lo = 0, hi = -1;
  bool contains(const Value& v) const;
  size_t size() const { return is_int_range ? size_t(hi - lo + 1) : values.size(); }
  Value at(size_t i) const {
    return is_int_range ? Value::integer(lo + int64_t(i)) : values[i];
  }
};

// Pruning directive for one quantifier node.
struct CPin {
  int atom = -1;              // node index of the pinning event atom
  std::vector<int> binders;   // local binder positions bound by the atom's
                              // subject parameters (-1 entries: fixed child)
};
struct CQuantPrune {
  // Per local binder: optional clamp expressions (node indices, -1 = none).
  std::vector<int> clamp_lo, clamp_hi;
  std::vector<bool> clamp_lo_strict, clamp_hi_strict;
  std::vector<CPin> pins;            // disjoint-binders event pinning
  std::vector<bool> pinned;          // binder covered by some pin
};

struct CNode {
  COp op;
  EventKind ev = EventKind::Start;
  InstMode inst_mode = InstMode::None;
  bool flag = false;     // Quant: is_forall; VarRead: primed
  uint16_t nargs = 0;
  int a = -1, b = -1, c = -1;  // meaning depends on op
  int args_at = -1;            // start index into arg_index pool
  int inst = -1;               // Fixed instance index / Dynamic qual node
  int sym_id = -1;             // VarRead: var index; EventPred: transition/var
  int slot_base = -1;          // VarRead on variables: frame slot base
  int pool = -1;               // Lit: value pool index; MkStruct: field syms
  int frame = -1;              // BoundRef / Quant first frame slot
  int domain_at = -1;          // Quant/Choose/SetDef: first domain index
  int prune = -1;              // Quant: index into prunes
  bool has_choose = false;
  int max_bref = -1;  // highest binder frame slot read in this subtree
};

struct CExpr {
  std::vector<CNode> nodes;
  std::vector<int> arg_pool;
  std::vector<Value> value_pool;
  std::vector<std::vector<Sym>> sym_pool;  // MkStruct field lists, CaseOf matches
  std::vector<CDomain> domains;
  std::vector<CQuantPrune> prunes;
  int root = -1;
  int frame_size = 0;  // binder frame slots required
  ExprPtr source;      // original AST (for diagnostics / pinpointing)
  std::string compile_error;  // set when compilation failed; eval throws it
};

// --- compiled system ----------------------------------------------------------

struct CVar {
  Sym name;
  TypeRef type;                     // component type
  std::vector<Binder> params;       // empty = scalar
  std::vector<ValueVec> param_tuples;  // enumerated parameter tuples
  int slot_base = 0;                // within the owning process frame
  int components = 1;
};

struct CConst {
  Sym name;
  TypeRef type;
  std::vector<Binder> params;
  ExprPtr definition;               // may be null (symbolic)
  std::optional<Value> folded;      // scalar constants with literal values
};

struct CTrans {
  Sym name;
  std::vector<Binder> params;
  std::vector<CDomain> param_domains;  // for non-exported branching
  int duration = -1;                // -1 = symbolic (upper levels only)
  ExprPtr duration_expr;
  bool exported = false;
  CExpr entry;     // binder frame: params at slots 0..k-1
  CExpr exit;      // same binder layout; primed/Becomes allowed
  ExprPtr entry_src, exit_src;
  int index = 0;
};

struct CProc {
  Sym name;
  const ProcessLevel* level = nullptr;
  std::vector<CVar> vars;
  std::unordered_map<Sym, int> var_index;
  std::vector<CTrans> transitions;
  std::unordered_map<Sym, int> trans_index;
  std::unordered_map<Sym, CConst> consts;
  std::unordered_map<Sym, TypeRef> types;
  CExpr initial;    // solver form
  CExpr invariant;
  CExpr axiom;
  int frame_size = 0;
};

struct CInst {
  Sym name;
  int proc = 0;
  int frame_base = 0;
};

struct CompiledSystem {
  std::shared_ptr<const SystemSpec> spec;
  EvalBounds bounds;
  std::vector<CProc> procs;
  std::vector<CInst> instances;
  std::unordered_map<Sym, int> inst_index;
  std::unordered_map<Sym, TypeRef> global_types;
  std::unordered_map<Sym, CConst> global_consts;
  int total_slots = 0;

  const CInst* find_inst(Sym name) const;
  int inst_of(Sym name) const;  // -1 when unknown
  // Resolve Named references through process-level and global type tables.
  TypeRef resolve_type(const TypeRef& t, int proc /*-1 = global*/) const;
  // Instances whose process type is `proc_type` (by name), in declaration order.
  std::vector<int> instances_of(Sym proc_type) const;
};

// Compiles a validated system. Throws AstralError on unresolvable content
// (validate_spec reports the same problems as diagnostics first).
std::shared_ptr<CompiledSystem> compile_system(const SystemSpec& spec,
                                               const EvalBounds& bounds);

// Compile a closed-or-scoped expression for evaluation over traces of `sys`.
// `proc` scopes unqualified names (-1 for system-level formulas); `binders`
// pre-binds names to frame slots 0..n-1 (transition parameters etc.).
CExpr compile_expr(const CompiledSystem& sys, const ExprPtr& e, int proc = -1,
                   const std::vector<Binder>& binders = {},
                   bool allow_exit_forms = false);

// Enumerates the value domain of a type under bounds. Throws on unbounded
// domains (lists, raw reals beyond the integer carrier) or when the cap is
// exceeded.
ValueVec enumerate_domain(const CompiledSystem& sys, const TypeRef& type, int proc,
                          const EvalBounds& bounds);

}  // namespace astral
