// The IMPL rewrite engine: classification of mapping blocks against an upper
// level, well-formedness restrictions, translation of upper-level expressions
// into lower-level expressions, natural-mapping fallbacks, constant
// case-splits, and compilation of sequence/selection maps into start/end
// mappings.
#pragma once

#include "astral/typecheck.hpp"

namespace astral {

struct CaseMap {
  Sym formal = 0;
  TypeRef upper_type;
  std::vector<CaseArm> arms;  // keys are explicit constant values
  SourceLoc loc;
};

struct OperatorMap {
  Sym op = 0;
  std::vector<Binder> params;
  TypeRef result;
  ExprPtr rhs;  // references IMPL(formal_i)
  SourceLoc loc;
};

// Compiled sequence/selection map (start/end mappings per 5.2 plus the
// retained body for the sequential obligation generator).
struct SeqSelCompiled {
  bool is_sequence = false;
  ExprPtr start_map;
  ExprPtr end_map;
  // sequence side data
  ExprPtr seq_entry;
  std::vector<Sym> seq_transitions;
  // selection side data: (guard, lower transition)
  std::vector<std::pair<ExprPtr, Sym>> branches;
};

struct TransMaps {
  ExprPtr start_map;
  ExprPtr end_map;
  ExprPtr call_map;                   // exported transitions only
  std::vector<Sym> call_params;       // formals of the call mapping
  const SeqSelCompiled* seq = nullptr;  // set when derived from a 3-style map
};

// An ImplBlock classified and resolved against its upper level and the lower
// system. Construction collects classification diagnostics instead of
// throwing, so the well-formedness checker can report them all.
struct ResolvedImpl {
  std::shared_ptr<const ImplBlock> block;
  const SystemSpec* upper_sys = nullptr;
  const ProcessLevel* upper = nullptr;
  const SystemSpec* lower_sys = nullptr;

  std::vector<std::pair<Sym, TypeRef>> type_map;  // upper type -> lower type
  struct ValueMap {
    std::vector<Binder> formals;
    ExprPtr rhs;
    SourceLoc loc;
  };
  std::vector<std::pair<Sym, ValueMap>> var_map;
  std::vector<std::pair<Sym, ValueMap>> const_map;
  std::vector<CaseMap> case_maps;  // keyed by upper type
  std::vector<OperatorMap> op_maps;
  std::vector<std::pair<Sym, TransMaps>> trans_map;
  std::vector<std::pair<Sym, SeqSelCompiled>> seq_sel;
  DiagnosticList classify_diags;

  const TypeRef* find_type_map(Sym upper_type) const;
  const ValueMap* find_var_map(Sym var) const;
  const ValueMap* find_const_map(Sym c) const;
  const CaseMap* find_case_map(Sym upper_type) const;
  const TransMaps* find_trans_map(Sym trans) const;

  // The lower type an upper type maps to (identity when unmapped).
  TypeRef map_type(const TypeRef& t) const;
};

ResolvedImpl resolve_impl(const ImplBlock& block, const SystemSpec& upper_sys,
                          const SystemSpec& lower_sys);

// Restrictions (a)-(g). Empty iff the block is well-formed.
DiagnosticList check_impl_wellformed(const ResolvedImpl& ri);

// --- rewrite -------------------------------------------------------------------

struct RewriteTrace {
  struct Node {
    std::string input;
    std::string rule;
    std::string output;
    int depth = 0;
  };
  std::vector<Node> nodes;
  std::string render() const;
};

// Recursive IMPL replacement of an upper-level expression. Throws
// AstralError on missing required mappings. The result is a lower-level
// expression (choose retained only where mappings introduce it).
ExprPtr rewrite(const ExprPtr& upper_expr, const ResolvedImpl& ri,
                RewriteTrace* trace = nullptr);

// IMPL_0: distributes IMPL through operators, literals and collection
// constructors; built-in-supertyped constants map to themselves.
ExprPtr natural_map(const ExprPtr& e, const ResolvedImpl& ri,
                    RewriteTrace* trace = nullptr);

// Selects the branch of a constant case map for an explicit value. Throws on
// an uncovered key.
ExprPtr resolve_constant_case(const Value& v, const CaseMap& cm);

// Compiles a 3-style sequence or selection entry into 5.2 start/end maps.
// `lower_instance` qualifies the lower transitions. Throws when a non-final
// sequence transition writes a mapped variable.
SeqSelCompiled compile_seq_sel(const ImplMapEntry& entry, const ResolvedImpl& ri,
                               Sym lower_instance);

// Rewrite helpers shared with the obligation generator:
// the call mapping body with Call events re-kinded (to Start/End) and/or
// parameters erased, and `now` left intact.
ExprPtr transform_call_map(const ExprPtr& call_map, EventKind new_kind,
                           bool erase_params);

// Exit assertions as plain predicates: BECOMES becomes equality, NOCHANGE
// becomes v = past(v, now - dur), primed reads become past(v, now - dur)
// (`dur` is the upper transition's duration expression; `now` denotes the end
// time).
ExprPtr prep_exit_expr(const ExprPtr& exit, const ExprPtr& duration);

}  // namespace astral
