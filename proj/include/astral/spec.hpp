// Declaration-level AST: system specifications and IMPL mapping blocks.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "astral/expr.hpp"
#include "astral/type.hpp"

namespace astral {

struct TypeDecl {
  Sym name = 0;
  TypeRef def;  // Undefined kind for bare declarations
  SourceLoc loc;
};

struct ConstDecl {
  Sym name = 0;
  std::vector<Binder> params;  // non-empty for table/function constants
  TypeRef type;
  ExprPtr value;  // optional fixed value / defining expression
  SourceLoc loc;
};

struct VarDecl {
  Sym name = 0;
  std::vector<Binder> params;  // non-empty for parameterized variables
  TypeRef type;
  SourceLoc loc;
};

struct TransitionDecl {
  Sym name = 0;
  std::vector<Binder> params;
  ExprPtr duration;  // positive integer ticks once constants are resolved
  ExprPtr entry;     // boolean, no primed references
  ExprPtr exit;      // boolean, primes denote fire-time values
  bool exported = false;  // derived from the EXPORT clause
  SourceLoc loc;
};

struct ImportRef {
  Sym head = 0;    // instance, type, or constant name
  Sym member = 0;  // 0 unless dotted (M1.product)
};

struct ProcessLevel {
  Sym process_type = 0;
  int level = 1;
  std::vector<Sym> exports;
  std::vector<ImportRef> imports;
  std::vector<TypeDecl> types;
  std::vector<ConstDecl> constants;
  std::vector<VarDecl> variables;
  ExprPtr initial;    // defaults to TRUE
  ExprPtr axiom;      // defaults to TRUE
  ExprPtr invariant;  // defaults to TRUE
  std::vector<TransitionDecl> transitions;
  SourceLoc loc;
};

struct InstanceDecl {
  Sym name = 0;
  Sym process_type = 0;
  SourceLoc loc;
};

struct SystemSpec {
  Sym name = 0;
  std::vector<InstanceDecl> instances;
  std::vector<TypeDecl> global_types;
  std::vector<ConstDecl> global_consts;
  std::vector<ProcessLevel> levels;
  std::string source_file;

  const ProcessLevel* find_level(Sym process_type) const;
  const InstanceDecl* find_instance(Sym name) const;
};

// --- IMPL mapping blocks ----------------------------------------------------

enum class MapKind {
  Plain,      // IMPL(x) == expr-or-type; classified against the upper level
  ConstCase,  // IMPL(c: T) == CASE c OF ... ESAC
  Operator,   // IMPL(op(v1: T1, ...): R) == expr
  TransStart,
  TransEnd,
  TransCall,  // may carry parameter names
  SeqWhen,    // IMPL(T_U) == WHEN e DO t1 BEFORE ... OD
};

struct ImplMapEntry {
  MapKind kind = MapKind::Plain;
  Sym target = 0;              // mapped symbol (or the operator name)
  std::vector<Binder> params;  // map formals; types null for call parameters
  TypeRef op_result;           // Operator
  TypeRef target_type;         // ConstCase upper type
  ExprPtr rhs;
  TypeRef rhs_type;  // Plain entries whose right side is a type expression
  std::vector<CaseArm> case_arms;  // ConstCase
  ExprPtr seq_entry;               // SeqWhen
  std::vector<Sym> seq_transitions;
  SourceLoc loc;
};

struct ImplBlock {
  Sym name = 0;
  Sym of_process = 0;  // upper process type being refined
  std::vector<InstanceDecl> processes;
  std::vector<ImplMapEntry> entries;
  std::string source_file;
};

// --- environment schedules ---------------------------------------------------

struct SchedCall {
  int tick = 0;
  Sym instance = 0;
  Sym transition = 0;
  ValueVec params;
  SourceLoc loc;
};

struct EnvSchedule {
  std::vector<SchedCall> calls;  // kept sorted by (tick, instance, transition, params)
  void normalize();
};

// --- rendering / validation ---------------------------------------------------

std::string render_system(const SystemSpec& s);
std::string render_impl_block(const ImplBlock& b);

// Whole-spec well-formedness: structural type invariants, positive durations,
// export coverage, and name resolution. Deterministic order.
DiagnosticList validate_spec(const SystemSpec& s);

}  // namespace astral
