// Expression evaluation over traces.
#pragma once

#include <functional>

#include "astral/trace.hpp"

namespace astral {

struct EvalLimits {
  uint64_t visits = 0;
  uint64_t max_visits = 500'000'000;  // node-visit budget; exceeding throws
};

struct BudgetExceeded : AstralError {
  using AstralError::AstralError;
};

// Exit-assertion evaluation context. The frame at the current tick serves as
// the candidate post-state; primed reads resolve at `fire_tick`. While the
// exit solver is still constructing the post-state, `assigned` marks which
// global slots hold decided new values; reading an undecided own slot throws
// UnassignedRead so the solver can fall back to enumeration.
struct ExitCtx {
  int self_inst = -1;
  int fire_tick = 0;
  const std::vector<bool>* assigned = nullptr;  // null = fully decided
};

struct UnassignedRead {
  int slot;
};

enum class ChooseMode : uint8_t { Canonical, Branching };

// Records the branch taken at every choose encountered during one
// evaluation pass; advancing it odometer-style enumerates all
// epsilon-resolutions.
struct ChoiceIter {
  struct Step {
    uint32_t taken;
    uint32_t total;
  };
  std::vector<Step> steps;
  size_t cursor = 0;
  bool advance();  // false when all resolutions are exhausted
  void reset_pass() { cursor = 0; }
};

struct EvalCtx {
  const Trace* trace = nullptr;
  const CompiledSystem* sys = nullptr;
  int now = 0;  // anchor tick; -1 marks the empty history before time 0
  int self_inst = -1;  // instance scope for unqualified references
  Value* frame = nullptr;  // binder frame (frame_size slots)
  const ExitCtx* exit_ctx = nullptr;
  EvalLimits* limits = nullptr;
  ChooseMode choose_mode = ChooseMode::Canonical;
  ChoiceIter* choices = nullptr;  // used when choose_mode == Branching
};

// Evaluates one resolution. In Branching mode the ChoiceIter records or
// replays choices; in Canonical mode choose takes the least witness.
Value eval_node(const CExpr& ex, int node, EvalCtx& ctx);
Value eval_root(const CExpr& ex, EvalCtx& ctx);

// All epsilon-resolutions of the expression (deduplicated, sorted).
ValueVec eval_resolutions(const CExpr& ex, EvalCtx& ctx);

// True iff every epsilon-resolution evaluates to TRUE (the universal reading
// used for obligations).
bool holds_universally(const CExpr& ex, EvalCtx& ctx);

// Convenience wrapper over the machine's public eval operation: compiles
// `e` against the trace's system and evaluates it at tick `t` with the
// given name bindings. Errors surface as AstralError.
Value eval(const ExprPtr& e, const Trace& tr, int t,
           const std::vector<std::pair<Sym, Value>>& env = {},
           ChooseMode mode = ChooseMode::Canonical);

// On a FALSE formula, locates one failing binding of the outermost
// universal quantifiers plus the first falsified conjunct path.
struct FailureWitness {
  std::vector<std::pair<Sym, Value>> bindings;
  std::string pinpoint;  // rendered failing subformula
};
FailureWitness find_failure(const CExpr& ex, EvalCtx& ctx);

}  // namespace astral
