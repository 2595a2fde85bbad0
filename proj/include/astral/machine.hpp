// The discrete-time abstract machine: nondeterministic stepping, bounded
// exploration and the trace-level axiom checker.
//
// Tick-edge ordering at a single tick t:
//   (1) environment calls land;
//   (2) transitions due at t end and variables change (exit assertions are
//       constraints over the post-state, solved jointly across instances);
//   (3) idle instances with enabled transitions start one (maximal progress).
#pragma once

#include "astral/eval.hpp"

namespace astral {

// Multiset of unserved call parameter tuples, per (instance, transition) key.
using PendingCalls = std::vector<ValueVec>;  // sorted, duplicates allowed

struct SimState {
  Trace trace;  // ticks 0..t built so far
  struct Exec {
    int trans = -1;  // -1 = idle
    ValueVec params;
    int start = 0;
    int end = 0;
  };
  std::vector<Exec> exec;               // per instance
  std::vector<PendingCalls> pending;    // per trans key

  bool same_as(const SimState& o) const;
};

// Initial states: one per solution of the conjunction of initial clauses.
std::vector<SimState> initial_states(const std::shared_ptr<CompiledSystem>& sys);

// Reconstructs simulation bookkeeping from a finished trace prefix (used by
// the public stepping operation and by the axiom checker).
SimState state_at(const std::shared_ptr<CompiledSystem>& sys, const Trace& tr, int t);

// Applies one tick (calls at `tick` from the schedule, then ends, then
// starts) and returns every successor. Successor traces extend to `tick`.
std::vector<SimState> step_system(const std::shared_ptr<CompiledSystem>& sys,
                                  const EnvSchedule& sched, const SimState& s,
                                  int tick);

struct ExploreResult {
  std::vector<Trace> traces;  // finalized, deduplicated by exact equality
  bool complete = true;       // false when the state budget was exhausted
  uint64_t states = 0;
};

ExploreResult explore(const std::shared_ptr<CompiledSystem>& sys,
                      const EnvSchedule& sched, int horizon,
                      uint64_t state_budget = 200000);

// Enabledness of one transition on one instance at tick t of a finished
// trace: entry holds for some binding and, for exported transitions, an
// unserved call supplies the parameters. Returns the full feasible set.
struct Enabledness {
  bool enabled = false;
  std::vector<ValueVec> feasible;
};
Enabledness enabled(const std::shared_ptr<CompiledSystem>& sys, const Trace& tr,
                    int inst, int trans, int t);

// Trace-level checks of the eight abstract-machine axioms. `check_assertions`
// turns on the formula-based axioms (entry, exit, initial); structural
// bookkeeping (mutex, end pairing, changes-only-at-ends, called-before-start,
// fire-parameter discipline, maximal progress) is always checked.
// `duration_override` substitutes mapped durations when checking induced
// upper-level traces.
struct AxiomCheckOpts {
  bool check_assertions = true;
  bool check_maximal_progress = true;
  const std::vector<std::vector<int>>* duration_override = nullptr;  // [proc][trans]
};
DiagnosticList axiom_check(const std::shared_ptr<CompiledSystem>& sys, const Trace& tr,
                           const AxiomCheckOpts& opts = {});

}  // namespace astral
