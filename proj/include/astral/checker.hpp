// Bounded verification: evaluates obligation sets over explored lower-level
// trace sets, builds induced upper-level traces, and checks the history
// correspondence criteria.
#pragma once

#include "astral/machine.hpp"
#include "astral/obligations.hpp"

namespace astral {

struct CheckBounds {
  int horizon = 8;
  int max_calls = 2;  // maximum number of environment call events
  int window_lo = 0;  // ticks at which calls may land
  int window_hi = 2;
  int64_t param_lo = -2;  // integer-typed call/quantifier parameters
  int64_t param_hi = 2;
  uint64_t state_budget = 200000;
  uint64_t eval_budget = 4000000000ull;
  unsigned threads = 0;  // 0 = hardware concurrency

  EvalBounds eval_bounds() const {
    EvalBounds b;
    b.int_lo = param_lo;
    b.int_hi = param_hi;
    b.horizon = horizon;
    return b;
  }
};

enum class VerdictStatus { Holds, Violated, BudgetExceeded };

struct Verdict {
  VerdictStatus status = VerdictStatus::Holds;
  long schedule_index = -1;  // earliest violating schedule
  int trace_index = -1;
  std::vector<std::pair<Sym, Value>> bindings;
  std::string pinpoint;
  std::shared_ptr<Trace> counterexample;
  std::string trace_file;  // set by the CLI after dumping the trace
};

struct Report {
  std::vector<std::pair<Obligation, Verdict>> results;
  std::string schedule_family;
  int horizon = 0;
  uint64_t schedules = 0;
  uint64_t traces = 0;
  uint64_t admissible = 0;
  uint64_t states = 0;
  double wall_seconds = 0;
  bool complete = true;

  bool all_hold() const;
  std::string render(bool with_wall = false) const;
  std::string to_json() const;
};

// One lower-level environment call option of the schedule family.
struct CallOption {
  int tick;
  std::vector<SchedCall> lower_calls;  // the call-mapping image
  Sym upper_trans = 0;                 // nonzero for mapped upper calls
  ValueVec upper_params;
};

// The admissible family: every upper-level call option (exported transitions
// of the refined process, mapped through the call mapping) plus direct calls
// to exported transitions of environment processes. Schedules are multisets
// of at most max_calls options.
std::vector<CallOption> schedule_options(const ResolvedImpl& ri,
                                         const CompiledSystem& lower,
                                         const CheckBounds& bounds);
uint64_t schedule_count(uint64_t options, int max_calls);
EnvSchedule schedule_at(const std::vector<CallOption>& options, int max_calls,
                        uint64_t index);

// Exhaustive evaluation of one closed formula on one trace; choose nodes are
// branch-expanded and the formula holds only under every resolution.
Verdict check_formula(const CExpr& formula, const Trace& tr, uint64_t eval_budget);

// impl_call_fire_parms as a trace admissibility filter: every joint mapped
// start must fire a parameter tuple drawn from the unserved mapped calls.
bool trace_admissible(const ResolvedImpl& ri, const CompiledSystem& lower,
                      const Trace& tr);

// The full bounded refinement check. `sequential` selects the S/P schemas of
// the block's sequence/selection maps instead of the parallel impl_* set.
Report check_refinement(const ResolvedImpl& ri, const CheckBounds& bounds,
                        bool sequential = false);

// The IMPL-image of a lower trace in upper-level vocabulary: variable values
// are images of the variable mappings, events are the ticks where the
// start/end/call mapping bodies hold.
struct InducedTrace {
  Trace trace;                              // over the upper compiled system
  std::shared_ptr<CompiledSystem> upper;    // keeps the trace's system alive
  std::vector<std::vector<int>> durations;  // mapped durations [proc][trans]
  DiagnosticList notes;                     // non-singleton choose flags etc.
};
InducedTrace induced_upper_trace(const Trace& lower, const ResolvedImpl& ri,
                                 const CheckBounds& bounds);

// Correspondence criteria over a set of explored lower traces:
//  (C) variable images change only at mapped end ticks;
//  (S)+(E) mapped starts/ends pair at the mapped durations and never overlap;
//  (V) the induced trace passes the structural machine axioms and the
//      invariant image holds at every tick.
struct CorrespondenceVerdict {
  bool holds = true;
  DiagnosticList issues;
};
CorrespondenceVerdict correspondence_check(const ResolvedImpl& ri,
                                           const std::vector<Trace>& lower_traces,
                                           const CheckBounds& bounds);

}  // namespace astral
