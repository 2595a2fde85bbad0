// Discrete-time execution histories.
#pragma once

#include <string>
#include <vector>

#include "astral/compile.hpp"

namespace astral {

using Frame = std::vector<Value>;  // one Value per component slot

struct StartEv {
  int inst;
  int trans;
  ValueVec params;
};
struct EndEv {
  int inst;
  int trans;
  ValueVec params;
  int fire_tick;
};
struct CallEv {
  int inst;
  int trans;
  ValueVec params;
};

struct TickEvents {
  std::vector<CallEv> calls;    // multiset (duplicates allowed)
  std::vector<StartEv> starts;  // at most one per instance
  std::vector<EndEv> ends;
  std::vector<int> changed_slots;  // global slot indices, sorted
};

// Per (instance, transition) occurrence index built when a trace is
// finalized; event predicates then answer in O(log n).
struct TransOccs {
  std::vector<int> start_ticks;
  std::vector<ValueVec> start_params;
  std::vector<int> end_ticks;
  std::vector<ValueVec> end_params;
  std::vector<int> end_fire;
  std::vector<int> call_ticks;              // deduplicated, sorted
  std::vector<std::pair<int, ValueVec>> calls;  // every call, sorted by tick
};

struct Trace {
  const CompiledSystem* sys = nullptr;
  int horizon = 0;                 // ticks 0..horizon inclusive
  std::vector<Frame> vals;         // horizon+1 frames
  std::vector<TickEvents> events;  // horizon+1 entries

  // finalized indexes
  std::vector<TransOccs> occs;            // indexed by trans_key(inst, local trans)
  std::vector<std::vector<int>> slot_changes;  // per global slot: ticks
  std::vector<std::vector<int>> var_changes;   // per (inst,var) key: ticks
  bool finalized = false;

  int trans_key(int inst, int trans) const;
  int var_key(int inst, int var) const;
  const TransOccs& occs_of(int inst, int trans) const;

  void finalize();  // builds indexes and sorts event records

  // Incremental recording used by the simulator; ticks must be appended in
  // order. init_recording() sizes the index arrays.
  void init_recording();
  void record_call(int tick, int inst, int trans, ValueVec params);
  void record_start(int tick, int inst, int trans, ValueVec params);
  void record_end(int tick, int inst, int trans, ValueVec params, int fire);
  void note_changed(int tick, int slot);  // caller supplies slots in order

  bool same_shape(const Trace& o) const;  // equal frames + events
};

// Canonical line-oriented dump (bit-exact for golden tests):
//   T <tick>
//   V <instance>.<var>[(<args>)] = <value>
//   E <instance> CALL|START|END <transition>(<params>) [fire=<tick>]
//   C <instance>.<var>[(<args>)]
std::string dump_trace(const Trace& t);

}  // namespace astral
