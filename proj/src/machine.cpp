#include "astral/machine.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace astral {

namespace {

int trans_count(const CompiledSystem& sys) {
  int n = 0;
  for (const auto& i : sys.instances)
    n += static_cast<int>(sys.procs[i.proc].transitions.size());
  return n;
}

int trans_key_of(const CompiledSystem& sys, int inst, int trans) {
  int key = 0;
  for (int i = 0; i < inst; ++i)
    key += static_cast<int>(sys.procs[sys.instances[i].proc].transitions.size());
  return key + trans;
}

void insert_sorted(PendingCalls& pc, ValueVec v) {
  auto it = std::lower_bound(pc.begin(), pc.end(), v, compare_vecs_less);
  pc.insert(it, std::move(v));
}

bool erase_one(PendingCalls& pc, const ValueVec& v) {
  auto it = std::lower_bound(pc.begin(), pc.end(), v, compare_vecs_less);
  if (it == pc.end() || !(*it == v)) return false;
  pc.erase(it);
  return true;
}

// --- exit / initial constraint solver ---------------------------------------

// A partial post-state: whole-slot assignments plus per-element membership
// decisions on set-valued slots.
struct Partial {
  std::vector<std::pair<int, Value>> slots;                 // sorted by slot
  std::vector<std::pair<int, std::vector<std::pair<Value, bool>>>> sets;

  bool assign(int slot, Value v) {
    auto it = std::lower_bound(slots.begin(), slots.end(), slot,
                               [](const auto& p, int s) { return p.first < s; });
    if (it != slots.end() && it->first == slot) return it->second == v;
    for (const auto& [s, m] : sets)
      if (s == slot) return false;  // whole/membership mix: treat as conflict
    slots.insert(it, {slot, std::move(v)});
    return true;
  }
  bool member(int slot, Value elem, bool in) {
    for (const auto& [s, v] : slots)
      if (s == slot) return false;
    for (auto& [s, m] : sets) {
      if (s != slot) continue;
      for (auto& [e, b] : m)
        if (e == elem) return b == in;
      m.emplace_back(std::move(elem), in);
      return true;
    }
    sets.push_back({slot, {{std::move(elem), in}}});
    return true;
  }
  bool has_slot(int slot) const {
    for (const auto& [s, v] : slots)
      if (s == slot) return true;
    for (const auto& [s, m] : sets)
      if (s == slot) return true;
    return false;
  }
};

struct Solver {
  const CompiledSystem& sys;
  const CExpr& ex;
  Trace& tr;
  int self;
  int tick;
  ExitCtx ectx;                 // fire tick etc.
  std::vector<bool> base_mask;  // decided slots before this exit
  std::vector<Value> frame;
  EvalLimits limits;

  Solver(const CompiledSystem& s, const CExpr& e, Trace& t, int self_inst, int fire,
         int at, std::vector<bool> decided)
      : sys(s), ex(e), tr(t), self(self_inst), tick(at), base_mask(std::move(decided)) {
    ectx.self_inst = self_inst;
    ectx.fire_tick = fire;
    frame.assign(static_cast<size_t>(ex.frame_size) + 1, Value());
  }

  // Applies a partial onto vals[tick]/mask, evaluates, restores.
  struct Applied {
    Trace& tr;
    int tick;
    std::vector<std::pair<int, Value>> undo;
    Applied(Trace& t, int k) : tr(t), tick(k) {}
    void set(int slot, const Value& v) {
      undo.emplace_back(slot, tr.vals[tick][slot]);
      tr.vals[tick][slot] = v;
    }
    ~Applied() {
      for (auto it = undo.rbegin(); it != undo.rend(); ++it)
        tr.vals[tick][it->first] = it->second;
    }
  };

  Value materialize_set(int slot, const std::vector<std::pair<Value, bool>>& memb) {
    ValueVec elems = tr.vals[tick][slot].as_set();
    for (const auto& [e, in] : memb) {
      auto it = std::lower_bound(elems.begin(), elems.end(), e);
      bool present = it != elems.end() && *it == e;
      if (in && !present) elems.insert(it, e);
      if (!in && present) elems.erase(it);
    }
    return Value::set(std::move(elems));
  }

  Value eval_under(const Partial& p, int node, bool frozen) {
    Applied ap(tr, tick);
    std::vector<bool> mask = base_mask;
    for (const auto& [slot, v] : p.slots) {
      ap.set(slot, v);
      mask[slot] = true;
    }
    for (const auto& [slot, memb] : p.sets) {
      ap.set(slot, materialize_set(slot, memb));
      mask[slot] = true;
    }
    EvalCtx ctx;
    ctx.trace = &tr;
    ctx.sys = &sys;
    ctx.now = tick;
    ctx.self_inst = self;
    ctx.frame = frame.data();
    ExitCtx e = ectx;
    e.assigned = frozen ? nullptr : &mask;
    ctx.exit_ctx = &e;
    ctx.limits = &limits;
    return eval_node(ex, node, ctx);
  }

  ValueVec eval_resolutions_under(const Partial& p, int node, bool frozen) {
    if (!ex.nodes[node].has_choose) return {eval_under(p, node, frozen)};
    Applied ap(tr, tick);
    std::vector<bool> mask = base_mask;
    for (const auto& [slot, v] : p.slots) {
      ap.set(slot, v);
      mask[slot] = true;
    }
    for (const auto& [slot, memb] : p.sets) {
      ap.set(slot, materialize_set(slot, memb));
      mask[slot] = true;
    }
    EvalCtx ctx;
    ctx.trace = &tr;
    ctx.sys = &sys;
    ctx.now = tick;
    ctx.self_inst = self;
    ctx.frame = frame.data();
    ExitCtx e = ectx;
    e.assigned = frozen ? nullptr : &mask;
    ctx.exit_ctx = &e;
    ctx.limits = &limits;
    ChoiceIter it;
    ctx.choices = &it;
    ctx.choose_mode = ChooseMode::Branching;
    ValueVec out;
    do {
      it.reset_pass();
      out.push_back(eval_node(ex, node, ctx));
    } while (it.advance());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Is this node a writable own-variable read (unprimed, self instance)?
  // Returns the global slot or -1. Requires evaluable arguments.
  int writable_slot(const Partial& p, int node, bool frozen) {
    const CNode& n = ex.nodes[node];
    if (n.op != COp::VarRead || n.flag) return -1;
    if (n.inst_mode == InstMode::Fixed && n.inst != self) return -1;
    if (n.inst_mode == InstMode::Dynamic) {
      try {
        Value q = eval_under(p, n.inst, frozen);
        if (sys.inst_of(q.as_sym()) != self) return -1;
      } catch (const UnassignedRead&) {
        throw;
      } catch (const AstralError&) {
        return -1;
      }
    }
    // resolve component slot
    const CInst& inst = sys.instances[self];
    const CProc& proc = sys.procs[inst.proc];
    auto it = proc.var_index.find(static_cast<Sym>(n.sym_id));
    if (it == proc.var_index.end()) return -1;
    const CVar& v = proc.vars[it->second];
    int comp = 0;
    if (n.nargs > 0) {
      ValueVec args;
      for (int i = 0; i < n.nargs; ++i)
        args.push_back(eval_under(p, ex.arg_pool[n.args_at + i], frozen));
      comp = -1;
      for (size_t k = 0; k < v.param_tuples.size(); ++k)
        if (v.param_tuples[k] == args) comp = static_cast<int>(k);
      if (comp < 0)
        throw AstralError("exit writes outside the variable's parameter domain");
    }
    int slot = inst.frame_base + v.slot_base + comp;
    if (base_mask[slot]) return -1;  // decided before this exit: not writable
    return slot;
  }

  std::vector<Partial> solve(int node, const Partial& base, bool frozen) {
    const CNode& n = ex.nodes[node];
    switch (n.op) {
      case COp::Lit:
        return ex.value_pool[n.pool].as_bool() ? std::vector<Partial>{base}
                                               : std::vector<Partial>{};
      case COp::And: {
        std::vector<int> children;
        for (int i = 0; i < n.nargs; ++i) children.push_back(ex.arg_pool[n.args_at + i]);
        return solve_conj(children, base, frozen);
      }
      case COp::Or: {
        std::vector<Partial> out;
        for (int i = 0; i < n.nargs; ++i) {
          auto sols = solve(ex.arg_pool[n.args_at + i], base, frozen);
          out.insert(out.end(), sols.begin(), sols.end());
        }
        return out;
      }
      case COp::Implies: {
        if (!eval_under(base, n.a, frozen).as_bool()) return {base};
        return solve(n.b, base, frozen);
      }
      case COp::IfElse: {
        bool c = eval_under(base, n.a, frozen).as_bool();
        return solve(c ? n.b : n.c, base, frozen);
      }
      case COp::CaseOf: {
        Value scrut = eval_under(base, n.a, frozen);
        for (int i = 0; i + 1 < n.nargs; i += 2) {
          Value m = eval_under(base, ex.arg_pool[n.args_at + i], frozen);
          if (m == scrut) return solve(ex.arg_pool[n.args_at + i + 1], base, frozen);
        }
        throw AstralError("uncovered CASE value in exit assertion: " +
                          render_value(scrut));
      }
      case COp::Quant: {
        if (!n.flag) break;  // EXISTS: evaluate as a plain condition below
        const CDomain& d = ex.domains[n.domain_at];
        if (n.nargs != 1) {
          // several binders: fold the cartesian product recursively
          std::vector<Partial> sols{base};
          std::function<void(int, std::vector<Partial>&)> fold =
              [&](int b, std::vector<Partial>& acc) {
                if (b >= n.nargs) return;
                const CDomain& dom = ex.domains[n.domain_at + b];
                for (size_t i = 0; i < dom.size(); ++i) {
                  frame[n.frame + b] = dom.at(i);
                  if (b + 1 < n.nargs) {
                    fold(b + 1, acc);
                  } else {
                    std::vector<Partial> next;
                    for (const auto& p : acc) {
                      auto s = solve(n.a, p, frozen);
                      next.insert(next.end(), s.begin(), s.end());
                    }
                    acc = std::move(next);
                    if (acc.empty()) return;
                  }
                }
              };
          fold(0, sols);
          return sols;
        }
        std::vector<Partial> sols{base};
        for (size_t i = 0; i < d.size() && !sols.empty(); ++i) {
          frame[n.frame] = d.at(i);
          std::vector<Partial> next;
          for (const auto& p : sols) {
            auto s = solve(n.a, p, frozen);
            next.insert(next.end(), s.begin(), s.end());
          }
          sols = std::move(next);
        }
        return sols;
      }
      case COp::BecomesEq: {
        int slot = writable_slot(base, n.a, frozen);
        if (slot < 0) break;  // fall through to plain evaluation
        return assign_all(base, slot, n.b, frozen);
      }
      case COp::NoChangeEq: {
        int slot = writable_slot(base, n.a, frozen);
        if (slot < 0) break;
        Partial p = base;
        if (!p.assign(slot, tr.vals[ectx.fire_tick][slot])) return {};
        return {p};
      }
      case COp::CmpEq:
      case COp::Iff: {
        int slot = writable_slot(base, n.a, frozen);
        if (slot >= 0) return assign_all(base, slot, n.b, frozen);
        slot = writable_slot(base, n.b, frozen);
        if (slot >= 0) return assign_all(base, slot, n.a, frozen);
        // membership biconditional: (x ISIN svar) <-> cond
        if (n.op == COp::Iff) {
          for (bool left : {true, false}) {
            int mem = left ? n.a : n.b;
            int cond = left ? n.b : n.a;
            const CNode& m = ex.nodes[mem];
            if (m.op != COp::IsIn && m.op != COp::NotIsIn) continue;
            int svar = writable_slot(base, m.b, frozen);
            if (svar < 0) continue;
            Value elem = eval_under(base, m.a, frozen);
            bool want = eval_under(base, cond, frozen).as_bool();
            if (m.op == COp::NotIsIn) want = !want;
            Partial p = base;
            if (!p.member(svar, std::move(elem), want)) return {};
            return {p};
          }
        }
        break;
      }
      case COp::IsIn:
      case COp::NotIsIn: {
        int svar = writable_slot(base, n.b, frozen);
        if (svar < 0) break;
        Value elem = eval_under(base, n.a, frozen);
        Partial p = base;
        if (!p.member(svar, std::move(elem), n.op == COp::IsIn)) return {};
        return {p};
      }
      case COp::Not: {
        const CNode& m = ex.nodes[n.a];
        if (m.op == COp::IsIn || m.op == COp::NotIsIn) {
          int svar = writable_slot(base, m.b, frozen);
          if (svar >= 0) {
            Value elem = eval_under(base, m.a, frozen);
            Partial p = base;
            if (!p.member(svar, std::move(elem), m.op == COp::NotIsIn)) return {};
            return {p};
          }
        }
        break;
      }
      default:
        break;
    }
    // plain boolean condition
    return eval_under(base, node, frozen).as_bool() ? std::vector<Partial>{base}
                                                    : std::vector<Partial>{};
  }

  std::vector<Partial> assign_all(const Partial& base, int slot, int rhs, bool frozen) {
    ValueVec vs = eval_resolutions_under(base, rhs, frozen);
    std::vector<Partial> out;
    for (auto& v : vs) {
      Partial p = base;
      if (p.assign(slot, std::move(v))) out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<Partial> solve_conj(std::vector<int> children, const Partial& base,
                                  bool frozen) {
    if (children.empty()) return {base};
    for (size_t i = 0; i < children.size(); ++i) {
      try {
        auto sols = solve(children[i], base, frozen);
        std::vector<int> rest = children;
        rest.erase(rest.begin() + static_cast<long>(i));
        std::vector<Partial> out;
        for (const auto& p : sols) {
          auto rs = solve_conj(rest, p, frozen);
          out.insert(out.end(), rs.begin(), rs.end());
        }
        return out;
      } catch (const UnassignedRead&) {
        continue;  // blocked on an undecided own value: defer this conjunct
      }
    }
    if (!frozen) return solve_conj(children, base, true);
    throw AstralError("cyclic dependency between exit constraints");
  }

  std::vector<Partial> run() {
    try {
      return solve(ex.root, Partial{}, false);
    } catch (const UnassignedRead&) {
      return solve(ex.root, Partial{}, true);
    }
  }
};

}  // namespace

// --- simulation ---------------------------------------------------------------

bool SimState::same_as(const SimState& o) const {
  if (!trace.same_shape(o.trace)) return false;
  for (size_t i = 0; i < exec.size(); ++i) {
    if (exec[i].trans != o.exec[i].trans || exec[i].start != o.exec[i].start ||
        exec[i].end != o.exec[i].end || !(exec[i].params == o.exec[i].params))
      return false;
  }
  return pending == o.pending;
}

namespace {

// Domain values of a variable component type (for unconstrained initial
// variables).
ValueVec component_domain(const CompiledSystem& sys, int proc, const CVar& v) {
  return enumerate_domain(sys, v.type, proc, sys.bounds);
}

}  // namespace

std::vector<SimState> initial_states(const std::shared_ptr<CompiledSystem>& sysp) {
  const CompiledSystem& sys = *sysp;
  Trace seed;
  seed.sys = &sys;
  seed.horizon = 0;
  seed.vals.assign(1, Frame(static_cast<size_t>(sys.total_slots)));
  seed.events.assign(1, {});
  seed.init_recording();

  std::vector<Frame> frames{seed.vals[0]};
  for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
    const CInst& inst = sys.instances[ii];
    const CProc& proc = sys.procs[inst.proc];
    std::vector<Frame> next;
    for (const Frame& f : frames) {
      seed.vals[0] = f;
      std::vector<bool> decided(static_cast<size_t>(sys.total_slots), true);
      for (int s = inst.frame_base; s < inst.frame_base + proc.frame_size; ++s)
        decided[s] = false;
      Solver solver(sys, proc.initial, seed, static_cast<int>(ii), 0, 0, decided);
      std::vector<Partial> sols = solver.run();
      if (sols.empty())
        throw AstralError("initial clause of " + sym_name(proc.name) +
                          " is unsatisfiable");
      for (const Partial& p : sols) {
        // complete: enumerate any unassigned slots over their domains
        Frame g = f;
        for (const auto& [slot, v] : p.slots) g[slot] = v;
        for (const auto& [slot, memb] : p.sets) {
          ValueVec elems;  // initial sets start from empty
          for (const auto& [e, in] : memb)
            if (in) elems.push_back(e);
          g[slot] = Value::set(std::move(elems));
        }
        std::vector<int> open;
        for (size_t vi = 0; vi < proc.vars.size(); ++vi) {
          const CVar& v = proc.vars[vi];
          for (int c = 0; c < v.components; ++c) {
            int slot = inst.frame_base + v.slot_base + c;
            if (!p.has_slot(slot)) open.push_back(slot);
          }
        }
        // Slots the initial clause leaves unconstrained branch over their
        // whole domain (with a small cap).
        std::function<void(size_t, Frame&)> expand = [&](size_t oi, Frame& cur) {
          if (oi >= open.size()) {
            next.push_back(cur);
            return;
          }
          int slot = open[oi];
          // find the variable to get its type
          const CVar* var = nullptr;
          for (const auto& v : proc.vars)
            if (slot >= inst.frame_base + v.slot_base &&
                slot < inst.frame_base + v.slot_base + v.components)
              var = &v;
          ValueVec dom = component_domain(sys, inst.proc, *var);
          if (next.size() + dom.size() > 4096)
            throw AstralError("initial clause of " + sym_name(proc.name) +
                              " leaves too many unconstrained valuations");
          for (const auto& dv : dom) {
            cur[slot] = dv;
            expand(oi + 1, cur);
          }
        };
        expand(0, g);
      }
    }
    frames = std::move(next);
  }

  // Joint verification of every instance's initial clause.
  std::vector<SimState> out;
  for (Frame& f : frames) {
    seed.vals[0] = f;
    bool ok = true;
    for (size_t ii = 0; ii < sys.instances.size() && ok; ++ii) {
      const CProc& proc = sys.procs[sys.instances[ii].proc];
      EvalLimits lim;
      std::vector<Value> frame(static_cast<size_t>(proc.initial.frame_size) + 1);
      ExitCtx ec;
      ec.self_inst = static_cast<int>(ii);
      ec.fire_tick = 0;
      EvalCtx ctx;
      ctx.trace = &seed;
      ctx.sys = &sys;
      ctx.now = 0;
      ctx.self_inst = static_cast<int>(ii);
      ctx.frame = frame.data();
      ctx.exit_ctx = &ec;
      ctx.limits = &lim;
      ok = holds_universally(proc.initial, ctx);
    }
    if (!ok) continue;
    SimState st;
    st.trace = seed;
    st.trace.vals[0] = std::move(f);
    st.exec.assign(sys.instances.size(), {});
    st.pending.assign(static_cast<size_t>(trans_count(sys)), {});
    out.push_back(std::move(st));
  }
  if (out.empty()) throw AstralError("no initial state satisfies the initial clauses");
  // dedupe
  std::vector<SimState> uniq;
  for (auto& s : out) {
    bool dup = false;
    for (const auto& u : uniq)
      if (u.same_as(s)) dup = true;
    if (!dup) uniq.push_back(std::move(s));
  }
  return uniq;
}

namespace {

bool entry_holds(const CompiledSystem& sys, Trace& tr, int tick, int inst,
                 const CTrans& t, const ValueVec& params) {
  if (!t.entry.compile_error.empty())
    throw AstralError("entry of " + sym_name(t.name) +
                      " does not evaluate: " + t.entry.compile_error);
  thread_local std::vector<Value> frame;
  frame.assign(static_cast<size_t>(t.entry.frame_size) + 1, Value());
  for (size_t i = 0; i < params.size(); ++i) frame[i] = params[i];
  EvalLimits lim;
  EvalCtx ctx;
  ctx.trace = &tr;
  ctx.sys = &sys;
  ctx.now = tick;
  ctx.self_inst = inst;
  ctx.frame = frame.data();
  ctx.limits = &lim;
  if (!t.entry.nodes[t.entry.root].has_choose) return eval_root(t.entry, ctx).as_bool();
  // entry is enabled if some epsilon-resolution satisfies it
  ValueVec rs = eval_resolutions(t.entry, ctx);
  for (const auto& r : rs)
    if (r.as_bool()) return true;
  return false;
}

std::vector<std::pair<int, ValueVec>> feasible_starts(const CompiledSystem& sys,
                                                      SimState& st, int tick,
                                                      int inst) {
  std::vector<std::pair<int, ValueVec>> out;
  const CProc& proc = sys.procs[sys.instances[inst].proc];
  for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
    const CTrans& t = proc.transitions[ti];
    if (t.duration < 1)
      throw AstralError("transition " + sym_name(t.name) +
                        " has no concrete positive duration");
    if (t.exported) {
      // parameters come from unserved calls
      const PendingCalls& pc = st.pending[trans_key_of(sys, inst, static_cast<int>(ti))];
      const ValueVec* prev = nullptr;
      for (const auto& tuple : pc) {
        if (prev && *prev == tuple) continue;  // identical pending tuples once
        prev = &tuple;
        if (entry_holds(sys, st.trace, tick, inst, t, tuple))
          out.emplace_back(static_cast<int>(ti), tuple);
      }
      continue;
    }
    if (t.params.empty()) {
      if (entry_holds(sys, st.trace, tick, inst, t, {}))
        out.emplace_back(static_cast<int>(ti), ValueVec{});
      continue;
    }
    // non-exported parameterized: branch over the declared domains
    std::function<void(size_t, ValueVec&)> rec = [&](size_t pi, ValueVec& tuple) {
      if (pi >= t.param_domains.size()) {
        if (entry_holds(sys, st.trace, tick, inst, t, tuple))
          out.emplace_back(static_cast<int>(ti), tuple);
        return;
      }
      const CDomain& d = t.param_domains[pi];
      if (d.size() == 0 && !d.is_int_range)
        throw AstralError("parameter domain of " + sym_name(t.name) +
                          " is not finite-izable");
      for (size_t i = 0; i < d.size(); ++i) {
        tuple.push_back(d.at(i));
        rec(pi + 1, tuple);
        tuple.pop_back();
      }
    };
    ValueVec tuple;
    rec(0, tuple);
  }
  return out;
}

}  // namespace

std::vector<SimState> step_system(const std::shared_ptr<CompiledSystem>& sysp,
                                  const EnvSchedule& sched, const SimState& s0,
                                  int tick) {
  const CompiledSystem& sys = *sysp;
  SimState base = s0;
  Trace& tr = base.trace;
  if (tick > 0) {
    if (static_cast<int>(tr.vals.size()) != tick)
      throw AstralError("step_system: trace has " + std::to_string(tr.vals.size()) +
                        " ticks, expected " + std::to_string(tick));
    tr.vals.push_back(tr.vals.back());
    tr.events.push_back({});
    tr.horizon = tick;
  }

  // (1) environment calls land
  for (const auto& c : sched.calls) {
    if (c.tick != tick) continue;
    int inst = sys.inst_of(c.instance);
    if (inst < 0) throw AstralError("schedule calls unknown instance " + sym_name(c.instance));
    const CProc& proc = sys.procs[sys.instances[inst].proc];
    auto ti = proc.trans_index.find(c.transition);
    if (ti == proc.trans_index.end())
      throw AstralError("schedule calls unknown transition " + sym_name(c.transition));
    const CTrans& t = proc.transitions[ti->second];
    if (!t.exported)
      throw AstralError("schedule calls unexported transition " + sym_name(c.transition));
    if (c.params.size() != t.params.size())
      throw AstralError("schedule call parameter arity mismatch for " +
                        sym_name(c.transition));
    tr.record_call(tick, inst, ti->second, c.params);
    insert_sorted(base.pending[trans_key_of(sys, inst, ti->second)], c.params);
  }

  // (2) due transitions end; exits are constraints on the post-state
  struct Ender {
    int inst;
    int trans;
    ValueVec params;
    int fire;
  };
  std::vector<Ender> enders;
  for (size_t i = 0; i < base.exec.size(); ++i) {
    if (base.exec[i].trans >= 0 && base.exec[i].end == tick) {
      enders.push_back({static_cast<int>(i), base.exec[i].trans, base.exec[i].params,
                        base.exec[i].start});
      base.exec[i] = {};
    }
  }
  for (const auto& e : enders) tr.record_end(tick, e.inst, e.trans, e.params, e.fire);

  std::vector<Frame> post_frames{tr.vals[tick]};
  if (!enders.empty()) {
    std::vector<bool> decided(static_cast<size_t>(sys.total_slots), true);
    for (const auto& e : enders) {
      const CInst& inst = sys.instances[e.inst];
      for (int s = inst.frame_base;
           s < inst.frame_base + sys.procs[inst.proc].frame_size; ++s)
        decided[s] = false;
    }
    for (const auto& e : enders) {
      const CInst& inst = sys.instances[e.inst];
      const CProc& proc = sys.procs[inst.proc];
      const CTrans& t = proc.transitions[e.trans];
      if (!t.exit.compile_error.empty())
        throw AstralError("exit of " + sym_name(t.name) +
                          " does not evaluate: " + t.exit.compile_error);
      std::vector<Frame> next;
      for (Frame& f : post_frames) {
        tr.vals[tick] = f;
        Solver solver(sys, t.exit, tr, e.inst, e.fire, tick, decided);
        for (size_t i = 0; i < e.params.size(); ++i) solver.frame[i] = e.params[i];
        std::vector<Partial> sols = solver.run();
        for (const Partial& p : sols) {
          Frame g = f;
          for (const auto& [slot, v] : p.slots) g[slot] = v;
          for (const auto& [slot, memb] : p.sets) {
            ValueVec elems = f[slot].as_set();
            for (const auto& [el, in] : memb) {
              auto it = std::lower_bound(elems.begin(), elems.end(), el);
              bool present = it != elems.end() && *it == el;
              if (in && !present) elems.insert(it, el);
              if (!in && present) elems.erase(it);
            }
            g[slot] = Value::set(std::move(elems));
          }
          next.push_back(std::move(g));
        }
      }
      if (next.empty())
        throw AstralError("exit assertion of " + sym_name(t.name) + " on " +
                          sym_name(inst.name) + " unsatisfiable at tick " +
                          std::to_string(tick));
      // mark this instance's slots decided for subsequent enders
      for (int s = inst.frame_base;
           s < inst.frame_base + sys.procs[inst.proc].frame_size; ++s)
        decided[s] = true;
      post_frames = std::move(next);
    }
    // joint verification of every ender's exit against the final frames
    std::vector<Frame> verified;
    for (Frame& f : post_frames) {
      tr.vals[tick] = f;
      bool ok = true;
      for (const auto& e : enders) {
        const CProc& proc = sys.procs[sys.instances[e.inst].proc];
        const CTrans& t = proc.transitions[e.trans];
        std::vector<Value> frame(static_cast<size_t>(t.exit.frame_size) + 1);
        for (size_t i = 0; i < e.params.size(); ++i) frame[i] = e.params[i];
        ExitCtx ec;
        ec.self_inst = e.inst;
        ec.fire_tick = e.fire;
        EvalLimits lim;
        EvalCtx ctx;
        ctx.trace = &tr;
        ctx.sys = &sys;
        ctx.now = tick;
        ctx.self_inst = e.inst;
        ctx.frame = frame.data();
        ctx.exit_ctx = &ec;
        ctx.limits = &lim;
        if (!holds_universally(t.exit, ctx)) {
          ok = false;
          break;
        }
      }
      if (ok) verified.push_back(std::move(f));
    }
    if (verified.empty())
      throw AstralError("exit assertions jointly unsatisfiable at tick " +
                        std::to_string(tick) +
                        " (possible same-tick cross-instance dependency)");
    post_frames = std::move(verified);
  }

  // (3) starts, branching over post-frames and feasible choices
  std::vector<SimState> out;
  for (Frame& f : post_frames) {
    SimState st = base;
    st.trace.vals[tick] = f;
    if (tick > 0) {
      for (int slot = 0; slot < sys.total_slots; ++slot)
        if (!(st.trace.vals[tick][slot] == st.trace.vals[tick - 1][slot]))
          st.trace.note_changed(tick, slot);
    }
    // feasible (transition, params) per idle instance
    std::vector<std::vector<std::pair<int, ValueVec>>> menu(sys.instances.size());
    for (size_t i = 0; i < sys.instances.size(); ++i) {
      if (st.exec[i].trans >= 0) continue;
      menu[i] = feasible_starts(sys, st, tick, static_cast<int>(i));
    }
    std::function<void(size_t, SimState&)> pick = [&](size_t i, SimState& cur) {
      if (i >= sys.instances.size()) {
        out.push_back(cur);
        return;
      }
      if (menu[i].empty()) {
        pick(i + 1, cur);
        return;
      }
      for (const auto& [ti, params] : menu[i]) {
        SimState branch = cur;
        const CProc& proc = sys.procs[sys.instances[i].proc];
        const CTrans& t = proc.transitions[ti];
        branch.trace.record_start(tick, static_cast<int>(i), ti, params);
        branch.exec[i] = {ti, params, tick, tick + t.duration};
        if (t.exported) {
          if (!erase_one(branch.pending[trans_key_of(sys, static_cast<int>(i), ti)],
                         params))
            throw AstralError("start without a pending call (internal)");
        }
        pick(i + 1, branch);
      }
    };
    pick(0, st);
  }
  return out;
}

ExploreResult explore(const std::shared_ptr<CompiledSystem>& sysp,
                      const EnvSchedule& sched, int horizon, uint64_t state_budget) {
  ExploreResult res;
  std::vector<SimState> states = initial_states(sysp);
  res.states = states.size();
  for (int t = 0; t <= horizon; ++t) {
    std::vector<SimState> next;
    for (const SimState& s : states) {
      auto succ = step_system(sysp, sched, s, t);
      for (auto& x : succ) {
        bool dup = false;
        for (const auto& u : next)
          if (u.same_as(x)) {
            dup = true;
            break;
          }
        if (!dup) next.push_back(std::move(x));
      }
    }
    states = std::move(next);
    res.states += states.size();
    if (res.states > state_budget) {
      res.complete = false;
      break;
    }
  }
  for (auto& s : states) {
    s.trace.horizon = static_cast<int>(s.trace.vals.size()) - 1;
    res.traces.push_back(std::move(s.trace));
  }
  return res;
}

SimState state_at(const std::shared_ptr<CompiledSystem>& sysp, const Trace& tr, int t) {
  const CompiledSystem& sys = *sysp;
  SimState st;
  st.trace = tr;
  st.trace.vals.resize(static_cast<size_t>(t) + 1);
  st.trace.events.resize(static_cast<size_t>(t) + 1);
  st.trace.horizon = t;
  st.trace.finalize();
  st.exec.assign(sys.instances.size(), {});
  st.pending.assign(static_cast<size_t>(trans_count(sys)), {});
  for (int k = 0; k <= t; ++k) {
    for (const auto& c : tr.events[k].calls)
      insert_sorted(st.pending[trans_key_of(sys, c.inst, c.trans)], c.params);
    for (const auto& s : tr.events[k].starts) {
      const CProc& proc = sys.procs[sys.instances[s.inst].proc];
      const CTrans& tdecl = proc.transitions[s.trans];
      if (tdecl.exported)
        erase_one(st.pending[trans_key_of(sys, s.inst, s.trans)], s.params);
      st.exec[s.inst] = {s.trans, s.params, k, k + tdecl.duration};
    }
    for (const auto& e : tr.events[k].ends)
      if (st.exec[e.inst].trans == e.trans && st.exec[e.inst].end == k)
        st.exec[e.inst] = {};
  }
  return st;
}

Enabledness enabled(const std::shared_ptr<CompiledSystem>& sysp, const Trace& tr,
                    int inst, int trans, int t) {
  const CompiledSystem& sys = *sysp;
  Enabledness out;
  // busy: some start strictly before t still executing at t
  const CProc& proc = sys.procs[sys.instances[inst].proc];
  for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
    const TransOccs& o = tr.occs_of(inst, static_cast<int>(ti));
    int dur = proc.transitions[ti].duration;
    if (dur < 1) continue;
    for (int s : o.start_ticks)
      if (s < t && s + dur > t) return out;
  }
  // Entry view: phase 3 of tick t sees calls and ends at t, but not the
  // starts taken at t itself.
  Trace view = tr;
  view.vals.resize(static_cast<size_t>(t) + 1);
  view.events.resize(static_cast<size_t>(t) + 1);
  view.events[t].starts.clear();
  view.horizon = t;
  view.finalize();

  const CTrans& td = proc.transitions[trans];
  if (td.exported) {
    // unserved calls: all calls up to t minus tuples consumed by starts < t
    PendingCalls pc;
    const TransOccs& o = tr.occs_of(inst, trans);
    for (const auto& [k, ps] : o.calls)
      if (k <= t) insert_sorted(pc, ps);
    for (size_t j = 0; j < o.start_ticks.size(); ++j)
      if (o.start_ticks[j] < t) erase_one(pc, o.start_params[j]);
    const ValueVec* prev = nullptr;
    for (const auto& tuple : pc) {
      if (prev && *prev == tuple) continue;
      prev = &tuple;
      if (entry_holds(sys, view, t, inst, td, tuple)) out.feasible.push_back(tuple);
    }
  } else if (td.params.empty()) {
    if (entry_holds(sys, view, t, inst, td, {})) out.feasible.push_back({});
  } else {
    std::function<void(size_t, ValueVec&)> rec = [&](size_t pi, ValueVec& tuple) {
      if (pi >= td.param_domains.size()) {
        if (entry_holds(sys, view, t, inst, td, tuple)) out.feasible.push_back(tuple);
        return;
      }
      const CDomain& d = td.param_domains[pi];
      for (size_t i = 0; i < d.size(); ++i) {
        tuple.push_back(d.at(i));
        rec(pi + 1, tuple);
        tuple.pop_back();
      }
    };
    ValueVec tuple;
    rec(0, tuple);
  }
  out.enabled = !out.feasible.empty();
  return out;
}

// --- axiom checking -------------------------------------------------------------

DiagnosticList axiom_check(const std::shared_ptr<CompiledSystem>& sysp, const Trace& tr,
                           const AxiomCheckOpts& opts) {
  const CompiledSystem& sys = *sysp;
  DiagnosticList diags;
  auto diag = [&](const std::string& code, const std::string& msg) {
    Diagnostic d;
    d.code = code;
    d.message = msg;
    diags.push_back(std::move(d));
  };
  auto duration_of = [&](int inst, int trans) -> int {
    int proc = sys.instances[inst].proc;
    if (opts.duration_override) return (*opts.duration_override)[proc][trans];
    return sys.procs[proc].transitions[trans].duration;
  };
  auto tname = [&](int inst, int trans) {
    return sym_name(sys.instances[inst].name) + "." +
           sym_name(sys.procs[sys.instances[inst].proc].transitions[trans].name);
  };

  // end pairing and bookkeeping
  for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
    const CProc& proc = sys.procs[sys.instances[ii].proc];
    for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
      const TransOccs& o = tr.occs_of(static_cast<int>(ii), static_cast<int>(ti));
      int dur = duration_of(static_cast<int>(ii), static_cast<int>(ti));
      if (dur < 1) {
        if (!o.start_ticks.empty() || !o.end_ticks.empty())
          diag("symbolic-duration", "no concrete duration for " +
                                        tname(static_cast<int>(ii), static_cast<int>(ti)));
        continue;
      }
      for (size_t k = 0; k < o.end_ticks.size(); ++k) {
        int fire = o.end_fire[k];
        bool matched = false;
        for (size_t j = 0; j < o.start_ticks.size(); ++j)
          if (o.start_ticks[j] == fire && o.start_params[j] == o.end_params[k])
            matched = true;
        if (!matched || o.end_ticks[k] != fire + dur)
          diag("end-pairing", "end of " + tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                  " at " + std::to_string(o.end_ticks[k]) +
                                  " lacks a matching start " + std::to_string(dur) +
                                  " earlier");
      }
      for (size_t j = 0; j < o.start_ticks.size(); ++j) {
        if (o.start_ticks[j] + dur > tr.horizon) continue;  // ends beyond horizon
        bool matched = false;
        for (size_t k = 0; k < o.end_ticks.size(); ++k)
          if (o.end_fire[k] == o.start_ticks[j]) matched = true;
        if (!matched)
          diag("end-pairing", "start of " + tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                  " at " + std::to_string(o.start_ticks[j]) +
                                  " has no end at " +
                                  std::to_string(o.start_ticks[j] + dur));
      }
    }
  }

  // trans_mutex: per instance, executing intervals must not overlap
  for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
    std::vector<std::pair<int, int>> intervals;  // (start, end)
    const CProc& proc = sys.procs[sys.instances[ii].proc];
    for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
      const TransOccs& o = tr.occs_of(static_cast<int>(ii), static_cast<int>(ti));
      int dur = duration_of(static_cast<int>(ii), static_cast<int>(ti));
      if (dur < 1) continue;
      for (int s : o.start_ticks) intervals.emplace_back(s, s + dur);
    }
    std::sort(intervals.begin(), intervals.end());
    for (size_t k = 1; k < intervals.size(); ++k)
      if (intervals[k].first < intervals[k - 1].second)
        diag("trans_mutex", "overlapping executions on " +
                                sym_name(sys.instances[ii].name) + " at tick " +
                                std::to_string(intervals[k].first));
  }

  // vars_no_change: recompute changes from valuations
  for (int t = 1; t <= tr.horizon; ++t) {
    for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
      const CInst& inst = sys.instances[ii];
      const CProc& proc = sys.procs[inst.proc];
      bool changed = false;
      for (int s = inst.frame_base; s < inst.frame_base + proc.frame_size; ++s)
        if (!(tr.vals[t][s] == tr.vals[t - 1][s])) changed = true;
      if (!changed) continue;
      bool ended = false;
      for (const auto& e : tr.events[t].ends)
        if (e.inst == static_cast<int>(ii)) ended = true;
      if (!ended)
        diag("vars_no_change", "variables of " + sym_name(inst.name) +
                                   " change at tick " + std::to_string(t) +
                                   " with no end event");
    }
  }

  // trans_called + call_fire_parms: pending-call discipline
  for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
    const CProc& proc = sys.procs[sys.instances[ii].proc];
    for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
      const CTrans& td = proc.transitions[ti];
      const TransOccs& o = tr.occs_of(static_cast<int>(ii), static_cast<int>(ti));
      if (!td.exported) {
        if (!o.calls.empty())
          diag("trans_called",
               "call to unexported transition " + tname(static_cast<int>(ii), static_cast<int>(ti)));
        continue;
      }
      PendingCalls pc;
      size_t ci = 0;
      for (size_t j = 0; j < o.start_ticks.size(); ++j) {
        while (ci < o.calls.size() && o.calls[ci].first <= o.start_ticks[j])
          insert_sorted(pc, o.calls[ci++].second);
        if (!erase_one(pc, o.start_params[j]))
          diag("call_fire_parms", "start of " +
                                      tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                      " at " + std::to_string(o.start_ticks[j]) +
                                      " without a matching unserved call");
      }
    }
  }

  // assertion axioms
  if (opts.check_assertions) {
    for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
      const CProc& proc = sys.procs[sys.instances[ii].proc];
      // initial_state
      {
        std::vector<Value> frame(static_cast<size_t>(std::max(proc.initial.frame_size, 1)) + 1);
        ExitCtx ec;
        ec.self_inst = static_cast<int>(ii);
        ec.fire_tick = 0;
        EvalLimits lim;
        EvalCtx ctx;
        ctx.trace = &tr;
        ctx.sys = &sys;
        ctx.now = 0;
        ctx.self_inst = static_cast<int>(ii);
        ctx.frame = frame.data();
        ctx.exit_ctx = &ec;
        ctx.limits = &lim;
        if (proc.initial.compile_error.empty() && !holds_universally(proc.initial, ctx))
          diag("initial_state", "initial clause of " + sym_name(sys.instances[ii].name) +
                                    " does not hold at tick 0");
      }
      for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
        const CTrans& td = proc.transitions[ti];
        const TransOccs& o = tr.occs_of(static_cast<int>(ii), static_cast<int>(ti));
        Trace& mtr = const_cast<Trace&>(tr);
        for (size_t j = 0; j < o.start_ticks.size(); ++j) {
          if (td.entry.compile_error.empty() &&
              !entry_holds(sys, mtr, o.start_ticks[j], static_cast<int>(ii), td,
                           o.start_params[j]))
            diag("trans_entry", "entry of " + tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                    " does not hold at its start tick " +
                                    std::to_string(o.start_ticks[j]));
        }
        for (size_t k = 0; k < o.end_ticks.size(); ++k) {
          if (!td.exit.compile_error.empty()) continue;
          std::vector<Value> frame(static_cast<size_t>(td.exit.frame_size) + 1);
          for (size_t i = 0; i < o.end_params[k].size(); ++i) frame[i] = o.end_params[k][i];
          ExitCtx ec;
          ec.self_inst = static_cast<int>(ii);
          ec.fire_tick = o.end_fire[k];
          EvalLimits lim;
          EvalCtx ctx;
          ctx.trace = &tr;
          ctx.sys = &sys;
          ctx.now = o.end_ticks[k];
          ctx.self_inst = static_cast<int>(ii);
          ctx.frame = frame.data();
          ctx.exit_ctx = &ec;
          ctx.limits = &lim;
          if (!holds_universally(td.exit, ctx))
            diag("trans_exit", "exit of " + tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                   " does not hold at its end tick " +
                                   std::to_string(o.end_ticks[k]));
        }
      }
    }
  }

  // trans_fire: maximal progress
  if (opts.check_maximal_progress) {
    for (int t = 0; t <= tr.horizon; ++t) {
      for (size_t ii = 0; ii < sys.instances.size(); ++ii) {
        bool started = false;
        for (const auto& s : tr.events[t].starts)
          if (s.inst == static_cast<int>(ii)) started = true;
        if (started) continue;
        bool busy = false;
        const CProc& proc = sys.procs[sys.instances[ii].proc];
        for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
          int dur = duration_of(static_cast<int>(ii), static_cast<int>(ti));
          if (dur < 1) continue;
          for (int s : tr.occs_of(static_cast<int>(ii), static_cast<int>(ti)).start_ticks)
            if (s < t && s + dur > t) busy = true;
        }
        if (busy) continue;
        for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
          if (!sys.procs[sys.instances[ii].proc].transitions[ti].entry.compile_error.empty())
            continue;
          Enabledness en =
              enabled(sysp, tr, static_cast<int>(ii), static_cast<int>(ti), t);
          if (en.enabled) {
            diag("trans_fire", sym_name(sys.instances[ii].name) + " is idle at tick " +
                                   std::to_string(t) + " while " +
                                   tname(static_cast<int>(ii), static_cast<int>(ti)) +
                                   " is enabled");
            break;
          }
        }
      }
    }
  }

  return diags;
}

}  // namespace astral
