#include "astral/eval.hpp"

#include <algorithm>

namespace astral {

namespace {

[[noreturn]] void efail(const std::string& msg) { throw AstralError(msg); }

int64_t want_int(const Value& v) { return v.as_int(); }

// last element of `ticks` that is <= t; -1 when none
int last_le(const std::vector<int>& ticks, int t) {
  auto it = std::upper_bound(ticks.begin(), ticks.end(), t);
  if (it == ticks.begin()) return -1;
  return static_cast<int>(it - ticks.begin()) - 1;
}

struct Resolved {
  int inst;
  int proc;
  int member;  // var or transition index, -1 if unresolved
};

}  // namespace

bool ChoiceIter::advance() {
  while (!steps.empty()) {
    if (++steps.back().taken < steps.back().total) return true;
    steps.pop_back();
  }
  return false;
}

namespace {

struct Evaluator {
  const CExpr& ex;
  EvalCtx& ctx;

  Evaluator(const CExpr& e, EvalCtx& c) : ex(e), ctx(c) {}

  Value eval(int ni) {
    if (ctx.limits && ++ctx.limits->visits > ctx.limits->max_visits)
      throw BudgetExceeded("evaluation budget exceeded");
    const CNode& n = ex.nodes[ni];
    switch (n.op) {
      case COp::Lit:
        return ex.value_pool[n.pool];
      case COp::BoundRef:
        return ctx.frame[n.frame];
      case COp::NowRef:
        if (ctx.now < 0) efail("now is undefined before time 0");
        return Value::integer(ctx.now);
      case COp::VarRead:
        return var_read(n);
      case COp::And: {
        for (int i = 0; i < n.nargs; ++i)
          if (!eval(ex.arg_pool[n.args_at + i]).as_bool()) return Value::boolean(false);
        return Value::boolean(true);
      }
      case COp::Or: {
        for (int i = 0; i < n.nargs; ++i)
          if (eval(ex.arg_pool[n.args_at + i]).as_bool()) return Value::boolean(true);
        return Value::boolean(false);
      }
      case COp::Not:
        return Value::boolean(!eval(n.a).as_bool());
      case COp::Implies: {
        if (!eval(n.a).as_bool()) return Value::boolean(true);
        return Value::boolean(eval(n.b).as_bool());
      }
      case COp::Iff:
        return Value::boolean(eval(n.a).as_bool() == eval(n.b).as_bool());
      case COp::CmpEq:
        return Value::boolean(eval(n.a) == eval(n.b));
      case COp::CmpNe:
        return Value::boolean(eval(n.a) != eval(n.b));
      case COp::CmpLt:
        return Value::boolean(want_int(eval(n.a)) < want_int(eval(n.b)));
      case COp::CmpLe:
        return Value::boolean(want_int(eval(n.a)) <= want_int(eval(n.b)));
      case COp::CmpGt:
        return Value::boolean(want_int(eval(n.a)) > want_int(eval(n.b)));
      case COp::CmpGe:
        return Value::boolean(want_int(eval(n.a)) >= want_int(eval(n.b)));
      case COp::Add:
        return Value::integer(want_int(eval(n.a)) + want_int(eval(n.b)));
      case COp::Sub:
        return Value::integer(want_int(eval(n.a)) - want_int(eval(n.b)));
      case COp::Mul:
        return Value::integer(want_int(eval(n.a)) * want_int(eval(n.b)));
      case COp::Div: {
        int64_t d = want_int(eval(n.b));
        if (d == 0) efail("division by zero");
        return Value::integer(want_int(eval(n.a)) / d);
      }
      case COp::Mod: {
        int64_t d = want_int(eval(n.b));
        if (d == 0) efail("MOD by zero");
        int64_t r = want_int(eval(n.a)) % d;
        if (r < 0) r += d < 0 ? -d : d;
        return Value::integer(r);
      }
      case COp::Neg:
        return Value::integer(-want_int(eval(n.a)));
      case COp::UnionOp: {
        ValueVec xs = eval(n.a).as_set();
        const ValueVec& ys = eval(n.b).as_set();
        xs.insert(xs.end(), ys.begin(), ys.end());
        return Value::set(std::move(xs));
      }
      case COp::SetDiffOp: {
        const ValueVec& xs = eval(n.a).as_set();
        const ValueVec& ys = eval(n.b).as_set();
        ValueVec out;
        for (const auto& x : xs)
          if (!std::binary_search(ys.begin(), ys.end(), x)) out.push_back(x);
        return Value::set(std::move(out));
      }
      case COp::IsIn:
      case COp::NotIsIn: {
        Value x = eval(n.a);
        const ValueVec& ys = eval(n.b).as_set();
        bool in = std::binary_search(ys.begin(), ys.end(), x);
        return Value::boolean(n.op == COp::IsIn ? in : !in);
      }
      case COp::ContainedIn:
      case COp::SubsetOp: {
        const ValueVec& xs = eval(n.a).as_set();
        const ValueVec& ys = eval(n.b).as_set();
        bool sub = std::includes(ys.begin(), ys.end(), xs.begin(), xs.end(),
                                 [](const Value& a, const Value& b) { return a < b; });
        if (n.op == COp::SubsetOp) sub = sub && xs.size() < ys.size();
        return Value::boolean(sub);
      }
      case COp::ConcatOp: {
        ValueVec xs = eval(n.a).as_list();
        const ValueVec& ys = eval(n.b).as_list();
        xs.insert(xs.end(), ys.begin(), ys.end());
        return Value::list(std::move(xs));
      }
      case COp::SetSize:
        return Value::integer(static_cast<int64_t>(eval(n.a).as_set().size()));
      case COp::ListLen:
        return Value::integer(static_cast<int64_t>(eval(n.a).as_list().size()));
      case COp::Index: {
        Value base = eval(n.a);
        Value idx = eval(n.b);
        if (base.is_struct()) {
          Sym f = idx.as_sym();
          for (const auto& [fn, fv] : base.as_struct().fields)
            if (fn == f) return fv;
          efail("structure has no field " + sym_name(f));
        }
        const ValueVec& xs = base.as_list();
        int64_t i = idx.as_int();
        if (i < 1 || i > static_cast<int64_t>(xs.size()))
          efail("list index out of range: " + std::to_string(i));
        return xs[static_cast<size_t>(i - 1)];
      }
      case COp::MkList: {
        ValueVec xs;
        for (int i = 0; i < n.nargs; ++i) xs.push_back(eval(ex.arg_pool[n.args_at + i]));
        return Value::list(std::move(xs));
      }
      case COp::MkSet: {
        ValueVec xs;
        for (int i = 0; i < n.nargs; ++i) xs.push_back(eval(ex.arg_pool[n.args_at + i]));
        return Value::set(std::move(xs));
      }
      case COp::MkStruct: {
        StructVal sv;
        const auto& fields = ex.sym_pool[n.pool];
        for (int i = 0; i < n.nargs; ++i)
          sv.fields.emplace_back(fields[i], eval(ex.arg_pool[n.args_at + i]));
        return Value::structure(std::move(sv));
      }
      case COp::IfElse:
        return eval(n.a).as_bool() ? eval(n.b) : eval(n.c);
      case COp::CaseOf: {
        Value scrut = eval(n.a);
        for (int i = 0; i + 1 < n.nargs; i += 2) {
          Value m = eval(ex.arg_pool[n.args_at + i]);
          if (m == scrut) return eval(ex.arg_pool[n.args_at + i + 1]);
        }
        efail("uncovered CASE value: " + render_value(scrut));
      }
      case COp::Quant:
        return Value::boolean(quant(n));
      case COp::SetDefOp: {
        const CDomain& d = ex.domains[n.domain_at];
        ValueVec out;
        for (size_t i = 0; i < d.size(); ++i) {
          ctx.frame[n.frame] = d.at(i);
          if (eval(n.a).as_bool()) out.push_back(d.at(i));
        }
        return Value::set(std::move(out));
      }
      case COp::ChooseOp:
        return choose(n);
      case COp::PastAnchor: {
        int64_t t = want_int(eval(n.b));
        if (ctx.now >= 0 && t > ctx.now)
          efail("past-time " + std::to_string(t) + " is after the evaluation time " +
                std::to_string(ctx.now));
        int saved = ctx.now;
        ctx.now = t < 0 ? -1 : static_cast<int>(t);
        Value v;
        try {
          v = eval(n.a);
        } catch (...) {
          ctx.now = saved;
          throw;
        }
        ctx.now = saved;
        return v;
      }
      case COp::EventPred:
        return Value::boolean(event_pred(n));
      case COp::EventLast:
        return Value::integer(event_last(n));
      case COp::BecomesEq: {
        // v BECOMES e  ==  new(v) = e
        Value lhs = eval(n.a);
        Value rhs = eval(n.b);
        return Value::boolean(lhs == rhs);
      }
      case COp::NoChangeEq: {
        if (!ctx.exit_ctx) efail("NOCHANGE outside exit evaluation");
        const CNode& v = ex.nodes[n.a];
        Value now_v = eval(n.a);
        // compare against the fire-time value
        Value old_v = var_read_at(v, ctx.exit_ctx->fire_tick);
        return Value::boolean(now_v == old_v);
      }
    }
    efail("bad opcode");
  }

  Resolved resolve_inst(const CNode& n) {
    Resolved r{-1, n.c, n.b};
    switch (n.inst_mode) {
      case InstMode::Fixed:
        r.inst = n.inst;
        break;
      case InstMode::SelfInst:
        r.inst = ctx.self_inst;
        if (r.inst < 0) efail("unqualified reference outside a process context");
        break;
      case InstMode::Dynamic: {
        Value q = eval(n.inst);
        int idx = ctx.sys->inst_of(q.as_sym());
        if (idx < 0) efail("not a process instance: " + render_value(q));
        r.inst = idx;
        break;
      }
      case InstMode::None:
        efail("missing instance");
    }
    int actual_proc = ctx.sys->instances[r.inst].proc;
    if (r.proc != actual_proc) {
      r.proc = actual_proc;
      r.member = -1;  // re-resolve against the actual process type
    }
    return r;
  }

  Value var_read(const CNode& n) {
    if (n.slot_base >= 0 && n.nargs == 0) return read_slot(n, n.slot_base);
    Resolved r = resolve_inst(n);
    const CProc& p = ctx.sys->procs[r.proc];
    int var = r.member;
    if (var < 0) {
      auto it = p.var_index.find(static_cast<Sym>(n.sym_id));
      if (it == p.var_index.end())
        efail("process " + sym_name(p.name) + " has no variable " +
              sym_name(static_cast<Sym>(n.sym_id)));
      var = it->second;
    }
    const CVar& v = p.vars[var];
    int comp = 0;
    if (n.nargs > 0) {
      ValueVec args;
      for (int i = 0; i < n.nargs; ++i) args.push_back(eval(ex.arg_pool[n.args_at + i]));
      comp = component_of(v, args);
    } else if (v.components > 1) {
      efail("parameterized variable " + sym_name(v.name) + " needs arguments");
    }
    int slot = ctx.sys->instances[r.inst].frame_base + v.slot_base + comp;
    return read_slot(n, slot);
  }

  static int component_of(const CVar& v, const ValueVec& args) {
    for (size_t i = 0; i < v.param_tuples.size(); ++i)
      if (v.param_tuples[i] == args) return static_cast<int>(i);
    std::string s;
    for (const auto& a : args) s += " " + render_value(a);
    throw AstralError("argument outside the variable's parameter domain:" + s);
  }

  Value read_slot(const CNode& n, int slot) {
    if (!ctx.trace) efail("variable read without a trace");
    const ExitCtx* ec = ctx.exit_ctx;
    if (n.flag) {
      // primed: fire-time value
      if (!ec) efail("primed read outside exit evaluation");
      return ctx.trace->vals[ec->fire_tick][slot];
    }
    if (ctx.now < 0) efail("variable read before time 0");
    if (ec && ec->assigned && ctx.now == static_cast<int>(ctx.trace->vals.size()) - 1) {
      // Solving: the current frame is still being decided.
      bool own = slot_owner(slot) == ec->self_inst;
      if (own && !(*ec->assigned)[slot]) throw UnassignedRead{slot};
    }
    return ctx.trace->vals[ctx.now][slot];
  }

  Value var_read_at(const CNode& n, int tick) {
    int saved = ctx.now;
    ctx.now = tick;
    const ExitCtx* saved_ec = ctx.exit_ctx;
    ctx.exit_ctx = nullptr;
    Value v;
    try {
      // re-evaluate the VarRead node without primes at the given tick
      CNode copy = n;
      copy.flag = false;
      v = copy.slot_base >= 0 && copy.nargs == 0 ? ctx.trace->vals[tick][copy.slot_base]
                                                 : var_read_unprimed(copy);
    } catch (...) {
      ctx.now = saved;
      ctx.exit_ctx = saved_ec;
      throw;
    }
    ctx.now = saved;
    ctx.exit_ctx = saved_ec;
    return v;
  }

  Value var_read_unprimed(const CNode& n) { return var_read(n); }

  int slot_owner(int slot) const {
    const auto& is = ctx.sys->instances;
    for (int i = static_cast<int>(is.size()) - 1; i >= 0; --i)
      if (slot >= is[i].frame_base) return i;
    return -1;
  }

  // --- events ---------------------------------------------------------

  const TransOccs* occs_for(const CNode& n, Resolved& r) {
    if (r.member < 0) {
      const CProc& p = ctx.sys->procs[r.proc];
      if (n.ev == EventKind::Change) {
        auto it = p.var_index.find(static_cast<Sym>(n.sym_id));
        if (it == p.var_index.end()) efail("Change subject unknown");
        r.member = it->second;
        return nullptr;
      }
      auto it = p.trans_index.find(static_cast<Sym>(n.sym_id));
      if (it == p.trans_index.end()) efail("event subject unknown");
      r.member = it->second;
    }
    if (n.ev == EventKind::Change) return nullptr;
    return &ctx.trace->occs_of(r.inst, r.member);
  }

  const std::vector<int>& change_ticks(const CNode& n, const Resolved& r, bool& comp_level,
                                       int& slot) {
    const CProc& p = ctx.sys->procs[r.proc];
    const CVar& v = p.vars[r.member];
    if (n.nargs > 0) {
      ValueVec args;
      for (int i = 0; i < n.nargs; ++i) {
        // const_cast-free: evaluate through the main path
        args.push_back(const_cast<Evaluator*>(this)->eval(ex.arg_pool[n.args_at + i]));
      }
      int comp = component_of(v, args);
      slot = ctx.sys->instances[r.inst].frame_base + v.slot_base + comp;
      comp_level = true;
      return ctx.trace->slot_changes[slot];
    }
    comp_level = false;
    slot = -1;
    return ctx.trace->var_changes[ctx.trace->var_key(r.inst, r.member)];
  }

  bool event_pred(const CNode& n) {
    if (!ctx.trace) efail("event predicate without a trace");
    if (ctx.now < 0) return false;  // nothing happened before time 0
    int64_t tv64 = want_int(eval(n.a));
    if (tv64 < 0 || tv64 > ctx.now) return false;
    int tv = static_cast<int>(tv64);
    Resolved r = resolve_inst(n);
    if (n.ev == EventKind::Change) {
      bool comp;
      int slot;
      const std::vector<int>& ticks = change_ticks(n, r, comp, slot);
      int idx = last_le(ticks, ctx.now);
      return idx >= 0 && ticks[idx] == tv;
    }
    const TransOccs& o = *occs_for(n, r);
    switch (n.ev) {
      case EventKind::Start: {
        int idx = last_le(o.start_ticks, ctx.now);
        if (idx < 0 || o.start_ticks[idx] != tv) return false;
        return n.nargs == 0 || params_match(o.start_params[idx], n);
      }
      case EventKind::End: {
        int idx = last_le(o.end_ticks, ctx.now);
        if (idx < 0 || o.end_ticks[idx] != tv) return false;
        return n.nargs == 0 || params_match(o.end_params[idx], n);
      }
      case EventKind::Call: {
        int idx = last_le(o.call_ticks, ctx.now);
        if (idx < 0 || o.call_ticks[idx] != tv) return false;
        if (n.nargs == 0) return true;
        // some call issued at tv carries the given parameters
        for (const auto& [t, ps] : o.calls) {
          if (t > tv) break;
          if (t == tv && params_match(ps, n)) return true;
        }
        return false;
      }
      default:
        return false;
    }
  }

  bool params_match(const ValueVec& actual, const CNode& n) {
    if (static_cast<int>(actual.size()) != n.nargs) return false;
    for (int i = 0; i < n.nargs; ++i)
      if (!(actual[i] == eval(ex.arg_pool[n.args_at + i]))) return false;
    return true;
  }

  int64_t event_last(const CNode& n) {
    if (!ctx.trace) efail("event term without a trace");
    if (ctx.now < 0) return 0;
    Resolved r = resolve_inst(n);
    if (n.ev == EventKind::Change) {
      bool comp;
      int slot;
      const std::vector<int>& ticks = change_ticks(n, r, comp, slot);
      int idx = last_le(ticks, ctx.now);
      return idx < 0 ? 0 : ticks[idx];
    }
    const TransOccs& o = *occs_for(n, r);
    const std::vector<int>* ticks = nullptr;
    switch (n.ev) {
      case EventKind::Start: ticks = &o.start_ticks; break;
      case EventKind::End: ticks = &o.end_ticks; break;
      case EventKind::Call: ticks = &o.call_ticks; break;
      default: return 0;
    }
    int idx = last_le(*ticks, ctx.now);
    return idx < 0 ? 0 : (*ticks)[idx];
  }

  // --- choose ------------------------------------------------------------

  Value choose(const CNode& n) {
    const CDomain& d = ex.domains[n.domain_at];
    ValueVec witnesses;
    for (size_t i = 0; i < d.size(); ++i) {
      ctx.frame[n.frame] = d.at(i);
      if (eval(n.a).as_bool()) witnesses.push_back(d.at(i));
    }
    const ValueVec* pool_vec = &witnesses;
    ValueVec whole;
    if (witnesses.empty()) {
      // Hilbert epsilon: no witness -> an arbitrary element of the domain.
      for (size_t i = 0; i < d.size(); ++i) whole.push_back(d.at(i));
      pool_vec = &whole;
    }
    if (pool_vec->empty()) efail("choose over an empty domain");
    if (ctx.choose_mode == ChooseMode::Canonical || !ctx.choices) {
      return *std::min_element(pool_vec->begin(), pool_vec->end(),
                               [](const Value& a, const Value& b) { return a < b; });
    }
    ChoiceIter& it = *ctx.choices;
    uint32_t total = static_cast<uint32_t>(pool_vec->size());
    uint32_t taken;
    if (it.cursor < it.steps.size()) {
      taken = it.steps[it.cursor].taken;
      it.steps[it.cursor].total = total;
    } else {
      it.steps.push_back({0, total});
      taken = 0;
    }
    ++it.cursor;
    if (taken >= total) efail("choose resolution out of range");
    return (*pool_vec)[taken];
  }

  // --- quantifiers ----------------------------------------------------------

  bool quant(const CNode& n) {
    bool forall = n.flag;
    int nb = n.nargs;
    const CQuantPrune* pr = n.prune >= 0 ? &ex.prunes[n.prune] : nullptr;

    // Clamp bounds for integer binders.
    std::vector<int64_t> lo(nb, INT64_MIN), hi(nb, INT64_MAX);
    if (pr) {
      for (int i = 0; i < nb; ++i) {
        if (pr->clamp_lo[i] >= 0) {
          int64_t v = want_int(eval(pr->clamp_lo[i]));
          lo[i] = pr->clamp_lo_strict[i] ? v + 1 : v;
        }
        if (pr->clamp_hi[i] >= 0) {
          int64_t v = want_int(eval(pr->clamp_hi[i]));
          hi[i] = pr->clamp_hi_strict[i] ? v - 1 : v;
        }
      }
    }

    // Candidate assignments for pinned binders.
    struct PinPlan {
      std::vector<int> binders;            // local binder positions (-1 = fixed arg)
      std::vector<ValueVec> assignments;   // one vector per candidate
    };
    std::vector<PinPlan> pins;
    std::vector<bool> pinned(nb, false);
    if (pr) {
      for (const CPin& pin : pr->pins) {
        PinPlan plan;
        plan.binders = pin.binders;
        if (!collect_pin_candidates(pin, n, plan.assignments)) continue;
        for (int b : pin.binders)
          if (b >= 0) pinned[b] = true;
        pins.push_back(std::move(plan));
      }
    }

    std::vector<int> free_binders;
    for (int i = 0; i < nb; ++i)
      if (!pinned[i]) free_binders.push_back(i);

    // Nested iteration: pins first, then free binders.
    std::function<bool(size_t)> iter_free = [&](size_t fi) -> bool {
      if (fi >= free_binders.size()) {
        bool v = eval(n.a).as_bool();
        return forall ? v : !v;  // "continue iterating?"
      }
      int b = free_binders[fi];
      const CDomain& d = ex.domains[n.domain_at + b];
      if (d.is_int_range) {
        int64_t from = std::max(d.lo, lo[b]);
        int64_t to = std::min(d.hi, hi[b]);
        for (int64_t v = from; v <= to; ++v) {
          ctx.frame[n.frame + b] = Value::integer(v);
          if (!iter_free(fi + 1)) return false;
        }
        return true;
      }
      for (size_t i = 0; i < d.size(); ++i) {
        const Value& v = d.values[i];
        if (v.is_int()) {
          int64_t x = v.as_int();
          if (x < lo[b] || x > hi[b]) continue;
        }
        ctx.frame[n.frame + b] = v;
        if (!iter_free(fi + 1)) return false;
      }
      return true;
    };

    std::function<bool(size_t)> iter_pins = [&](size_t pi) -> bool {
      if (pi >= pins.size()) return iter_free(0);
      const PinPlan& plan = pins[pi];
      for (const ValueVec& assign : plan.assignments) {
        bool ok = true;
        for (size_t k = 0; k < plan.binders.size(); ++k) {
          int b = plan.binders[k];
          if (b < 0) continue;
          const Value& v = assign[k];
          const CDomain& d = ex.domains[n.domain_at + b];
          if (!d.contains(v)) {
            ok = false;
            break;
          }
          if (v.is_int() && (v.as_int() < lo[b] || v.as_int() > hi[b])) {
            ok = false;
            break;
          }
          ctx.frame[n.frame + b] = v;
        }
        if (!ok) continue;
        if (!iter_pins(pi + 1)) return false;
      }
      return true;
    };

    return forall == iter_pins(0);
  }

  // Fills `out` with candidate assignments for a pin; returns false when the
  // pin cannot be used in this evaluation (dynamic instance etc.).
  bool collect_pin_candidates(const CPin& pin, const CNode& q,
                              std::vector<ValueVec>& out) {
    const CNode& a = ex.nodes[pin.atom];
    if (a.inst_mode != InstMode::Fixed || a.b < 0 || a.c < 0) return false;
    if (!ctx.trace) return false;
    int inst = a.inst;

    bool time_pin = pin.binders.size() == 1 && a.a >= 0 &&
                    ex.nodes[a.a].op == COp::BoundRef &&
                    ex.nodes[a.a].frame == q.frame + pin.binders[0];
    if (time_pin) {
      const std::vector<int>* ticks = nullptr;
      if (a.ev == EventKind::Change) {
        ticks = &ctx.trace->var_changes[ctx.trace->var_key(inst, a.b)];
      } else {
        const TransOccs& o = ctx.trace->occs_of(inst, a.b);
        switch (a.ev) {
          case EventKind::Start: ticks = &o.start_ticks; break;
          case EventKind::End: ticks = &o.end_ticks; break;
          case EventKind::Call: ticks = &o.call_ticks; break;
          default: return false;
        }
      }
      for (int t : *ticks) out.push_back({Value::integer(t)});
      return true;
    }

    // Parameter pin: occurrences at one concrete tick.
    if (a.ev == EventKind::Change) return false;
    int64_t tv64;
    try {
      tv64 = want_int(eval(a.a));
    } catch (const AstralError&) {
      return false;
    }
    if (tv64 < 0) return true;  // no occurrences before time 0: empty candidates
    int tv = static_cast<int>(tv64);
    const TransOccs& o = ctx.trace->occs_of(inst, a.b);

    auto try_occurrence = [&](const ValueVec& actual) {
      if (static_cast<int>(actual.size()) != a.nargs) return;
      ValueVec assign(pin.binders.size());
      for (size_t k = 0; k < pin.binders.size(); ++k) {
        if (pin.binders[k] >= 0) {
          assign[k] = actual[k];
        } else {
          // fixed argument: must match the evaluated child
          Value expect = eval(ex.arg_pool[a.args_at + static_cast<int>(k)]);
          if (!(expect == actual[k])) return;
        }
      }
      out.push_back(std::move(assign));
    };

    switch (a.ev) {
      case EventKind::Start: {
        auto it = std::lower_bound(o.start_ticks.begin(), o.start_ticks.end(), tv);
        if (it != o.start_ticks.end() && *it == tv)
          try_occurrence(o.start_params[it - o.start_ticks.begin()]);
        return true;
      }
      case EventKind::End: {
        auto it = std::lower_bound(o.end_ticks.begin(), o.end_ticks.end(), tv);
        if (it != o.end_ticks.end() && *it == tv)
          try_occurrence(o.end_params[it - o.end_ticks.begin()]);
        return true;
      }
      case EventKind::Call: {
        for (const auto& [t, ps] : o.calls) {
          if (t > tv) break;
          if (t == tv) try_occurrence(ps);
        }
        // deduplicate identical calls
        std::sort(out.begin(), out.end(),
                  [](const ValueVec& x, const ValueVec& y) { return compare_vecs_less(x, y); });
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return true;
      }
      default:
        return false;
    }
  }
};

}  // namespace

Value eval_node(const CExpr& ex, int node, EvalCtx& ctx) {
  Evaluator ev(ex, ctx);
  return ev.eval(node);
}

Value eval_root(const CExpr& ex, EvalCtx& ctx) {
  if (!ex.compile_error.empty())
    throw AstralError("expression did not compile: " + ex.compile_error);
  return eval_node(ex, ex.root, ctx);
}

ValueVec eval_resolutions(const CExpr& ex, EvalCtx& ctx) {
  if (!ex.nodes.empty() && !ex.nodes[ex.root].has_choose) return {eval_root(ex, ctx)};
  ChoiceIter it;
  ChoiceIter* saved = ctx.choices;
  ChooseMode saved_mode = ctx.choose_mode;
  ctx.choices = &it;
  ctx.choose_mode = ChooseMode::Branching;
  ValueVec out;
  try {
    do {
      it.reset_pass();
      out.push_back(eval_root(ex, ctx));
    } while (it.advance());
  } catch (...) {
    ctx.choices = saved;
    ctx.choose_mode = saved_mode;
    throw;
  }
  ctx.choices = saved;
  ctx.choose_mode = saved_mode;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool holds_universally(const CExpr& ex, EvalCtx& ctx) {
  if (!ex.compile_error.empty())
    throw AstralError("expression did not compile: " + ex.compile_error);
  if (!ex.nodes[ex.root].has_choose) return eval_root(ex, ctx).as_bool();
  ValueVec rs = eval_resolutions(ex, ctx);
  for (const auto& r : rs)
    if (!r.as_bool()) return false;
  return true;
}

Value eval(const ExprPtr& e, const Trace& tr, int t,
           const std::vector<std::pair<Sym, Value>>& env, ChooseMode mode) {
  if (t < 0 || t > tr.horizon)
    throw AstralError("evaluation tick outside the trace: " + std::to_string(t));
  std::vector<Binder> binders;
  for (const auto& [s, v] : env) binders.push_back({s, nullptr});
  CExpr ce = compile_expr(*tr.sys, e, -1, binders);
  std::vector<Value> frame(static_cast<size_t>(ce.frame_size) + 1);
  for (size_t i = 0; i < env.size(); ++i) frame[i] = env[i].second;
  EvalCtx ctx;
  ctx.trace = &tr;
  ctx.sys = tr.sys;
  ctx.now = t;
  ctx.frame = frame.data();
  EvalLimits lim;
  ctx.limits = &lim;
  ctx.choose_mode = mode;
  return eval_root(ce, ctx);
}

FailureWitness find_failure(const CExpr& ex, EvalCtx& ctx) {
  FailureWitness w;
  int node = ex.root;
  ExprPtr src = ex.source;
  // Descend the forall/implies/conjunction skeleton, recording the first
  // failing binding at each universal quantifier.
  int guard = 0;
  while (++guard < 64) {
    const CNode& n = ex.nodes[node];
    if (n.op == COp::Quant && n.flag) {
      // locate a failing assignment
      int nb = n.nargs;
      std::vector<size_t> idx(nb, 0);
      bool found = false;
      std::function<bool(int)> rec = [&](int b) -> bool {
        if (b >= nb) return !eval_node(ex, n.a, ctx).as_bool();
        const CDomain& d = ex.domains[n.domain_at + b];
        for (size_t i = 0; i < d.size(); ++i) {
          ctx.frame[n.frame + b] = d.at(i);
          idx[b] = i;
          if (rec(b + 1)) return true;
        }
        return false;
      };
      found = rec(0);
      if (!found) break;
      if (src && src->kind == ExKind::Quantifier) {
        for (int b = 0; b < nb; ++b)
          w.bindings.emplace_back(src->binders[b].name,
                                  ex.domains[n.domain_at + b].at(idx[b]));
        src = src->args[0];
      }
      node = n.a;
      continue;
    }
    if (n.op == COp::Implies) {
      if (!eval_node(ex, n.a, ctx).as_bool()) break;  // antecedent false: holds
      node = n.b;
      if (src && src->kind == ExKind::Apply && src->id == ops().implies)
        src = src->args[1];
      continue;
    }
    if (n.op == COp::And) {
      bool moved = false;
      for (int i = 0; i < n.nargs; ++i) {
        int c = ex.arg_pool[n.args_at + i];
        if (!eval_node(ex, c, ctx).as_bool()) {
          node = c;
          if (src && src->kind == ExKind::Apply && src->id == ops().and_ &&
              static_cast<int>(src->args.size()) == n.nargs)
            src = src->args[i];
          moved = true;
          break;
        }
      }
      if (moved) continue;
      break;
    }
    break;
  }
  w.pinpoint = src ? render_expr(src) : "<formula>";
  return w;
}

}  // namespace astral
