#include "astral/checker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace astral {

bool Report::all_hold() const {
  for (const auto& [o, v] : results)
    if (v.status != VerdictStatus::Holds) return false;
  return complete;
}

namespace {

const char* status_str(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Holds: return "holds-up-to-horizon";
    case VerdictStatus::Violated: return "violated";
    case VerdictStatus::BudgetExceeded: return "budget-exceeded";
  }
  return "?";
}

std::string bindings_str(const std::vector<std::pair<Sym, Value>>& bs) {
  std::string out;
  for (size_t i = 0; i < bs.size(); ++i) {
    if (i) out += ",";
    out += sym_name(bs[i].first) + "=" + render_value(bs[i].second);
  }
  return out;
}

}  // namespace

std::string Report::render(bool with_wall) const {
  std::ostringstream os;
  for (const auto& [o, v] : results) {
    os << "OBL " << schema_name(o.schema) << " "
       << (o.transition ? sym_name(o.transition) : "system") << " "
       << status_str(v.status);
    if (v.status == VerdictStatus::Violated) {
      if (!v.trace_file.empty()) os << " trace=" << v.trace_file;
      if (!v.bindings.empty()) os << " t=[" << bindings_str(v.bindings) << "]";
    }
    os << "\n";
  }
  os << "SCHEDULES " << schedules << " TRACES " << traces << " ADMISSIBLE "
     << admissible << " STATES " << states << "\n";
  os << "FAMILY " << schedule_family << " HORIZON " << horizon << "\n";
  if (!complete) os << "PARTIAL (budget exceeded)\n";
  if (with_wall) os << "WALL " << wall_seconds << "s\n";
  os << "VERDICT " << (all_hold() ? "all-hold" : "violation") << "\n";
  return os.str();
}

std::string Report::to_json() const {
  nlohmann::json j;
  j["horizon"] = horizon;
  j["schedule_family"] = schedule_family;
  j["schedules"] = schedules;
  j["traces"] = traces;
  j["admissible"] = admissible;
  j["states"] = states;
  j["complete"] = complete;
  j["wall_seconds"] = wall_seconds;
  j["verdict"] = all_hold() ? "all-hold" : "violation";
  j["obligations"] = nlohmann::json::array();
  for (const auto& [o, v] : results) {
    nlohmann::json jo;
    jo["schema"] = schema_name(o.schema);
    jo["transition"] = o.transition ? sym_name(o.transition) : "system";
    jo["status"] = status_str(v.status);
    if (v.status == VerdictStatus::Violated) {
      jo["schedule_index"] = v.schedule_index;
      jo["trace_index"] = v.trace_index;
      jo["bindings"] = bindings_str(v.bindings);
      jo["pinpoint"] = v.pinpoint;
      if (!v.trace_file.empty()) jo["trace"] = v.trace_file;
    }
    j["obligations"].push_back(std::move(jo));
  }
  return j.dump(2);
}

// --- schedule family -------------------------------------------------------------

namespace {

// Evaluate a pure (trace-free) expression after substituting formal names.
Value eval_pure(const CompiledSystem& sys, const ExprPtr& e,
                const std::vector<std::pair<Sym, ExprPtr>>& subst) {
  ExprPtr x = substitute_names(e, subst);
  CExpr ce = compile_expr(sys, x, -1, {});
  EvalCtx ctx;
  ctx.sys = &sys;
  ctx.now = 0;
  EvalLimits lim;
  ctx.limits = &lim;
  std::vector<Value> frame(static_cast<size_t>(ce.frame_size) + 1);
  ctx.frame = frame.data();
  return eval_root(ce, ctx);
}

void flatten_calls(const ExprPtr& e, std::vector<const Expr*>& out) {
  if (!e) return;
  if (e->kind == ExKind::Event && e->ev == EventKind::Call) {
    out.push_back(e.get());
    return;
  }
  if (e->kind == ExKind::Apply && e->id == ops().and_) {
    for (const auto& a : e->args) flatten_calls(a, out);
    return;
  }
  throw AstralError(
      "call mapping must be a conjunction of lower-level call events to "
      "generate schedules");
}

ValueVec enumerate_param_tuple_domain(const CompiledSystem& sys,
                                      const std::vector<Binder>& params,
                                      const EvalBounds& bounds,
                                      std::vector<ValueVec>& out) {
  std::vector<ValueVec> domains;
  for (const auto& p : params)
    domains.push_back(enumerate_domain(sys, p.type, -1, bounds));
  std::vector<size_t> idx(params.size(), 0);
  if (params.empty()) {
    out.push_back({});
    return {};
  }
  while (true) {
    ValueVec tup;
    for (size_t i = 0; i < params.size(); ++i) tup.push_back(domains[i][idx[i]]);
    out.push_back(std::move(tup));
    size_t k = params.size();
    while (k > 0) {
      --k;
      if (++idx[k] < domains[k].size()) break;
      idx[k] = 0;
      if (k == 0) return {};
    }
  }
}

}  // namespace

std::vector<CallOption> schedule_options(const ResolvedImpl& ri,
                                         const CompiledSystem& lower,
                                         const CheckBounds& bounds) {
  std::vector<CallOption> out;
  EvalBounds eb = bounds.eval_bounds();

  std::vector<Sym> block_insts;
  for (const auto& i : ri.block->processes) block_insts.push_back(i.name);
  auto is_block_inst = [&](Sym n) {
    return std::find(block_insts.begin(), block_insts.end(), n) != block_insts.end();
  };

  for (int tick = bounds.window_lo; tick <= bounds.window_hi; ++tick) {
    // (1) mapped calls to the refined process's exported transitions
    for (const auto& tr : ri.upper->transitions) {
      if (!tr.exported) continue;
      const TransMaps* tm = ri.find_trans_map(tr.name);
      if (!tm || !tm->call_map) continue;
      std::vector<ValueVec> tuples;
      enumerate_param_tuple_domain(lower, tr.params, eb, tuples);
      std::vector<const Expr*> calls;
      flatten_calls(tm->call_map, calls);
      for (const ValueVec& tup : tuples) {
        CallOption opt;
        opt.tick = tick;
        opt.upper_trans = tr.name;
        opt.upper_params = tup;
        std::vector<std::pair<Sym, ExprPtr>> subst;
        for (size_t i = 0; i < tm->call_params.size() && i < tup.size(); ++i)
          subst.emplace_back(tm->call_params[i], mk::lit(tup[i]));
        for (const Expr* c : calls) {
          SchedCall sc;
          sc.tick = tick;
          if (!c->qual || c->qual->kind != ExKind::Name)
            throw AstralError("call mapping events must name lower instances");
          sc.instance = c->qual->id;
          sc.transition = c->id;
          for (const auto& a : c->subj_args)
            sc.params.push_back(eval_pure(lower, a, subst));
          opt.lower_calls.push_back(std::move(sc));
        }
        out.push_back(std::move(opt));
      }
    }
    // (2) direct calls to environment processes (present at both levels)
    for (size_t ii = 0; ii < lower.instances.size(); ++ii) {
      const CInst& inst = lower.instances[ii];
      if (is_block_inst(inst.name)) continue;
      const CProc& proc = lower.procs[inst.proc];
      for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
        const CTrans& t = proc.transitions[ti];
        if (!t.exported) continue;
        std::vector<ValueVec> tuples;
        enumerate_param_tuple_domain(lower, t.params, eb, tuples);
        for (const ValueVec& tup : tuples) {
          CallOption opt;
          opt.tick = tick;
          SchedCall sc;
          sc.tick = tick;
          sc.instance = inst.name;
          sc.transition = t.name;
          sc.params = tup;
          opt.lower_calls.push_back(std::move(sc));
          out.push_back(std::move(opt));
        }
      }
    }
  }
  return out;
}

uint64_t schedule_count(uint64_t n, int max_calls) {
  // sum over k <= max_calls of multichoose(n, k)
  uint64_t total = 0;
  for (int k = 0; k <= max_calls; ++k) {
    // C(n + k - 1, k)
    unsigned long long c = 1;
    for (int i = 1; i <= k; ++i) c = c * (n + static_cast<uint64_t>(k) - i) / i;
    total += k == 0 ? 1 : c;
  }
  return total;
}

EnvSchedule schedule_at(const std::vector<CallOption>& options, int max_calls,
                        uint64_t index) {
  // index -> multiset of option indices, sizes 0..max_calls in order
  uint64_t n = options.size();
  EnvSchedule s;
  uint64_t remaining = index;
  for (int k = 0; k <= max_calls; ++k) {
    unsigned long long count = 1;
    for (int i = 1; i <= k; ++i)
      count = count * (n + static_cast<uint64_t>(k) - i) / i;
    if (k == 0) count = 1;
    if (remaining >= count) {
      remaining -= count;
      continue;
    }
    // decode the `remaining`-th nondecreasing k-tuple over [0, n)
    std::vector<uint64_t> picks;
    uint64_t lo = 0;
    for (int slot = 0; slot < k; ++slot) {
      int left = k - slot - 1;
      for (uint64_t v = lo;; ++v) {
        // tuples starting >= v for the rest: multichoose(n - v, left + 1)...
        unsigned long long block = 1;
        uint64_t m = n - v;
        for (int i = 1; i <= left + 1; ++i)
          block = block * (m + static_cast<uint64_t>(left) + 1 - i) / i;
        if (left + 1 == 0) block = 1;
        // tuples with first element exactly v: multichoose(n - v, left)
        unsigned long long here = 1;
        for (int i = 1; i <= left; ++i)
          here = here * (m + static_cast<uint64_t>(left) - i) / i;
        if (left == 0) here = 1;
        if (remaining < here) {
          picks.push_back(v);
          lo = v;
          break;
        }
        remaining -= here;
      }
    }
    for (uint64_t p : picks)
      for (const auto& c : options[p].lower_calls) s.calls.push_back(c);
    s.normalize();
    return s;
  }
  throw AstralError("schedule index out of range");
}

// --- formula checking -------------------------------------------------------------

Verdict check_formula(const CExpr& formula, const Trace& tr, uint64_t eval_budget) {
  Verdict v;
  EvalLimits lim;
  lim.max_visits = eval_budget;
  std::vector<Value> frame(static_cast<size_t>(formula.frame_size) + 1);
  EvalCtx ctx;
  ctx.trace = &tr;
  ctx.sys = tr.sys;
  ctx.now = tr.horizon;
  ctx.frame = frame.data();
  ctx.limits = &lim;
  try {
    if (holds_universally(formula, ctx)) {
      v.status = VerdictStatus::Holds;
    } else {
      v.status = VerdictStatus::Violated;
      FailureWitness w = find_failure(formula, ctx);
      v.bindings = std::move(w.bindings);
      v.pinpoint = std::move(w.pinpoint);
    }
  } catch (const BudgetExceeded&) {
    v.status = VerdictStatus::BudgetExceeded;
  }
  return v;
}

// --- admissibility (impl_call_fire_parms) ------------------------------------------

bool trace_admissible(const ResolvedImpl& ri, const CompiledSystem& lower,
                      const Trace& tr) {
  for (const auto& tru : ri.upper->transitions) {
    if (!tru.exported || tru.params.empty()) continue;
    const TransMaps* tm = ri.find_trans_map(tru.name);
    if (!tm || !tm->call_map) continue;
    std::vector<const Expr*> calls;
    try {
      flatten_calls(tm->call_map, calls);
    } catch (const AstralError&) {
      continue;
    }
    // (instance, transition, positions of the upper formals in its args)
    struct Leg {
      int inst;
      int trans;
      std::vector<int> formal_at;  // per arg position: index into call_params, -1
    };
    std::vector<Leg> legs;
    for (const Expr* c : calls) {
      Leg leg;
      leg.inst = lower.inst_of(c->qual->id);
      if (leg.inst < 0) return false;
      const CProc& proc = lower.procs[lower.instances[leg.inst].proc];
      auto ti = proc.trans_index.find(c->id);
      if (ti == proc.trans_index.end()) return false;
      leg.trans = ti->second;
      for (const auto& a : c->subj_args) {
        int fi = -1;
        if (a->kind == ExKind::Name && !a->qual && a->args.empty())
          for (size_t k = 0; k < tm->call_params.size(); ++k)
            if (tm->call_params[k] == a->id) fi = static_cast<int>(k);
        leg.formal_at.push_back(fi);
      }
      legs.push_back(std::move(leg));
    }

    // Joint start ticks: every leg starts at the tick.
    std::vector<std::pair<int, ValueVec>> fired;  // (tick, upper tuple)
    const TransOccs& first = tr.occs_of(legs[0].inst, legs[0].trans);
    for (size_t j = 0; j < first.start_ticks.size(); ++j) {
      int t = first.start_ticks[j];
      ValueVec tuple(tm->call_params.size());
      std::vector<bool> have(tm->call_params.size(), false);
      bool joint = true;
      for (const Leg& leg : legs) {
        const TransOccs& o = tr.occs_of(leg.inst, leg.trans);
        auto it = std::lower_bound(o.start_ticks.begin(), o.start_ticks.end(), t);
        if (it == o.start_ticks.end() || *it != t) {
          joint = false;
          break;
        }
        const ValueVec& ps = o.start_params[it - o.start_ticks.begin()];
        for (size_t a = 0; a < leg.formal_at.size() && a < ps.size(); ++a) {
          int fi = leg.formal_at[a];
          if (fi < 0) continue;
          if (have[fi] && !(tuple[fi] == ps[a])) {
            joint = false;  // inconsistent recovery; not a coherent mapped start
            break;
          }
          tuple[fi] = ps[a];
          have[fi] = true;
        }
        if (!joint) break;
      }
      if (joint) fired.emplace_back(t, std::move(tuple));
    }

    // Unserved mapped-call discipline: fired tuples must come from pending
    // mapped calls (group the legs' call events by tick and recover tuples).
    std::vector<std::pair<int, ValueVec>> mapped_calls;
    {
      const TransOccs& c0 = tr.occs_of(legs[0].inst, legs[0].trans);
      for (const auto& [t, ps0] : c0.calls) {
        // attempt every combination alignment: schedules are generated as
        // images, so a mapped call contributes exactly one tuple per leg call
        ValueVec tuple(tm->call_params.size());
        for (size_t a = 0; a < legs[0].formal_at.size() && a < ps0.size(); ++a)
          if (legs[0].formal_at[a] >= 0) tuple[legs[0].formal_at[a]] = ps0[a];
        bool all = true;
        for (size_t li = 1; li < legs.size(); ++li) {
          const TransOccs& o = tr.occs_of(legs[li].inst, legs[li].trans);
          bool found = false;
          for (const auto& [t2, ps] : o.calls) {
            if (t2 != t) continue;
            ValueVec cand = tuple;
            bool ok = true;
            for (size_t a = 0; a < legs[li].formal_at.size() && a < ps.size(); ++a) {
              int fi = legs[li].formal_at[a];
              if (fi < 0) continue;
              cand[fi] = ps[a];
            }
            (void)ok;
            tuple = cand;
            found = true;
            break;
          }
          if (!found) {
            all = false;
            break;
          }
        }
        if (all) mapped_calls.emplace_back(t, tuple);
      }
    }
    std::vector<ValueVec> pending;
    size_t ci = 0;
    std::sort(fired.begin(), fired.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::sort(mapped_calls.begin(), mapped_calls.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [t, tuple] : fired) {
      while (ci < mapped_calls.size() && mapped_calls[ci].first <= t) {
        auto it = std::lower_bound(pending.begin(), pending.end(),
                                   mapped_calls[ci].second, compare_vecs_less);
        pending.insert(it, mapped_calls[ci].second);
        ++ci;
      }
      auto it = std::lower_bound(pending.begin(), pending.end(), tuple,
                                 compare_vecs_less);
      if (it == pending.end() || !(*it == tuple)) return false;
      pending.erase(it);
    }
  }
  return true;
}

// --- refinement check ---------------------------------------------------------------

Report check_refinement(const ResolvedImpl& ri, const CheckBounds& bounds,
                        bool sequential) {
  auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.horizon = bounds.horizon;

  DiagnosticList wf = check_impl_wellformed(ri);
  bool wf_errors = false;
  for (const auto& d : wf)
    if (d.severity == Severity::Error) wf_errors = true;
  if (wf_errors)
    throw AstralError("mapping block is not well-formed:\n" + render_diagnostics(wf));

  auto lower = compile_system(*ri.lower_sys, bounds.eval_bounds());

  ObligationSet obls;
  if (sequential) {
    for (const auto& [trn, ss] : ri.seq_sel) {
      ObligationSet one = gen_sequential(ri, trn);
      for (auto& o : one.obligations) obls.obligations.push_back(std::move(o));
    }
    if (obls.obligations.empty())
      throw AstralError("no sequence or selection mappings to check");
  } else {
    obls = gen_parallel(ri);
  }

  std::vector<CExpr> compiled;
  for (const auto& o : obls.obligations)
    compiled.push_back(compile_expr(*lower, o.formula, -1, {}));

  std::vector<CallOption> options = schedule_options(ri, *lower, bounds);
  uint64_t nsched = schedule_count(options.size(), bounds.max_calls);
  rep.schedules = nsched;
  {
    std::ostringstream fam;
    fam << "calls<=" << bounds.max_calls << " ticks[" << bounds.window_lo << ","
        << bounds.window_hi << "] params[" << bounds.param_lo << "," << bounds.param_hi
        << "] options=" << options.size();
    rep.schedule_family = fam.str();
  }

  struct Local {
    std::vector<Verdict> verdicts;
    uint64_t traces = 0, admissible = 0, states = 0;
    bool complete = true;
    std::string error;
  };
  unsigned nthreads = bounds.threads ? bounds.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  if (nsched < 256) nthreads = 1;
  std::vector<Local> locals(nthreads);
  for (auto& l : locals) l.verdicts.assign(obls.obligations.size(), Verdict{});
  std::atomic<uint64_t> next_chunk{0};
  const uint64_t chunk = std::max<uint64_t>(1, std::min<uint64_t>(4096, nsched / (nthreads * 8) + 1));

  auto worker = [&](unsigned wi) {
    Local& L = locals[wi];
    try {
      while (true) {
        uint64_t lo = next_chunk.fetch_add(chunk);
        if (lo >= nsched) break;
        uint64_t hi = std::min(nsched, lo + chunk);
        for (uint64_t si = lo; si < hi; ++si) {
          EnvSchedule sched = schedule_at(options, bounds.max_calls, si);
          ExploreResult ex = explore(lower, sched, bounds.horizon, bounds.state_budget);
          L.states += ex.states;
          if (!ex.complete) L.complete = false;
          for (size_t tix = 0; tix < ex.traces.size(); ++tix) {
            Trace& tr = ex.traces[tix];
            ++L.traces;
            if (!trace_admissible(ri, *lower, tr)) continue;
            ++L.admissible;
            for (size_t oi = 0; oi < compiled.size(); ++oi) {
              Verdict& cur = L.verdicts[oi];
              if (cur.status == VerdictStatus::Violated) continue;
              Verdict v = check_formula(compiled[oi], tr, bounds.eval_budget);
              if (v.status != VerdictStatus::Holds) {
                v.schedule_index = static_cast<long>(si);
                v.trace_index = static_cast<int>(tix);
                if (v.status == VerdictStatus::Violated)
                  v.counterexample = std::make_shared<Trace>(tr);
                cur = std::move(v);
              }
            }
          }
        }
      }
    } catch (const std::exception& e) {
      L.error = e.what();
    }
  };

  std::vector<std::thread> threads;
  for (unsigned i = 1; i < nthreads; ++i) threads.emplace_back(worker, i);
  worker(0);
  for (auto& th : threads) th.join();

  for (const auto& L : locals)
    if (!L.error.empty()) throw AstralError(L.error);

  for (size_t oi = 0; oi < obls.obligations.size(); ++oi) {
    Verdict best;
    for (const auto& L : locals) {
      const Verdict& v = L.verdicts[oi];
      if (v.status == VerdictStatus::Holds) continue;
      if (best.status == VerdictStatus::Holds || v.schedule_index < best.schedule_index)
        best = v;
    }
    rep.results.emplace_back(obls.obligations[oi], std::move(best));
  }
  for (const auto& L : locals) {
    rep.traces += L.traces;
    rep.admissible += L.admissible;
    rep.states += L.states;
    rep.complete = rep.complete && L.complete;
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// --- induced upper traces -------------------------------------------------------------

InducedTrace induced_upper_trace(const Trace& lower_tr, const ResolvedImpl& ri,
                                 const CheckBounds& bounds) {
  InducedTrace out;
  out.upper = compile_system(*ri.upper_sys, bounds.eval_bounds());
  const CompiledSystem& up = *out.upper;
  const CompiledSystem& low = *lower_tr.sys;

  // locate the refined instance and its process
  int uproc = -1;
  for (size_t i = 0; i < up.procs.size(); ++i)
    if (up.procs[i].name == ri.block->of_process) uproc = static_cast<int>(i);
  if (uproc < 0) throw AstralError("refined process type missing in upper system");

  Trace& tr = out.trace;
  tr.sys = &up;
  tr.horizon = lower_tr.horizon;
  tr.vals.assign(static_cast<size_t>(tr.horizon) + 1,
                 Frame(static_cast<size_t>(up.total_slots)));
  tr.events.assign(static_cast<size_t>(tr.horizon) + 1, {});
  tr.init_recording();

  EvalLimits lim;
  lim.max_visits = bounds.eval_budget;

  auto eval_image = [&](const CExpr& ce, int t, bool& single) -> Value {
    EvalCtx ctx;
    ctx.trace = &lower_tr;
    ctx.sys = &low;
    ctx.now = t;
    std::vector<Value> frame(static_cast<size_t>(ce.frame_size) + 1);
    ctx.frame = frame.data();
    ctx.limits = &lim;
    ValueVec rs = eval_resolutions(ce, ctx);
    single = rs.size() == 1;
    return rs.front();
  };

  // variable images
  for (size_t ii = 0; ii < up.instances.size(); ++ii) {
    const CInst& uinst = up.instances[ii];
    const CProc& proc = up.procs[uinst.proc];
    bool refined = uinst.proc == uproc;
    for (size_t vi = 0; vi < proc.vars.size(); ++vi) {
      const CVar& v = proc.vars[vi];
      for (int c = 0; c < v.components; ++c) {
        CExpr image;
        if (refined) {
          std::vector<ExprPtr> args;
          if (!v.params.empty())
            for (const auto& pv : v.param_tuples[c]) args.push_back(mk::lit(pv));
          ExprPtr img = rewrite(mk::name(nullptr, v.name, false, std::move(args)), ri);
          image = compile_expr(low, img, -1, {});
        } else {
          // environment processes are shared between the levels
          std::vector<ExprPtr> args;
          if (!v.params.empty())
            for (const auto& pv : v.param_tuples[c]) args.push_back(mk::lit(pv));
          ExprPtr direct = mk::name(mk::name(uinst.name), v.name, false, std::move(args));
          image = compile_expr(low, direct, -1, {});
        }
        int slot = uinst.frame_base + v.slot_base + c;
        for (int t = 0; t <= tr.horizon; ++t) {
          bool single = true;
          Value val = eval_image(image, t, single);
          if (!single) {
            Diagnostic d;
            d.code = "choose-not-singleton";
            d.message = "image of " + sym_name(uinst.name) + "." + sym_name(v.name) +
                        " has several choose resolutions at tick " + std::to_string(t);
            out.notes.push_back(std::move(d));
          }
          tr.vals[t][slot] = std::move(val);
          if (t > 0 && !(tr.vals[t][slot] == tr.vals[t - 1][slot]))
            tr.note_changed(t, slot);
        }
      }
    }
  }

  // mapped durations
  out.durations.resize(up.procs.size());
  for (size_t pi = 0; pi < up.procs.size(); ++pi) {
    const CProc& proc = up.procs[pi];
    out.durations[pi].assign(proc.transitions.size(), -1);
    for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
      if (static_cast<int>(pi) == uproc) {
        for (const auto& tu : ri.upper->transitions)
          if (tu.name == proc.transitions[ti].name)
            out.durations[pi][ti] = mapped_duration(ri, tu);
      } else {
        out.durations[pi][ti] = proc.transitions[ti].duration;
      }
    }
  }

  // events: the refined instance's events come from the mapping bodies,
  // environment instances mirror the lower trace directly
  for (size_t ii = 0; ii < up.instances.size(); ++ii) {
    const CInst& uinst = up.instances[ii];
    const CProc& proc = up.procs[uinst.proc];
    if (uinst.proc != uproc) {
      int li = low.inst_of(uinst.name);
      if (li < 0) continue;
      const CProc& lproc = low.procs[low.instances[li].proc];
      for (int t = 0; t <= tr.horizon; ++t) {
        for (const auto& c : lower_tr.events[t].calls)
          if (c.inst == li)
            tr.record_call(t, static_cast<int>(ii),
                           proc.trans_index.at(lproc.transitions[c.trans].name),
                           c.params);
        for (const auto& s : lower_tr.events[t].starts)
          if (s.inst == li)
            tr.record_start(t, static_cast<int>(ii),
                            proc.trans_index.at(lproc.transitions[s.trans].name),
                            s.params);
        for (const auto& e : lower_tr.events[t].ends)
          if (e.inst == li)
            tr.record_end(t, static_cast<int>(ii),
                          proc.trans_index.at(lproc.transitions[e.trans].name),
                          e.params, e.fire_tick);
      }
      continue;
    }
    for (size_t ti = 0; ti < proc.transitions.size(); ++ti) {
      const TransitionDecl* tu = nullptr;
      for (const auto& t : ri.upper->transitions)
        if (t.name == proc.transitions[ti].name) tu = &t;
      const TransMaps* tm = tu ? ri.find_trans_map(tu->name) : nullptr;
      if (!tm) continue;
      auto image_holds_at = [&](const ExprPtr& body, int t) {
        CExpr ce = compile_expr(low, mk::past(body, mk::lit_int(t)), -1, {});
        EvalCtx ctx;
        ctx.trace = &lower_tr;
        ctx.sys = &low;
        ctx.now = lower_tr.horizon;
        std::vector<Value> frame(static_cast<size_t>(ce.frame_size) + 1);
        ctx.frame = frame.data();
        ctx.limits = &lim;
        ValueVec rs = eval_resolutions(ce, ctx);
        for (const auto& r : rs)
          if (r.is_bool() && r.as_bool()) return true;
        return false;
      };
      // parameter recovery for exported transitions with call maps
      std::vector<ValueVec> tuples;
      if (tm->call_map && !tu->params.empty()) {
        std::vector<ValueVec> dom;
        enumerate_param_tuple_domain(low, tu->params, bounds.eval_bounds(), dom);
        tuples = std::move(dom);
      }
      for (int t = 0; t <= tr.horizon; ++t) {
        if (tm->call_map) {
          // calls with recovered parameters
          for (const ValueVec& tup : tuples) {
            std::vector<std::pair<Sym, ExprPtr>> subst;
            for (size_t k = 0; k < tm->call_params.size() && k < tup.size(); ++k)
              subst.emplace_back(tm->call_params[k], mk::lit(tup[k]));
            if (image_holds_at(substitute_names(tm->call_map, subst), t))
              tr.record_call(t, static_cast<int>(ii), static_cast<int>(ti), tup);
          }
          if (tuples.empty() && image_holds_at(
                                    transform_call_map(tm->call_map, EventKind::Call, true), t))
            tr.record_call(t, static_cast<int>(ii), static_cast<int>(ti), {});
        }
        bool started = image_holds_at(tm->start_map, t);
        bool ended = image_holds_at(tm->end_map, t);
        ValueVec sparams, eparams;
        if (tm->call_map && !tu->params.empty()) {
          for (const ValueVec& tup : tuples) {
            std::vector<std::pair<Sym, ExprPtr>> subst;
            for (size_t k = 0; k < tm->call_params.size() && k < tup.size(); ++k)
              subst.emplace_back(tm->call_params[k], mk::lit(tup[k]));
            ExprPtr as_start = transform_call_map(
                substitute_names(tm->call_map, subst), EventKind::Start, false);
            if (started && sparams.empty() && image_holds_at(as_start, t)) sparams = tup;
            ExprPtr as_end = transform_call_map(substitute_names(tm->call_map, subst),
                                                EventKind::End, false);
            if (ended && eparams.empty() && image_holds_at(as_end, t)) eparams = tup;
          }
        }
        int dur = out.durations[uinst.proc][ti];
        if (started)
          tr.record_start(t, static_cast<int>(ii), static_cast<int>(ti), sparams);
        if (ended)
          tr.record_end(t, static_cast<int>(ii), static_cast<int>(ti), eparams,
                        dur > 0 ? t - dur : t);
      }
    }
  }
  return out;
}

// --- correspondence -------------------------------------------------------------------

CorrespondenceVerdict correspondence_check(const ResolvedImpl& ri,
                                           const std::vector<Trace>& lower_traces,
                                           const CheckBounds& bounds) {
  CorrespondenceVerdict out;
  auto issue = [&](const std::string& code, const std::string& msg) {
    Diagnostic d;
    d.code = code;
    d.message = msg;
    out.issues.push_back(std::move(d));
    out.holds = false;
  };

  // invariant image compiled once per lower system
  ExprPtr inv_img = rewrite(ri.upper->invariant, ri);

  for (size_t tix = 0; tix < lower_traces.size(); ++tix) {
    const Trace& ltr = lower_traces[tix];
    const CompiledSystem& low = *ltr.sys;
    InducedTrace ind = induced_upper_trace(ltr, ri, bounds);
    const CompiledSystem& up = *ind.upper;

    // (C): images change only at ticks with a mapped end on that instance
    int uproc = -1;
    for (size_t i = 0; i < up.procs.size(); ++i)
      if (up.procs[i].name == ri.block->of_process) uproc = static_cast<int>(i);
    for (size_t ii = 0; ii < up.instances.size(); ++ii) {
      if (up.instances[ii].proc != uproc) continue;
      for (int t = 1; t <= ind.trace.horizon; ++t) {
        bool changed = false;
        const CInst& uinst = up.instances[ii];
        for (int s = uinst.frame_base;
             s < uinst.frame_base + up.procs[uinst.proc].frame_size; ++s)
          if (!(ind.trace.vals[t][s] == ind.trace.vals[t - 1][s])) changed = true;
        if (!changed) continue;
        bool has_end = false;
        for (const auto& e : ind.trace.events[t].ends)
          if (e.inst == static_cast<int>(ii)) has_end = true;
        if (!has_end)
          issue("criterion-C", "trace " + std::to_string(tix) +
                                   ": variable image changes at tick " +
                                   std::to_string(t) + " with no mapped end event");
      }
    }

    // (S)(E)+(V) structural: machine axioms on the induced trace with mapped
    // durations; assertion axioms stay with the obligations.
    AxiomCheckOpts opts;
    opts.check_assertions = false;
    opts.check_maximal_progress = false;
    opts.duration_override = &ind.durations;
    DiagnosticList ax = axiom_check(ind.upper, ind.trace, opts);
    for (const auto& d : ax)
      issue("criterion-SE:" + d.code, "trace " + std::to_string(tix) + ": " + d.message);

    // (V): the invariant image holds at every tick of the lower trace
    try {
      CExpr inv = compile_expr(low, inv_img, -1, {});
      for (int t = 0; t <= ltr.horizon; ++t) {
        EvalCtx ctx;
        ctx.trace = &ltr;
        ctx.sys = &low;
        ctx.now = t;
        std::vector<Value> frame(static_cast<size_t>(inv.frame_size) + 1);
        ctx.frame = frame.data();
        EvalLimits lim;
        lim.max_visits = bounds.eval_budget;
        ctx.limits = &lim;
        if (!holds_universally(inv, ctx)) {
          issue("criterion-V", "trace " + std::to_string(tix) +
                                   ": invariant image fails at tick " + std::to_string(t));
          break;
        }
      }
    } catch (const AstralError& e) {
      issue("criterion-V", std::string("invariant image: ") + e.what());
    }
    for (const auto& d : ind.notes) out.issues.push_back(d);
  }
  return out;
}

}  // namespace astral
