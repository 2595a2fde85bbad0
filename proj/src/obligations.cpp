#include "astral/obligations.hpp"

#include <algorithm>

namespace astral {

const char* schema_name(SchemaId id) {
  switch (id) {
    case SchemaId::S0: return "S0";
    case SchemaId::S1j: return "S1";
    case SchemaId::S2: return "S2";
    case SchemaId::P0: return "P0";
    case SchemaId::Pj1: return "P";
    case SchemaId::Pn1: return "Pn1";
    case SchemaId::ImplEnd1: return "impl_end1";
    case SchemaId::ImplEnd2: return "impl_end2";
    case SchemaId::ImplTransEntry: return "impl_trans_entry";
    case SchemaId::ImplTransExit: return "impl_trans_exit";
    case SchemaId::ImplTransCalled: return "impl_trans_called";
    case SchemaId::ImplTransMutex: return "impl_trans_mutex";
    case SchemaId::ImplTransFire: return "impl_trans_fire";
    case SchemaId::ImplVarsNoChange: return "impl_vars_no_change";
    case SchemaId::ImplInitialState: return "impl_initial_state";
    case SchemaId::ImplLocalAxiom: return "impl_local_axiom";
  }
  return "?";
}

std::vector<SchemaInfo> list_schemas() {
  return {
      {SchemaId::S0, "S0", "obligation",
       "IMPL(Entry_U) <-> A_1 & Entry_L1 | ... | A_n & Entry_Ln"},
      {SchemaId::S1j, "S1", "obligation",
       "A_j' & Entry_Lj' & Exit_Lj -> IMPL(Exit_U)"},
      {SchemaId::S2, "S2", "obligation", "Dur_L1 = ... = Dur_Ln = Dur_U"},
      {SchemaId::P0, "P0", "obligation", "IMPL(Entry_U) <-> Entry_L"},
      {SchemaId::Pj1, "P", "obligation",
       "past(Entry_L, Now - Dur_U) & Start(T_L1, t1) & ... & Start(T_Lj, tj) -> "
       "EXISTS t_j+1 (t_j+1 >= t_j + Dur_Lj & t_j+1 + sum Dur_Lk <= Now & "
       "past(Entry_Lj+1, t_j+1)); '<= Now' is '= Now' in P_n"},
      {SchemaId::Pn1, "Pn1", "obligation",
       "past(Entry_L, Now - Dur_U) & past(Exit_L1, t1 + Dur_L1) & ... & Exit_Ln -> "
       "IMPL(Exit_U)"},
      {SchemaId::ImplEnd1, "impl_end1", "obligation",
       "FORALL tr1, t1 (IMPL(past(End(tr1, t1), t1)) -> t1 >= IMPL(Duration(tr1)))"},
      {SchemaId::ImplEnd2, "impl_end2", "obligation",
       "FORALL tr1, t1, t2 (t1 = t2 - IMPL(Duration(tr1)) -> "
       "(IMPL(past(Start(tr1, t1), t1)) <-> IMPL(past(End(tr1, t2), t2))))"},
      {SchemaId::ImplTransEntry, "impl_trans_entry", "obligation",
       "FORALL tr1, t1 (IMPL(past(Start(tr1, t1), t1)) -> IMPL(Entry(tr1, t1)))"},
      {SchemaId::ImplTransExit, "impl_trans_exit", "obligation",
       "FORALL tr1, t1 (IMPL(past(End(tr1, t1), t1)) -> IMPL(Exit(tr1, t1)))"},
      {SchemaId::ImplTransCalled, "impl_trans_called", "obligation",
       "FORALL tr1, t1 (IMPL(past(Start(tr1, t1), t1)) & Exported(tr1) -> "
       "IMPL(Issued_Call(tr1, t1)))"},
      {SchemaId::ImplTransMutex, "impl_trans_mutex", "obligation",
       "FORALL tr1, t1 (IMPL(past(Start(tr1, t1), t1)) -> FORALL tr2 (tr2 ~= tr1 -> "
       "~IMPL(past(Start(tr2, t1), t1))) & FORALL tr2, t2 (t1 < t2 & t2 < t1 + "
       "IMPL(Duration(tr1)) -> ~IMPL(past(Start(tr2, t2), t2))))"},
      {SchemaId::ImplTransFire, "impl_trans_fire", "obligation",
       "FORALL t1 (EXISTS tr1 (IMPL(Enabled(tr1, t1))) & FORALL tr2, t2 (t1 - "
       "IMPL(Duration(tr2)) < t2 & t2 < t1 -> ~IMPL(past(Start(tr2, t2), t2))) -> "
       "EXISTS tr1 (IMPL(past(Start(tr1, t1), t1))))"},
      {SchemaId::ImplVarsNoChange, "impl_vars_no_change", "obligation",
       "FORALL t1, t3 (t1 <= t3 & FORALL tr2, t2 (t1 < t2 & t2 <= t3 -> "
       "~IMPL(past(End(tr2, t2), t2))) -> FORALL t2 (t1 <= t2 & t2 <= t3 -> "
       "IMPL(Vars_No_Change(t1, t2))))"},
      {SchemaId::ImplInitialState, "impl_initial_state", "obligation",
       "IMPL(Initial(0))"},
      {SchemaId::ImplLocalAxiom, "impl_local_axiom", "obligation",
       "FORALL t1: time (IMPL(Axiom(t1)))"},
  };
}

std::vector<AssumptionInfo> list_assumptions() {
  return {
      {"impl_call",
       "FORALL tr_ll, t1 (Exported(tr_ll) & past(Call(tr_ll, t1), t1) -> EXISTS "
       "tr_ul (FORALL t2 (IMPL(past(Call(tr_ul, t2), t2)) -> past(Call(tr_ll, t2), "
       "t2)) & IMPL(past(Call(tr_ul, t1), t1))))"},
      {"impl_call_fire_parms",
       "FORALL tr1, t3 (Exported(tr1) & Has_Params(tr1) & IMPL(past(Start(tr1, "
       "t3), t3)) -> EXISTS t1 (t1 <= t3 & IMPL(past(Call(tr1, t1), t1)) & "
       "IMPL(Fire_Params(tr1, t3)) ISIN IMPL(Call_Params(tr1, t1)) & FORALL t2 (t1 "
       "<= t2 & t2 < t3 & IMPL(past(Start(tr1, t2), t2)) -> IMPL(Fire_Params(tr1, "
       "t2)) ~= IMPL(Fire_Params(tr1, t3)))))"},
  };
}

namespace {

TypeRef t_time() { return TypeExpr::builtin_type(Builtin::Time); }

std::optional<int64_t> fold_int(const ExprPtr& e, const SystemSpec* sys) {
  if (!e) return std::nullopt;
  const Ops& o = ops();
  switch (e->kind) {
    case ExKind::Lit:
      if (e->lit.is_int()) return e->lit.as_int();
      return std::nullopt;
    case ExKind::Name: {
      if (e->qual || !e->args.empty() || e->primed) return std::nullopt;
      for (const auto& c : sys->global_consts)
        if (c.name == e->id && c.value) return fold_int(c.value, sys);
      for (const auto& l : sys->levels)
        for (const auto& c : l.constants)
          if (c.name == e->id && c.value) return fold_int(c.value, sys);
      return std::nullopt;
    }
    case ExKind::Apply: {
      if (e->id == o.neg) {
        auto a = fold_int(e->args[0], sys);
        return a ? std::optional<int64_t>(-*a) : std::nullopt;
      }
      auto a = fold_int(e->args[0], sys);
      auto b = e->args.size() > 1 ? fold_int(e->args[1], sys) : std::nullopt;
      if (!a || !b) return std::nullopt;
      if (e->id == o.add) return *a + *b;
      if (e->id == o.sub) return *a - *b;
      if (e->id == o.mul) return *a * *b;
      if (e->id == o.div_ && *b != 0) return *a / *b;
      if (e->id == o.mod && *b != 0) return ((*a % *b) + *b) % *b;
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

// Qualifies a process-local expression with its instance name so it can be
// read as a system-level formula (sequential refinements write lower clauses
// from the single process's own perspective).
ExprPtr qualify_level(const ExprPtr& e, Sym inst, const ProcessLevel* lvl,
                      std::vector<Sym>& bound) {
  if (!e || !inst || !lvl) return e;
  auto local = [&](Sym id) {
    for (const auto& v : lvl->variables)
      if (v.name == id) return true;
    for (const auto& c : lvl->constants)
      if (c.name == id) return true;
    return false;
  };
  auto local_subject = [&](Sym id, EventKind k) {
    if (k == EventKind::Change) {
      for (const auto& v : lvl->variables)
        if (v.name == id) return true;
      return false;
    }
    for (const auto& t : lvl->transitions)
      if (t.name == id) return true;
    return false;
  };
  switch (e->kind) {
    case ExKind::Name: {
      if (e->qual || std::find(bound.begin(), bound.end(), e->id) != bound.end())
        break;
      if (local(e->id)) {
        auto out = std::make_shared<Expr>(*e);
        out->qual = mk::name(inst);
        for (auto& a : out->args) a = qualify_level(a, inst, lvl, bound);
        return out;
      }
      return e;
    }
    case ExKind::Event: {
      if (!e->qual && local_subject(e->id, e->ev)) {
        auto out = std::make_shared<Expr>(*e);
        out->qual = mk::name(inst);
        for (auto& a : out->subj_args) a = qualify_level(a, inst, lvl, bound);
        if (out->time) out->time = qualify_level(out->time, inst, lvl, bound);
        return out;
      }
      break;
    }
    case ExKind::Quantifier:
    case ExKind::Choose:
    case ExKind::SetDef: {
      auto out = std::make_shared<Expr>(*e);
      size_t before = bound.size();
      for (const auto& b : e->binders) bound.push_back(b.name);
      out->args[0] = qualify_level(e->args[0], inst, lvl, bound);
      bound.resize(before);
      return out;
    }
    default:
      break;
  }
  auto out = std::make_shared<Expr>(*e);
  if (out->qual) out->qual = qualify_level(out->qual, inst, lvl, bound);
  for (auto& a : out->args) a = qualify_level(a, inst, lvl, bound);
  for (auto& a : out->subj_args) a = qualify_level(a, inst, lvl, bound);
  if (out->time) out->time = qualify_level(out->time, inst, lvl, bound);
  for (auto& arm : out->arms) arm.body = qualify_level(arm.body, inst, lvl, bound);
  return out;
}

std::vector<Sym> params_used(const ExprPtr& e, const std::vector<Binder>& params) {
  std::vector<Sym> frees;
  collect_free_names(e, frees);
  std::vector<Sym> out;
  for (const auto& p : params)
    if (std::find(frees.begin(), frees.end(), p.name) != frees.end())
      out.push_back(p.name);
  return out;
}

struct Gen {
  const ResolvedImpl& ri;
  ObligationSet out;

  Sym fresh_t(int i) { return intern("t" + std::to_string(i)); }

  ExprPtr finalize(ExprPtr f) { return flatten_connectives(normalize_past(f)); }

  void emit(SchemaId id, Sym trans, ExprPtr f) {
    out.obligations.push_back({id, trans, finalize(std::move(f))});
  }

  int duration_of(const TransitionDecl& tr) { return mapped_duration(ri, tr); }

  // past(startMap, t): the mapping bodies are written over `now`, and the
  // past anchor re-points `now` at t.
  ExprPtr ps(const TransMaps& tm, ExprPtr t) { return mk::past(tm.start_map, std::move(t)); }
  ExprPtr pe(const TransMaps& tm, ExprPtr t) { return mk::past(tm.end_map, std::move(t)); }

  ExprPtr entry_image(const TransitionDecl& tr, ExprPtr anchor) {
    ExprPtr image = rewrite(tr.entry, ri);
    std::vector<Sym> used = params_used(tr.entry, tr.params);
    if (!used.empty()) {
      std::vector<Binder> bs;
      for (const auto& p : tr.params)
        if (std::find(used.begin(), used.end(), p.name) != used.end())
          bs.push_back({p.name, ri.map_type(p.type)});
      image = mk::quant(false, std::move(bs), image);
    }
    return mk::past(image, std::move(anchor));
  }

  ExprPtr exit_image(const TransitionDecl& tr, const TransMaps& tm, const ExprPtr& t_end) {
    int dur = duration_of(tr);
    ExprPtr prepped = prep_exit_expr(tr.exit, tr.duration);
    ExprPtr image = rewrite(prepped, ri);
    ExprPtr fire = mk::apply(ops().sub, {t_end, mk::lit_int(dur)});
    std::vector<Sym> used = params_used(tr.exit, tr.params);
    if (used.empty()) return mk::past(image, t_end);
    if (tr.exported && tm.call_map) {
      // parameters come from the mapped fired parameters: the call mapping
      // with calls read as starts, anchored at the fire time
      std::vector<Binder> bs;
      for (const auto& p : tr.params) bs.push_back({p.name, ri.map_type(p.type)});
      ExprPtr started = transform_call_map(tm.call_map, EventKind::Start, false);
      // the call-map formals are the parameter names themselves
      ExprPtr ante = mk::past(started, fire);
      return mk::quant(true, std::move(bs),
                       mk::implies(ante, mk::past(image, t_end)));
    }
    // unexported parameterized transition: existential reading
    std::vector<Binder> bs;
    for (const auto& p : tr.params)
      if (std::find(used.begin(), used.end(), p.name) != used.end())
        bs.push_back({p.name, ri.map_type(p.type)});
    return mk::quant(false, std::move(bs), mk::past(image, t_end));
  }

  ExprPtr issued_image(const TransMaps& tm, const ExprPtr& t1) {
    // EXISTS t2 (t2 <= t1 & past(callErased[now:=t2], t1)
    //            & FORALL t3 (t2 <= t3 & t3 < t1 -> ~past(startMap, t3)))
    Sym t2 = intern("t2");
    Sym t3 = intern("t3");
    ExprPtr erased = transform_call_map(tm.call_map, EventKind::Call, true);
    ExprPtr call_at = mk::past(substitute_now(erased, mk::name(t2)), t1);
    ExprPtr unserved = mk::quant(
        true, {{t3, t_time()}},
        mk::implies(mk::conj({mk::apply(ops().le, {mk::name(t2), mk::name(t3)}),
                              mk::apply(ops().lt, {mk::name(t3), t1})}),
                    mk::negate(ps(tm, mk::name(t3)))));
    return mk::quant(false, {{t2, t_time()}},
                     mk::conj({mk::apply(ops().le, {mk::name(t2), t1}), call_at,
                               unserved}));
  }

  ExprPtr enabled_image(const TransitionDecl& tr, const TransMaps& tm, const ExprPtr& t1) {
    std::vector<ExprPtr> conj{entry_image(tr, t1)};
    if (tr.exported && tm.call_map) conj.push_back(issued_image(tm, t1));
    return mk::conj(std::move(conj));
  }

  void parallel() {
    const ProcessLevel& up = *ri.upper;
    Sym t1s = intern("t1");
    Sym t2s = intern("t2");

    for (const auto& tr : up.transitions) {
      const TransMaps* tm = ri.find_trans_map(tr.name);
      if (!tm || !tm->start_map || !tm->end_map)
        throw AstralError("transition " + sym_name(tr.name) +
                          " lacks start/end mappings");
      int dur = duration_of(tr);
      ExprPtr t1 = mk::name(t1s);

      // impl_end1
      emit(SchemaId::ImplEnd1, tr.name,
           mk::quant(true, {{t1s, t_time()}},
                     mk::implies(pe(*tm, t1),
                                 mk::apply(ops().ge, {t1, mk::lit_int(dur)}))));

      // impl_end2 with the duration offset substituted
      ExprPtr start_at = ps(*tm, mk::apply(ops().sub, {t1, mk::lit_int(dur)}));
      emit(SchemaId::ImplEnd2, tr.name,
           mk::quant(true, {{t1s, t_time()}},
                     mk::apply(ops().iff, {start_at, pe(*tm, t1)})));

      // impl_trans_entry
      emit(SchemaId::ImplTransEntry, tr.name,
           mk::quant(true, {{t1s, t_time()}},
                     mk::implies(ps(*tm, t1), entry_image(tr, t1))));

      // impl_trans_exit
      emit(SchemaId::ImplTransExit, tr.name,
           mk::quant(true, {{t1s, t_time()}},
                     mk::implies(pe(*tm, t1), exit_image(tr, *tm, t1))));

      // impl_trans_called (exported only)
      if (tr.exported && tm->call_map)
        emit(SchemaId::ImplTransCalled, tr.name,
             mk::quant(true, {{t1s, t_time()}},
                       mk::implies(ps(*tm, t1), issued_image(*tm, t1))));

      // impl_trans_mutex
      {
        std::vector<ExprPtr> same_tick;
        for (const auto& tr2 : up.transitions) {
          if (tr2.name == tr.name) continue;
          const TransMaps* tm2 = ri.find_trans_map(tr2.name);
          same_tick.push_back(mk::negate(ps(*tm2, t1)));
        }
        std::vector<ExprPtr> in_window;
        for (const auto& tr2 : up.transitions) {
          const TransMaps* tm2 = ri.find_trans_map(tr2.name);
          in_window.push_back(mk::negate(ps(*tm2, mk::name(t2s))));
        }
        ExprPtr window = mk::quant(
            true, {{t2s, t_time()}},
            mk::implies(
                mk::conj({mk::apply(ops().lt, {t1, mk::name(t2s)}),
                          mk::apply(ops().lt,
                                    {mk::name(t2s),
                                     mk::apply(ops().add, {t1, mk::lit_int(dur)})})}),
                mk::conj(std::move(in_window))));
        ExprPtr body = mk::conj({mk::conj(std::move(same_tick)), window});
        emit(SchemaId::ImplTransMutex, tr.name,
             mk::quant(true, {{t1s, t_time()}}, mk::implies(ps(*tm, t1), body)));
      }
    }

    // impl_trans_fire (system-level)
    {
      ExprPtr t1 = mk::name(t1s);
      std::vector<ExprPtr> enabled_any, start_any, quiet;
      for (const auto& tr : up.transitions) {
        const TransMaps* tm = ri.find_trans_map(tr.name);
        enabled_any.push_back(enabled_image(tr, *tm, t1));
        start_any.push_back(ps(*tm, t1));
        int dur = duration_of(tr);
        quiet.push_back(mk::quant(
            true, {{t2s, t_time()}},
            mk::implies(
                mk::conj({mk::apply(ops().lt,
                                    {mk::apply(ops().sub, {t1, mk::lit_int(dur)}),
                                     mk::name(t2s)}),
                          mk::apply(ops().lt, {mk::name(t2s), t1})}),
                mk::negate(ps(*tm, mk::name(t2s))))));
      }
      ExprPtr ante = mk::conj({mk::disj(std::move(enabled_any)), mk::conj(std::move(quiet))});
      emit(SchemaId::ImplTransFire, 0,
           mk::quant(true, {{t1s, t_time()}},
                     mk::implies(ante, mk::disj(std::move(start_any)))));
    }

    // impl_vars_no_change (system-level)
    {
      Sym t3s = intern("t3");
      ExprPtr t1 = mk::name(t1s), t3 = mk::name(t3s);
      std::vector<ExprPtr> no_end;
      for (const auto& tr : up.transitions) {
        const TransMaps* tm = ri.find_trans_map(tr.name);
        no_end.push_back(mk::negate(pe(*tm, mk::name(t2s))));
      }
      ExprPtr quiet = mk::quant(
          true, {{t2s, t_time()}},
          mk::implies(mk::conj({mk::apply(ops().lt, {t1, mk::name(t2s)}),
                                mk::apply(ops().le, {mk::name(t2s), t3})}),
                      mk::conj(std::move(no_end))));
      std::vector<ExprPtr> vnc;
      for (const auto& v : up.variables) {
        const ResolvedImpl::ValueMap* m = ri.find_var_map(v.name);
        if (!m) continue;
        auto image_at = [&](ExprPtr when, const std::vector<ExprPtr>& args) {
          ExprPtr img = rewrite(
              mk::name(nullptr, v.name, false, std::vector<ExprPtr>(args)), ri);
          return mk::past(img, std::move(when));
        };
        if (v.params.empty()) {
          vnc.push_back(mk::eq(image_at(t1, {}), image_at(mk::name(t2s), {})));
        } else {
          std::vector<Binder> bs;
          std::vector<ExprPtr> args;
          for (size_t i = 0; i < v.params.size(); ++i) {
            Sym pn = intern("p" + std::to_string(i + 1));
            bs.push_back({pn, v.params[i].type});
            args.push_back(mk::name(pn));
          }
          vnc.push_back(mk::quant(true, std::move(bs),
                                  mk::eq(image_at(t1, args), image_at(mk::name(t2s), args))));
        }
      }
      ExprPtr conseq = mk::quant(
          true, {{t2s, t_time()}},
          mk::implies(mk::conj({mk::apply(ops().le, {t1, mk::name(t2s)}),
                                mk::apply(ops().le, {mk::name(t2s), t3})}),
                      mk::conj(std::move(vnc))));
      emit(SchemaId::ImplVarsNoChange, 0,
           mk::quant(true, {{t1s, t_time()}, {t3s, t_time()}},
                     mk::implies(mk::conj({mk::apply(ops().le, {t1, t3}), quiet}),
                                 conseq)));
    }

    // impl_initial_state
    emit(SchemaId::ImplInitialState, 0,
         mk::past(rewrite(up.initial, ri), mk::lit_int(0)));

    // impl_local_axiom
    emit(SchemaId::ImplLocalAxiom, 0,
         mk::quant(true, {{t1s, t_time()}},
                   mk::past(rewrite(up.axiom, ri), mk::name(t1s))));

    out.assumptions = list_assumptions();
  }

  // --- sequential schemas -------------------------------------------------

  const TransitionDecl* upper_trans(Sym name) {
    for (const auto& t : ri.upper->transitions)
      if (t.name == name) return &t;
    return nullptr;
  }

  const TransitionDecl* lower_trans(Sym name) {
    for (const auto& inst : ri.block->processes) {
      const ProcessLevel* lvl = ri.lower_sys->find_level(inst.process_type);
      if (!lvl) continue;
      for (const auto& t : lvl->transitions)
        if (t.name == name) return &t;
    }
    return nullptr;
  }

  int lower_duration(Sym trans) {
    const TransitionDecl* t = lower_trans(trans);
    if (!t) throw AstralError("unknown lower transition " + sym_name(trans));
    auto d = fold_int(t->duration, ri.lower_sys);
    if (!d || *d < 1)
      throw AstralError("lower transition " + sym_name(trans) +
                        " has no concrete positive duration");
    return static_cast<int>(*d);
  }

  void sequential(Sym upper_name) {
    const SeqSelCompiled* ss = nullptr;
    for (const auto& [k, v] : ri.seq_sel)
      if (k == upper_name) ss = &v;
    const TransitionDecl* tu = upper_trans(upper_name);
    if (!ss || !tu)
      throw AstralError("no sequence/selection mapping for " + sym_name(upper_name));
    const TransMaps* tm = ri.find_trans_map(upper_name);
    int dur_u = duration_of(*tu);
    Sym inst = ri.block->processes.empty() ? 0 : ri.block->processes[0].name;
    const ProcessLevel* lower_lvl =
        ri.block->processes.empty()
            ? nullptr
            : ri.lower_sys->find_level(ri.block->processes[0].process_type);
    auto lift = [&](const ExprPtr& e) {
      std::vector<Sym> bound;
      return qualify_level(e, inst, lower_lvl, bound);
    };
    ExprPtr instq = inst ? mk::name(inst) : nullptr;
    Sym tNs = intern("tN");
    ExprPtr tN = mk::name(tNs);

    auto entry_u_image = [&]() {
      ExprPtr img = rewrite(tu->entry, ri);
      std::vector<Sym> used = params_used(tu->entry, tu->params);
      if (!used.empty()) {
        std::vector<Binder> bs;
        for (const auto& p : tu->params)
          if (std::find(used.begin(), used.end(), p.name) != used.end())
            bs.push_back({p.name, ri.map_type(p.type)});
        img = mk::quant(false, std::move(bs), img);
      }
      return img;
    };

    if (!ss->is_sequence) {
      // S0: IMPL(Entry_U) <-> A_1 & Entry_L1 | ...
      std::vector<ExprPtr> alts;
      for (const auto& [guard, trn] : ss->branches) {
        const TransitionDecl* tl = lower_trans(trn);
        alts.push_back(mk::conj({guard, lift(tl->entry)}));
      }
      emit(SchemaId::S0, upper_name,
           mk::quant(true, {{tNs, t_time()}},
                     mk::past(mk::apply(ops().iff,
                                        {entry_u_image(), mk::disj(std::move(alts))}),
                              tN)));
      // S1,j per branch
      for (const auto& [guard, trn] : ss->branches) {
        const TransitionDecl* tl = lower_trans(trn);
        int dl = lower_duration(trn);
        ExprPtr fire = mk::apply(ops().sub, {tN, mk::lit_int(dl)});
        ExprPtr ante = mk::conj(
            {mk::past(mk::event(instq, EventKind::End, trn, {}, mk::now()), tN),
             mk::past(mk::conj({guard, lift(tl->entry)}), fire)});
        emit(SchemaId::S1j, trn,
             mk::quant(true, {{tNs, t_time()}},
                       mk::implies(ante, exit_image(*tu, *tm, tN))));
      }
      // S2: concrete duration identities
      std::vector<ExprPtr> eqs;
      for (const auto& [guard, trn] : ss->branches)
        eqs.push_back(mk::eq(mk::lit_int(lower_duration(trn)), mk::lit_int(dur_u)));
      emit(SchemaId::S2, upper_name, mk::conj(std::move(eqs)));
      return;
    }

    // Sequence of n transitions.
    const std::vector<Sym>& seq = ss->seq_transitions;
    int n = static_cast<int>(seq.size());
    std::vector<int> dl;
    for (Sym s : seq) dl.push_back(lower_duration(s));

    // P0
    emit(SchemaId::P0, upper_name,
         mk::quant(true, {{tNs, t_time()}},
                   mk::past(mk::apply(ops().iff, {entry_u_image(), ss->seq_entry}), tN)));

    auto start_conj = [&](int upto, std::vector<Binder>& bs) {
      std::vector<ExprPtr> cs;
      cs.push_back(mk::apply(ops().ge, {tN, mk::lit_int(dur_u)}));
      cs.push_back(mk::past(ss->seq_entry,
                            mk::apply(ops().sub, {tN, mk::lit_int(dur_u)})));
      for (int i = 0; i < upto; ++i) {
        Sym ti = fresh_t(i + 1);
        bs.push_back({ti, t_time()});
        cs.push_back(mk::past(
            mk::event(instq, EventKind::Start, seq[i], {}, mk::name(ti)),
            mk::name(ti)));
      }
      return cs;
    };

    // P_{j+1} for j = 0..n-1
    for (int j = 0; j < n; ++j) {
      std::vector<Binder> bs{{tNs, t_time()}};
      std::vector<ExprPtr> ante = start_conj(j, bs);
      Sym tj1 = fresh_t(j + 1);
      ExprPtr lo = j == 0 ? mk::apply(ops().sub, {tN, mk::lit_int(dur_u)})
                          : mk::apply(ops().add,
                                      {mk::name(fresh_t(j)), mk::lit_int(dl[j - 1])});
      int64_t tail = 0;
      for (int k = j; k < n; ++k) tail += dl[k];
      Sym cmp_op = j == n - 1 ? ops().eq : ops().le;
      ExprPtr body = mk::conj(
          {mk::apply(ops().ge, {mk::name(tj1), lo}),
           mk::apply(cmp_op,
                     {mk::apply(ops().add, {mk::name(tj1), mk::lit_int(tail)}), tN}),
           mk::past(lift(lower_trans(seq[j])->entry), mk::name(tj1))});
      ExprPtr conseq = mk::quant(false, {{tj1, t_time()}}, body);
      emit(SchemaId::Pj1, seq[j],
           mk::quant(true, std::move(bs),
                     mk::implies(mk::conj(std::move(ante)), conseq)));
    }

    // P_{n+1}
    {
      std::vector<Binder> bs{{tNs, t_time()}};
      std::vector<ExprPtr> ante = start_conj(n, bs);
      for (int i = 0; i < n; ++i) {
        const TransitionDecl* tl = lower_trans(seq[i]);
        ExprPtr end_i = mk::apply(ops().add, {mk::name(fresh_t(i + 1)), mk::lit_int(dl[i])});
        ante.push_back(mk::past(lift(prep_exit_expr(tl->exit, tl->duration)), end_i));
      }
      ante.push_back(mk::eq(
          mk::apply(ops().add, {mk::name(fresh_t(n)), mk::lit_int(dl[n - 1])}), tN));
      emit(SchemaId::Pn1, upper_name,
           mk::quant(true, std::move(bs),
                     mk::implies(mk::conj(std::move(ante)), exit_image(*tu, *tm, tN))));
    }
  }
};

}  // namespace

int mapped_duration(const ResolvedImpl& ri, const TransitionDecl& tr) {
  ExprPtr image = rewrite(tr.duration, ri);
  auto d = fold_int(image, ri.lower_sys);
  if (!d || *d < 1)
    throw AstralError("IMPL(Duration(" + sym_name(tr.name) +
                      ")) must be declared as a concrete positive duration "
                      "(map its duration constant)");
  return static_cast<int>(*d);
}

ObligationSet gen_parallel(const ResolvedImpl& ri) {
  Gen g{ri};
  g.parallel();
  return std::move(g.out);
}

ObligationSet gen_sequential(const ResolvedImpl& ri, Sym upper_trans) {
  Gen g{ri};
  g.sequential(upper_trans);
  return std::move(g.out);
}

std::string obl_filename(const Obligation& o) {
  std::string t = o.transition ? sym_name(o.transition) : "system";
  std::string s = schema_name(o.schema);
  if (o.schema == SchemaId::S1j || o.schema == SchemaId::Pj1) s += "_" + t;
  return std::string(schema_name(o.schema)) + "__" + t + ".obl";
}

std::string render_obligation(const Obligation& o) {
  std::string out = "-- ";
  out += schema_name(o.schema);
  out += " ";
  out += o.transition ? sym_name(o.transition) : "system";
  out += "\n";
  out += render_expr_pretty(o.formula);
  return out;
}

}  // namespace astral
