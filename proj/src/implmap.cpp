#include "astral/implmap.hpp"

#include <algorithm>
#include <set>

namespace astral {

const TypeRef* ResolvedImpl::find_type_map(Sym t) const {
  for (const auto& [k, v] : type_map)
    if (k == t) return &v;
  return nullptr;
}
const ResolvedImpl::ValueMap* ResolvedImpl::find_var_map(Sym v) const {
  for (const auto& [k, m] : var_map)
    if (k == v) return &m;
  return nullptr;
}
const ResolvedImpl::ValueMap* ResolvedImpl::find_const_map(Sym c) const {
  for (const auto& [k, m] : const_map)
    if (k == c) return &m;
  return nullptr;
}
const CaseMap* ResolvedImpl::find_case_map(Sym t) const {
  for (const auto& cm : case_maps)
    if (cm.upper_type && cm.upper_type->kind == TypeKind::Named &&
        cm.upper_type->name == t)
      return &cm;
  return nullptr;
}
const TransMaps* ResolvedImpl::find_trans_map(Sym tr) const {
  for (const auto& [k, m] : trans_map)
    if (k == tr) return &m;
  return nullptr;
}

TypeRef ResolvedImpl::map_type(const TypeRef& t) const {
  if (!t) return t;
  switch (t->kind) {
    case TypeKind::Named: {
      if (const TypeRef* m = find_type_map(t->name)) return *m;
      return t;
    }
    case TypeKind::ListOf:
      return TypeExpr::list_of(map_type(t->elem));
    case TypeKind::SetOf:
      return TypeExpr::set_of(map_type(t->elem));
    case TypeKind::Structure: {
      std::vector<std::pair<Sym, TypeRef>> fs;
      for (const auto& [f, ft] : t->fields) fs.emplace_back(f, map_type(ft));
      return TypeExpr::structure(std::move(fs));
    }
    default:
      return t;
  }
}

// --- upper scope ---------------------------------------------------------------

namespace {

struct UpperScope {
  const SystemSpec* sys;
  const ProcessLevel* level;

  const VarDecl* var(Sym n) const {
    for (const auto& v : level->variables)
      if (v.name == n) return &v;
    return nullptr;
  }
  const ConstDecl* cons(Sym n) const {
    for (const auto& c : level->constants)
      if (c.name == n) return &c;
    for (const auto& c : sys->global_consts)
      if (c.name == n) return &c;
    return nullptr;
  }
  const TransitionDecl* trans(Sym n) const {
    for (const auto& t : level->transitions)
      if (t.name == n) return &t;
    return nullptr;
  }
  const TypeDecl* type(Sym n) const {
    for (const auto& t : level->types)
      if (t.name == n) return &t;
    for (const auto& t : sys->global_types)
      if (t.name == n) return &t;
    return nullptr;
  }
  // enum value -> its declaring type name (0 if not an enumerator)
  Sym enum_type_of(Sym value) const {
    auto scan = [&](const std::vector<TypeDecl>& ts) -> Sym {
      for (const auto& t : ts)
        if (t.def && t.def->kind == TypeKind::Enumerated)
          for (Sym c : t.def->enumerators)
            if (c == value) return t.name;
      return 0;
    };
    if (Sym t = scan(level->types)) return t;
    if (Sym t = scan(sys->global_types)) return t;
    for (const auto& l : sys->levels)
      if (Sym t = scan(l.types)) return t;
    return 0;
  }
};

void diag_into(DiagnosticList& ds, const std::string& file, SourceLoc loc,
               const std::string& code, const std::string& msg) {
  Diagnostic d;
  d.file = file;
  d.loc = loc;
  d.code = code;
  d.message = msg;
  ds.push_back(std::move(d));
}

// Collect (qualifier instance, kind, subject) triples of event atoms.
struct EventRef {
  Sym inst;
  EventKind kind;
  Sym subject;
  const Expr* node;
};
void collect_events(const ExprPtr& e, std::vector<EventRef>& out) {
  if (!e) return;
  if (e->kind == ExKind::Event) {
    Sym inst = 0;
    if (e->qual && e->qual->kind == ExKind::Name && !e->qual->qual &&
        e->qual->args.empty())
      inst = e->qual->id;
    out.push_back({inst, e->ev, e->id, e.get()});
  }
  for_each_child(*e, [&](const ExprPtr& c) { collect_events(c, out); });
}

}  // namespace

// --- sequence/selection compilation -----------------------------------------------

SeqSelCompiled compile_seq_sel(const ImplMapEntry& entry, const ResolvedImpl& ri,
                               Sym lower_instance) {
  SeqSelCompiled out;
  ExprPtr inst = lower_instance ? mk::name(lower_instance) : nullptr;
  if (entry.kind == MapKind::SeqWhen) {
    out.is_sequence = true;
    out.seq_entry = entry.seq_entry;
    out.seq_transitions = entry.seq_transitions;
    out.start_map = entry.seq_entry;
    out.end_map = mk::event(inst, EventKind::End, entry.seq_transitions.back(), {},
                            mk::now());
    // Only the final transition of a sequence may write mapped variables.
    std::set<Sym> mapped_lower_vars;
    for (const auto& [uv, m] : ri.var_map) {
      std::vector<Sym> frees;
      collect_free_names(m.rhs, frees);
      // unqualified names in a single-process refinement are lower variables
      for (Sym f : frees) mapped_lower_vars.insert(f);
      std::function<void(const ExprPtr&)> members = [&](const ExprPtr& x) {
        if (!x) return;
        if (x->kind == ExKind::Name && x->qual) mapped_lower_vars.insert(x->id);
        for_each_child(*x, [&](const ExprPtr& c) { members(c); });
      };
      members(m.rhs);
    }
    const ProcessLevel* lower = nullptr;
    if (ri.block->processes.size() >= 1)
      lower = ri.lower_sys->find_level(ri.block->processes[0].process_type);
    if (lower) {
      for (size_t i = 0; i + 1 < out.seq_transitions.size(); ++i) {
        for (const auto& tr : lower->transitions) {
          if (tr.name != out.seq_transitions[i]) continue;
          std::function<void(const ExprPtr&)> writes = [&](const ExprPtr& x) {
            if (!x) return;
            if ((x->kind == ExKind::Becomes || x->kind == ExKind::NoChange) &&
                x->args[0]->kind == ExKind::Name &&
                mapped_lower_vars.count(x->args[0]->id))
              throw AstralError("sequence mapping for " + sym_name(entry.target) +
                                ": only the last transition may modify mapped "
                                "variable " +
                                sym_name(x->args[0]->id));
            if (x->kind == ExKind::Name && !x->primed && !x->qual &&
                mapped_lower_vars.count(x->id))
              throw AstralError("sequence mapping for " + sym_name(entry.target) +
                                ": only the last transition may modify mapped "
                                "variable " +
                                sym_name(x->id));
            for_each_child(*x, [&](const ExprPtr& c) { writes(c); });
          };
          writes(tr.exit);
        }
      }
    }
    return out;
  }
  // Selection: guard1 & t1 | guard2 & t2 | ...
  out.is_sequence = false;
  std::vector<ExprPtr> alts;
  if (entry.rhs->kind == ExKind::Apply && entry.rhs->id == ops().or_)
    alts = entry.rhs->args;
  else
    alts = {entry.rhs};
  std::vector<ExprPtr> starts, ends;
  for (const ExprPtr& alt : alts) {
    ExprPtr guard;
    Sym trans = 0;
    if (alt->kind == ExKind::Name && !alt->qual && alt->args.empty()) {
      guard = mk::lit_bool(true);
      trans = alt->id;
    } else if (alt->kind == ExKind::Apply && alt->id == ops().and_ &&
               alt->args.back()->kind == ExKind::Name && !alt->args.back()->qual &&
               alt->args.back()->args.empty()) {
      trans = alt->args.back()->id;
      std::vector<ExprPtr> gs(alt->args.begin(), alt->args.end() - 1);
      guard = mk::conj(std::move(gs));
    } else {
      throw AstralError("selection mapping for " + sym_name(entry.target) +
                        " must be a disjunction of guard & transition alternatives");
    }
    out.branches.emplace_back(guard, trans);
    starts.push_back(mk::conj(
        {guard, mk::event(inst, EventKind::Start, trans, {}, mk::now())}));
    ends.push_back(mk::event(inst, EventKind::End, trans, {}, mk::now()));
  }
  out.start_map = mk::disj(std::move(starts));
  out.end_map = mk::disj(std::move(ends));
  return out;
}

// --- classification ----------------------------------------------------------------

ResolvedImpl resolve_impl(const ImplBlock& block, const SystemSpec& upper_sys,
                          const SystemSpec& lower_sys) {
  ResolvedImpl ri;
  ri.block = std::make_shared<ImplBlock>(block);
  ri.upper_sys = &upper_sys;
  ri.lower_sys = &lower_sys;
  ri.upper = upper_sys.find_level(block.of_process);
  if (!ri.upper)
    throw AstralError("implementation refines unknown process type " +
                      sym_name(block.of_process));
  UpperScope up{&upper_sys, ri.upper};
  auto diag = [&](SourceLoc loc, const std::string& code, const std::string& msg) {
    diag_into(ri.classify_diags, block.source_file, loc, code, msg);
  };

  std::vector<const ImplMapEntry*> seqsel_pending;
  for (const auto& e : ri.block->entries) {
    switch (e.kind) {
      case MapKind::TransStart:
      case MapKind::TransEnd:
      case MapKind::TransCall: {
        if (!up.trans(e.target)) {
          diag(e.loc, "unknown-transition",
               "transition mapping for unknown upper transition " + sym_name(e.target));
          break;
        }
        TransMaps* tm = nullptr;
        for (auto& [k, m] : ri.trans_map)
          if (k == e.target) tm = &m;
        if (!tm) {
          ri.trans_map.emplace_back(e.target, TransMaps{});
          tm = &ri.trans_map.back().second;
        }
        if (e.kind == MapKind::TransStart) tm->start_map = e.rhs;
        if (e.kind == MapKind::TransEnd) tm->end_map = e.rhs;
        if (e.kind == MapKind::TransCall) {
          tm->call_map = e.rhs;
          for (const auto& b : e.params) tm->call_params.push_back(b.name);
        }
        break;
      }
      case MapKind::Operator: {
        OperatorMap om;
        om.op = e.target;
        om.params = e.params;
        om.result = e.op_result;
        om.rhs = e.rhs;
        om.loc = e.loc;
        ri.op_maps.push_back(std::move(om));
        break;
      }
      case MapKind::ConstCase: {
        CaseMap cm;
        cm.formal = e.params[0].name;
        cm.upper_type = e.target_type;
        cm.arms = e.case_arms;
        cm.loc = e.loc;
        if (cm.upper_type->kind != TypeKind::Named || !up.type(cm.upper_type->name))
          diag(e.loc, "unknown-type", "constant case map for unknown upper type");
        ri.case_maps.push_back(std::move(cm));
        break;
      }
      case MapKind::SeqWhen:
        seqsel_pending.push_back(&e);
        break;
      case MapKind::Plain: {
        if (up.type(e.target)) {
          TypeRef rhs = e.rhs_type;
          if (!rhs && e.rhs && e.rhs->kind == ExKind::Name && !e.rhs->qual &&
              e.rhs->args.empty())
            rhs = TypeExpr::named(e.rhs->id);
          if (!rhs) {
            diag(e.loc, "type-map", "type mapping for " + sym_name(e.target) +
                                        " must map to a type");
            break;
          }
          ri.type_map.emplace_back(e.target, rhs);
          break;
        }
        if (const VarDecl* v = up.var(e.target)) {
          ResolvedImpl::ValueMap m;
          m.formals = e.params;
          for (size_t i = 0; i < m.formals.size() && i < v->params.size(); ++i)
            if (!m.formals[i].type) m.formals[i].type = v->params[i].type;
          if (e.params.size() != v->params.size())
            diag(e.loc, "arity", "variable mapping arity mismatch for " +
                                     sym_name(e.target));
          m.rhs = e.rhs;
          m.loc = e.loc;
          ri.var_map.emplace_back(e.target, std::move(m));
          break;
        }
        if (up.cons(e.target)) {
          ResolvedImpl::ValueMap m;
          m.formals = e.params;
          m.rhs = e.rhs;
          m.loc = e.loc;
          ri.const_map.emplace_back(e.target, std::move(m));
          break;
        }
        if (up.trans(e.target)) {
          seqsel_pending.push_back(&e);  // selection form
          break;
        }
        diag(e.loc, "unknown-symbol",
             "mapping for unknown upper symbol " + sym_name(e.target));
        break;
      }
    }
  }

  Sym lower_inst = ri.block->processes.empty() ? 0 : ri.block->processes[0].name;
  for (const ImplMapEntry* e : seqsel_pending) {
    try {
      SeqSelCompiled c = compile_seq_sel(*e, ri, lower_inst);
      ri.seq_sel.emplace_back(e->target, std::move(c));
      TransMaps tm;
      tm.start_map = ri.seq_sel.back().second.start_map;
      tm.end_map = ri.seq_sel.back().second.end_map;
      tm.seq = &ri.seq_sel.back().second;
      ri.trans_map.emplace_back(e->target, std::move(tm));
    } catch (const AstralError& err) {
      diag(e->loc, "seq-sel", err.what());
    }
  }
  return ri;
}

// --- rewrite ----------------------------------------------------------------------

namespace {

struct Rewriter {
  const ResolvedImpl& ri;
  UpperScope up;
  RewriteTrace* trace;
  std::vector<Sym> bound;
  int depth = 0;

  Rewriter(const ResolvedImpl& r, RewriteTrace* t)
      : ri(r), up{r.upper_sys, r.upper}, trace(t) {}

  void note(const ExprPtr& in, const char* rule, const ExprPtr& out) {
    if (!trace) return;
    trace->nodes.push_back({render_expr(in), rule, render_expr(out), depth});
  }

  bool is_bound(Sym n) const {
    return std::find(bound.begin(), bound.end(), n) != bound.end();
  }

  ExprPtr clone_children(const ExprPtr& e) {
    auto out = std::make_shared<Expr>(*e);
    if (out->qual) out->qual = go(out->qual);
    for (auto& a : out->args) a = go(a);
    for (auto& a : out->subj_args) a = go(a);
    if (out->time) out->time = go(out->time);
    for (auto& arm : out->arms) arm.body = go(arm.body);  // keys stay as written
    return out;
  }

  // Substitute formals and resolve nested IMPL / IMPL_0 markers.
  ExprPtr instantiate(const ExprPtr& body, const std::vector<Sym>& formals,
                      const std::vector<ExprPtr>& upper_args) {
    std::vector<std::pair<Sym, ExprPtr>> subst;
    for (size_t i = 0; i < formals.size(); ++i)
      subst.emplace_back(formals[i], upper_args[i]);
    ExprPtr inst = substitute_names(body, subst);
    return expand_impl_markers(inst);
  }

  ExprPtr expand_impl_markers(const ExprPtr& e) {
    if (!e) return e;
    if (e->kind == ExKind::ImplOf) return go(e->args[0]);
    if (e->kind == ExKind::Impl0Of) return natural(e->args[0]);
    if (e->kind == ExKind::Quantifier || e->kind == ExKind::Choose ||
        e->kind == ExKind::SetDef) {
      auto out = std::make_shared<Expr>(*e);
      // binder types in mapping bodies are written in lower vocabulary
      out->args[0] = expand_impl_markers(e->args[0]);
      return out;
    }
    auto out = std::make_shared<Expr>(*e);
    if (out->qual) out->qual = expand_impl_markers(out->qual);
    for (auto& a : out->args) a = expand_impl_markers(a);
    for (auto& a : out->subj_args) a = expand_impl_markers(a);
    if (out->time) out->time = expand_impl_markers(out->time);
    for (auto& arm : out->arms) arm.body = expand_impl_markers(arm.body);
    return out;
  }

  // The natural mapping IMPL_0: distribute IMPL through the node.
  ExprPtr natural(const ExprPtr& e) {
    switch (e->kind) {
      case ExKind::Lit:
      case ExKind::Now:
        return e;
      case ExKind::Name:
        // IMPL_0(c) for built-in-supertyped constants: the symbol itself.
        return e;
      case ExKind::SetDef:
      case ExKind::Choose:
      case ExKind::Quantifier: {
        auto out = std::make_shared<Expr>(*e);
        for (auto& b : out->binders) b.type = ri.map_type(b.type);
        size_t before = bound.size();
        for (const auto& b : e->binders) bound.push_back(b.name);
        out->args[0] = go(e->args[0]);
        bound.resize(before);
        return out;
      }
      default:
        return clone_children(e);
    }
  }

  const OperatorMap* match_op_map(const Expr& e) {
    if (ri.op_maps.empty()) return nullptr;
    // operand types in the upper context
    TypeContext tc;
    tc.sys = ri.upper_sys;
    tc.level = ri.upper;
    tc.in_exit = true;
    for (Sym b : bound) tc.bindings.push_back({b, nullptr});
    std::vector<TypeRef> arg_types;
    for (const auto& a : e.args) {
      try {
        arg_types.push_back(infer_type(a, tc));
      } catch (const AstralError&) {
        return nullptr;  // untypable operand: fall back to the natural mapping
      }
    }
    TypeEnv env = type_env_of(*ri.upper_sys, ri.upper);
    for (const auto& om : ri.op_maps) {
      if (om.op != e.id || om.params.size() != arg_types.size()) continue;
      bool all = true;
      for (size_t i = 0; i < arg_types.size(); ++i) {
        CompatVerdict cv = compatible(om.params[i].type, arg_types[i], env, env);
        bool same = cv.compatible && !cv.witness.empty() &&
                    (cv.witness[0] == "identical" || cv.witness[0] == "numeric");
        if (!same) all = false;
      }
      if (all) return &om;
    }
    return nullptr;
  }

  ExprPtr rewrite_event(const ExprPtr& e) {
    // events of the refined process are unqualified in its clauses
    if (!e->qual && e->ev != EventKind::Change && up.trans(e->id)) {
      const TransMaps* tm = ri.find_trans_map(e->id);
      if (!tm)
        throw AstralError("no transition mapping for " + sym_name(e->id), e->loc);
      ExprPtr t = e->time ? go(e->time) : nullptr;
      if (!e->subj_args.empty()) {
        if (!tm->call_map)
          throw AstralError("parameterized " + std::string(e->ev == EventKind::Call
                                                               ? "call"
                                                               : "start/end") +
                                " of " + sym_name(e->id) +
                                " needs a call mapping for its parameters",
                            e->loc);
        EventKind k = e->ev;
        ExprPtr body = k == EventKind::Call ? tm->call_map
                                            : transform_call_map(tm->call_map, k, false);
        std::vector<ExprPtr> args;
        for (const auto& a : e->subj_args) args.push_back(go(a));
        body = instantiate(body, tm->call_params, args);
        ExprPtr out = t ? substitute_now(body, t) : body;
        note(e, "transition mapping", out);
        return out;
      }
      ExprPtr body;
      switch (e->ev) {
        case EventKind::Start: body = tm->start_map; break;
        case EventKind::End: body = tm->end_map; break;
        case EventKind::Call:
          body = tm->call_map ? transform_call_map(tm->call_map, EventKind::Call, true)
                              : nullptr;
          break;
        default: body = nullptr;
      }
      if (!body)
        throw AstralError("missing " +
                              std::string(e->ev == EventKind::Start  ? "start"
                                          : e->ev == EventKind::End ? "end"
                                                                    : "call") +
                              " mapping for " + sym_name(e->id),
                          e->loc);
      body = expand_impl_markers(body);
      ExprPtr out = t ? substitute_now(body, t) : body;
      note(e, "transition mapping", out);
      return out;
    }
    if (!e->qual && e->ev == EventKind::Change && up.var(e->id)) {
      // natural mapping for change: the subject's image must itself be a
      // variable reference
      const ResolvedImpl::ValueMap* m = ri.find_var_map(e->id);
      if (m) {
        std::vector<ExprPtr> args;
        for (const auto& a : e->subj_args) args.push_back(go(a));
        ExprPtr image = instantiate(m->rhs, formal_names(m->formals), args);
        if (image->kind != ExKind::Name)
          throw AstralError("Change of " + sym_name(e->id) +
                                " maps to a non-variable expression; outside the subset",
                            e->loc);
        auto out = std::make_shared<Expr>(*e);
        out->qual = image->qual;
        out->id = image->id;
        out->subj_args = image->args;
        if (out->time) out->time = go(e->time);
        note(e, "natural change mapping", out);
        return out;
      }
    }
    // environment events pass through naturally
    return clone_children(e);
  }

  static std::vector<Sym> formal_names(const std::vector<Binder>& bs) {
    std::vector<Sym> out;
    for (const auto& b : bs) out.push_back(b.name);
    return out;
  }

  ExprPtr rewrite_name(const ExprPtr& e) {
    if (e->primed)
      throw AstralError("primed reference reached the rewriter; exits must be "
                        "preprocessed first",
                        e->loc);
    if (e->qual) return clone_children(e);  // another process's member: natural
    if (is_bound(e->id)) {
      if (e->args.empty()) return e;
      return clone_children(e);
    }
    if (const VarDecl* v = up.var(e->id)) {
      const ResolvedImpl::ValueMap* m = ri.find_var_map(e->id);
      if (!m)
        throw AstralError("no mapping for upper variable " + sym_name(e->id), e->loc);
      std::vector<ExprPtr> args;
      for (const auto& a : e->args) args.push_back(go(a));
      ExprPtr out = instantiate(m->rhs, formal_names(m->formals), args);
      note(e, "variable mapping", out);
      return out;
    }
    if (const ConstDecl* c = up.cons(e->id)) {
      if (const ResolvedImpl::ValueMap* m = ri.find_const_map(e->id)) {
        std::vector<ExprPtr> args;
        for (const auto& a : e->args) args.push_back(go(a));
        ExprPtr out = instantiate(m->rhs, formal_names(m->formals), args);
        note(e, "constant mapping", out);
        return out;
      }
      // a constant of a case-mapped type: substitute the case body whole
      if (c->type && c->type->kind == TypeKind::Named) {
        if (const CaseMap* cm = ri.find_case_map(c->type->name)) {
          ExprPtr out = case_whole_substitution(e, *cm);
          note(e, "constant case map (whole substitution)", out);
          return out;
        }
      }
      // natural constant mapping
      ExprPtr out = clone_children(e);
      note(e, "natural constant mapping", out);
      return out;
    }
    if (Sym et = up.enum_type_of(e->id)) {
      if (const CaseMap* cm = ri.find_case_map(et)) {
        ExprPtr out = resolve_constant_case(Value::symbol(e->id), *cm);
        out = expand_impl_markers(out);
        note(e, "constant case split", out);
        return out;
      }
      return e;  // value of an unmapped (or compatibly mapped) enumerated type
    }
    // instance names and ambient obligation-level variables pass through
    return e;
  }

  ExprPtr case_whole_substitution(const ExprPtr& scrut, const CaseMap& cm) {
    std::vector<CaseArm> arms;
    for (const auto& arm : cm.arms)
      arms.push_back({arm.match, expand_impl_markers(arm.body)});
    return mk::case_of(go_natural_scrut(scrut), std::move(arms), scrut->loc);
  }

  ExprPtr go_natural_scrut(const ExprPtr& e) { return clone_children(e); }

  ExprPtr go(const ExprPtr& e) {
    if (!e) return e;
    ++depth;
    ExprPtr out = dispatch(e);
    --depth;
    return out;
  }

  ExprPtr dispatch(const ExprPtr& e) {
    switch (e->kind) {
      case ExKind::Lit:
      case ExKind::Now:
        return e;
      case ExKind::Name:
        return rewrite_name(e);
      case ExKind::Event:
        return rewrite_event(e);
      case ExKind::Past: {
        // natural: past(IMPL(E), IMPL(t))
        auto out = std::make_shared<Expr>(*e);
        out->args[0] = go(e->args[0]);
        out->args[1] = go(e->args[1]);
        return out;
      }
      case ExKind::Apply: {
        if (const OperatorMap* om = match_op_map(*e)) {
          std::vector<ExprPtr> raw(e->args.begin(), e->args.end());
          // formals refer to the (upper) operands; IMPL markers in the
          // template drive the recursion
          std::vector<std::pair<Sym, ExprPtr>> subst;
          for (size_t i = 0; i < om->params.size(); ++i)
            subst.emplace_back(om->params[i].name, raw[i]);
          ExprPtr inst = substitute_names(om->rhs, subst);
          ExprPtr out = expand_impl_markers(inst);
          note(e, "operator mapping", out);
          return out;
        }
        ExprPtr out = natural(e);
        return out;
      }
      case ExKind::Quantifier:
      case ExKind::Choose:
      case ExKind::SetDef:
        return natural(e);
      case ExKind::ListDef:
      case ExKind::SetLit:
      case ExKind::StructDef:
      case ExKind::IfThenElse:
      case ExKind::CaseOf:
        return clone_children(e);
      case ExKind::Becomes:
      case ExKind::NoChange:
        throw AstralError("exit forms must be preprocessed before rewriting", e->loc);
      case ExKind::ImplOf:
        return go(e->args[0]);
      case ExKind::Impl0Of:
        return natural(e->args[0]);
      default:
        return clone_children(e);
    }
  }
};

}  // namespace

std::string RewriteTrace::render() const {
  std::string out;
  for (const auto& n : nodes) {
    out.append(static_cast<size_t>(n.depth) * 2, ' ');
    out += n.input + "  --[" + n.rule + "]-->  " + n.output + "\n";
  }
  return out;
}

ExprPtr rewrite(const ExprPtr& upper_expr, const ResolvedImpl& ri, RewriteTrace* trace) {
  Rewriter rw(ri, trace);
  return rw.go(upper_expr);
}

ExprPtr natural_map(const ExprPtr& e, const ResolvedImpl& ri, RewriteTrace* trace) {
  Rewriter rw(ri, trace);
  return rw.natural(e);
}

ExprPtr resolve_constant_case(const Value& v, const CaseMap& cm) {
  for (const auto& arm : cm.arms) {
    if (arm.match->kind == ExKind::Lit && arm.match->lit == v) return arm.body;
    if (arm.match->kind == ExKind::Name && v.is_sym() && arm.match->id == v.as_sym())
      return arm.body;
  }
  throw AstralError("uncovered case key " + render_value(v) +
                    " in the constant case mapping");
}

ExprPtr transform_call_map(const ExprPtr& e, EventKind new_kind, bool erase_params) {
  if (!e) return e;
  if (e->kind == ExKind::Event && e->ev == EventKind::Call) {
    auto out = std::make_shared<Expr>(*e);
    out->ev = new_kind;
    if (erase_params) out->subj_args.clear();
    if (out->qual) out->qual = transform_call_map(out->qual, new_kind, erase_params);
    if (out->time) out->time = transform_call_map(out->time, new_kind, erase_params);
    return out;
  }
  auto out = std::make_shared<Expr>(*e);
  if (out->qual) out->qual = transform_call_map(out->qual, new_kind, erase_params);
  for (auto& a : out->args) a = transform_call_map(a, new_kind, erase_params);
  for (auto& a : out->subj_args) a = transform_call_map(a, new_kind, erase_params);
  if (out->time) out->time = transform_call_map(out->time, new_kind, erase_params);
  for (auto& arm : out->arms) {
    arm.match = transform_call_map(arm.match, new_kind, erase_params);
    arm.body = transform_call_map(arm.body, new_kind, erase_params);
  }
  return out;
}

ExprPtr prep_exit_expr(const ExprPtr& e, const ExprPtr& duration) {
  if (!e) return e;
  ExprPtr fire_time = mk::apply(ops().sub, {mk::now(), duration});
  std::function<ExprPtr(const ExprPtr&)> walk = [&](const ExprPtr& x) -> ExprPtr {
    if (!x) return x;
    if (x->kind == ExKind::Becomes) {
      return mk::eq(walk(x->args[0]), walk(x->args[1]));
    }
    if (x->kind == ExKind::NoChange) {
      ExprPtr v = walk(x->args[0]);
      return mk::eq(v, mk::past(v, fire_time));
    }
    if (x->kind == ExKind::Name && x->primed) {
      auto unprimed = std::make_shared<Expr>(*x);
      unprimed->primed = false;
      if (unprimed->qual) unprimed->qual = walk(unprimed->qual);
      for (auto& a : unprimed->args) a = walk(a);
      return mk::past(unprimed, fire_time, x->loc);
    }
    auto out = std::make_shared<Expr>(*x);
    if (out->qual) out->qual = walk(out->qual);
    for (auto& a : out->args) a = walk(a);
    for (auto& a : out->subj_args) a = walk(a);
    if (out->time) out->time = walk(out->time);
    for (auto& arm : out->arms) arm.body = walk(arm.body);
    return out;
  };
  return walk(e);
}

// --- well-formedness ---------------------------------------------------------------

namespace {

// typedef chains resolve to their base; integer and time count as subtypes
// of real for the alias restriction.
TypeRef supertype_of(TypeRef t, const TypeEnv& env) {
  int guard = 0;
  while (t && guard++ < 64) {
    if (t->kind == TypeKind::Named) {
      TypeRef d = env.lookup(t->name);
      if (!d) return t;
      t = d;
      continue;
    }
    if (t->kind == TypeKind::TypedefAlias) {
      t = t->elem;
      continue;
    }
    break;
  }
  if (t && t->kind == TypeKind::BuiltinT &&
      (t->builtin == Builtin::Integer || t->builtin == Builtin::Time))
    return TypeExpr::builtin_type(Builtin::Real);
  return t;
}

}  // namespace

DiagnosticList check_impl_wellformed(const ResolvedImpl& ri) {
  DiagnosticList diags = ri.classify_diags;
  const ImplBlock& block = *ri.block;
  UpperScope up{ri.upper_sys, ri.upper};
  auto diag = [&](SourceLoc loc, const std::string& code, const std::string& msg) {
    diag_into(diags, block.source_file, loc, code, msg);
  };

  TypeEnv uenv = type_env_of(*ri.upper_sys, ri.upper);
  TypeEnv lenv = type_env_of(*ri.lower_sys, nullptr);

  // (a) every upper variable and transition is mapped; constants are mapped,
  // case-covered, or naturally defaulted
  for (const auto& v : ri.upper->variables)
    if (!ri.find_var_map(v.name))
      diag(v.loc, "unmapped-variable",
           "upper variable " + sym_name(v.name) + " has no mapping");
  for (const auto& t : ri.upper->transitions) {
    const TransMaps* tm = ri.find_trans_map(t.name);
    if (!tm || !tm->start_map || !tm->end_map) {
      diag(t.loc, "unmapped-transition",
           "upper transition " + sym_name(t.name) + " needs start and end mappings");
      continue;
    }
    if (t.exported && !tm->call_map && !tm->seq)
      diag(t.loc, "missing-call-map",
           "exported transition " + sym_name(t.name) + " needs a call mapping");
  }
  auto const_covered = [&](const ConstDecl& c) {
    if (ri.find_const_map(c.name)) return true;
    if (c.type && c.type->kind == TypeKind::Named && ri.find_case_map(c.type->name))
      return true;
    TypeRef s = supertype_of(c.type, uenv);
    if (s && s->kind == TypeKind::BuiltinT) return true;  // natural default
    if (s && s->kind == TypeKind::InstanceOf) return true;
    if (s && s->kind == TypeKind::Enumerated) {
      // compatible identity still works when the type is unmapped
      return ri.find_type_map(c.type->kind == TypeKind::Named ? c.type->name : 0) ==
             nullptr;
    }
    return false;
  };
  for (const auto& c : ri.upper->constants)
    if (!const_covered(c))
      diag(c.loc, "unmapped-constant",
           "upper constant " + sym_name(c.name) +
               " is neither mapped nor naturally defaultable");

  // (a) continued: the lower level introduces no transitions outside mappings
  {
    std::set<std::pair<Sym, Sym>> referenced;  // (instance, transition)
    auto scan_map = [&](const ExprPtr& m) {
      if (!m) return;
      std::vector<EventRef> evs;
      collect_events(m, evs);
      for (const auto& ev : evs)
        if (ev.kind != EventKind::Change) referenced.insert({ev.inst, ev.subject});
    };
    for (const auto& [tr, tm] : ri.trans_map) {
      scan_map(tm.start_map);
      scan_map(tm.end_map);
      scan_map(tm.call_map);
    }
    for (const auto& [tr, ss] : ri.seq_sel) {
      for (Sym t : ss.seq_transitions) referenced.insert({0, t});
      for (const auto& [g, t] : ss.branches) referenced.insert({0, t});
    }
    for (const auto& inst : block.processes) {
      const ProcessLevel* lvl = ri.lower_sys->find_level(inst.process_type);
      if (!lvl) {
        diag(inst.loc, "unknown-process-type",
             "implementation instance " + sym_name(inst.name) +
                 " has no process level " + sym_name(inst.process_type));
        continue;
      }
      for (const auto& t : lvl->transitions) {
        bool found = referenced.count({inst.name, t.name}) ||
                     referenced.count({0, t.name});
        if (!found)
          diag(t.loc, "new-lower-transition",
               "lower transition " + sym_name(inst.name) + "." + sym_name(t.name) +
                   " is not referenced by any mapping");
      }
    }
  }

  // (b) built-in types unmapped; at most one alias/subtype per supertype
  {
    std::vector<std::pair<std::string, Sym>> mapped_supertypes;
    for (const auto& [t, rhs] : ri.type_map) {
      const TypeDecl* td = up.type(t);
      TypeRef def = td ? td->def : nullptr;
      TypeRef s = supertype_of(TypeExpr::named(t), uenv);
      if (def && def->kind == TypeKind::BuiltinT) {
        diag({}, "builtin-mapped", "built-in type " + sym_name(t) + " cannot be mapped");
        continue;
      }
      if (s && s->kind == TypeKind::BuiltinT) {
        std::string key = render_type(s);
        for (const auto& [k, prev] : mapped_supertypes)
          if (k == key)
            diag({}, "alias-mapped-twice",
                 "both " + sym_name(prev) + " and " + sym_name(t) +
                     " (aliases of " + key + ") are mapped");
        mapped_supertypes.emplace_back(key, t);
      }
    }
  }

  // (c) timed operators have no operator mapping
  for (const auto& om : ri.op_maps) {
    std::string n = sym_name(om.op);
    std::string lower;
    for (char c : n) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "past" || lower == "start" || lower == "end" || lower == "call" ||
        lower == "change")
      diag(om.loc, "timed-operator-mapped",
           "timed operator " + n + " cannot be mapped; it always uses the natural "
           "mapping");
  }

  // (d) every lower exported transition is referenced in some call mapping
  {
    std::set<std::pair<Sym, Sym>> called;
    for (const auto& [tr, tm] : ri.trans_map) {
      if (!tm.call_map) continue;
      std::vector<EventRef> evs;
      collect_events(tm.call_map, evs);
      for (const auto& ev : evs)
        if (ev.kind == EventKind::Call) called.insert({ev.inst, ev.subject});
    }
    for (const auto& inst : block.processes) {
      const ProcessLevel* lvl = ri.lower_sys->find_level(inst.process_type);
      if (!lvl) continue;
      for (const auto& t : lvl->transitions) {
        if (!t.exported) continue;
        if (!called.count({inst.name, t.name}) && !called.count({0, t.name}))
          diag(t.loc, "uncovered-export",
               "lower exported transition " + sym_name(inst.name) + "." +
                   sym_name(t.name) +
                   " is not referenced in any upper call mapping");
      }
    }
  }

  // (e) parameters appear only in call mappings; the start mapping names the
  // same transitions as the call mapping
  for (const auto& [trn, tm] : ri.trans_map) {
    const TransitionDecl* td = up.trans(trn);
    if (!td) continue;
    auto check_no_params = [&](const ExprPtr& m, const char* which) {
      if (!m) return;
      std::vector<Sym> frees;
      collect_free_names(m, frees);
      for (const auto& p : td->params)
        for (Sym f : frees)
          if (f == p.name)
            diag({}, "param-outside-call-map",
                 std::string(which) + " mapping of " + sym_name(trn) +
                     " references parameter " + sym_name(p.name) +
                     "; only call mappings may reference parameters");
    };
    check_no_params(tm.start_map, "start");
    check_no_params(tm.end_map, "end");
    if (tm.call_map) {
      // each formal maps to a call parameter of some lower transition
      std::vector<EventRef> evs;
      collect_events(tm.call_map, evs);
      for (Sym formal : tm.call_params) {
        bool found = false;
        for (const auto& ev : evs) {
          if (ev.kind != EventKind::Call) continue;
          for (const auto& a : ev.node->subj_args)
            if (a->kind == ExKind::Name && a->id == formal) found = true;
        }
        if (!found)
          diag({}, "call-param-unmapped",
               "call-mapping parameter " + sym_name(formal) + " of " + sym_name(trn) +
                   " does not map to a call parameter of a lower transition");
      }
      // same transitions in start and call maps
      auto trans_of = [&](const ExprPtr& m, EventKind k) {
        std::set<std::pair<Sym, Sym>> out;
        if (!m) return out;
        std::vector<EventRef> es;
        collect_events(m, es);
        for (const auto& ev : es)
          if (ev.kind == k) out.insert({ev.inst, ev.subject});
        return out;
      };
      auto st = trans_of(tm.start_map, EventKind::Start);
      auto cl = trans_of(tm.call_map, EventKind::Call);
      if (st != cl)
        diag({}, "start-call-transitions-differ",
             "the start mapping of " + sym_name(trn) +
                 " must contain the same transitions as its call mapping");
    }
  }

  // (f) every upper clause rewrites and type-checks in the lower context
  {
    auto check_expr = [&](const ExprPtr& e, const std::vector<Binder>& binders,
                          const std::string& what) {
      if (!e) return;
      try {
        ExprPtr image = rewrite(e, ri);
        TypeContext tc;
        tc.sys = ri.lower_sys;
        tc.level = nullptr;
        tc.in_exit = false;
        for (const auto& b : binders)
          tc.bindings.push_back({b.name, ri.map_type(b.type)});
        infer_type(image, tc);
      } catch (const AstralError& err) {
        diag({}, "untranslatable",
             what + " cannot be translated to the lower level: " + err.what());
      }
    };
    check_expr(ri.upper->initial, {}, "initial clause");
    check_expr(ri.upper->axiom, {}, "axiom clause");
    check_expr(ri.upper->invariant, {}, "invariant clause");
    for (const auto& t : ri.upper->transitions) {
      check_expr(t.entry, t.params, "entry of " + sym_name(t.name));
      check_expr(prep_exit_expr(t.exit, t.duration), t.params,
                 "exit of " + sym_name(t.name));
      check_expr(t.duration, {}, "duration of " + sym_name(t.name));
    }
  }

  // (g) case maps split on the mapped constant over explicit covered values
  for (const auto& cm : ri.case_maps) {
    TypeRef def = nullptr;
    if (cm.upper_type && cm.upper_type->kind == TypeKind::Named) {
      const TypeDecl* td = up.type(cm.upper_type->name);
      def = td ? td->def : nullptr;
    }
    if (!def || def->kind != TypeKind::Enumerated) {
      diag(cm.loc, "case-map-type",
           "constant case maps require an enumerated upper type");
      continue;
    }
    std::set<Sym> covered;
    for (const auto& arm : cm.arms) {
      if (arm.match->kind != ExKind::Name) {
        diag(cm.loc, "case-key", "case keys must be explicit constant values");
        continue;
      }
      bool known = false;
      for (Sym c : def->enumerators)
        if (c == arm.match->id) known = true;
      if (!known)
        diag(cm.loc, "case-key",
             "case key " + sym_name(arm.match->id) + " is not a value of " +
                 render_type(cm.upper_type));
      covered.insert(arm.match->id);
    }
    for (Sym c : def->enumerators)
      if (!covered.count(c))
        diag(cm.loc, "case-uncovered",
             "constant case map does not cover value " + sym_name(c));
  }

  return diags;
}

}  // namespace astral
