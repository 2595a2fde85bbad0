#include "astral/compile.hpp"

#include <algorithm>
#include <functional>

#include "astral/eval.hpp"

namespace astral {

bool CDomain::contains(const Value& v) const {
  if (is_int_range) return v.is_int() && v.as_int() >= lo && v.as_int() <= hi;
  for (const auto& x : values)
    if (x == v) return true;
  return false;
}

const CInst* CompiledSystem::find_inst(Sym name) const {
  auto it = inst_index.find(name);
  return it == inst_index.end() ? nullptr : &instances[it->second];
}

int CompiledSystem::inst_of(Sym name) const {
  auto it = inst_index.find(name);
  return it == inst_index.end() ? -1 : it->second;
}

TypeRef CompiledSystem::resolve_type(const TypeRef& t, int proc) const {
  TypeRef cur = t;
  int guard = 0;
  while (cur && cur->kind == TypeKind::Named) {
    if (++guard > 64) throw AstralError("cyclic type definition: " + sym_name(cur->name));
    Sym n = cur->name;
    // A name that matches a process type denotes its instance domain.
    for (const auto& p : procs)
      if (p.name == n) return TypeExpr::instance_of(n);
    const TypeRef* found = nullptr;
    if (proc >= 0) {
      auto it = procs[proc].types.find(n);
      if (it != procs[proc].types.end()) found = &it->second;
    }
    if (!found) {
      auto it = global_types.find(n);
      if (it != global_types.end()) found = &it->second;
    }
    if (!found) {
      // Search every process scope (system-level formulas).
      for (const auto& p : procs) {
        auto it = p.types.find(n);
        if (it != p.types.end()) {
          found = &it->second;
          break;
        }
      }
    }
    if (!found) throw AstralError("unresolved type name: " + sym_name(n));
    cur = *found;
  }
  return cur;
}

std::vector<int> CompiledSystem::instances_of(Sym proc_type) const {
  std::vector<int> out;
  for (size_t i = 0; i < instances.size(); ++i)
    if (procs[instances[i].proc].name == proc_type) out.push_back(static_cast<int>(i));
  return out;
}

// --- domains -----------------------------------------------------------------

namespace {

void cap_check(size_t n, const EvalBounds& b, const char* what) {
  if (static_cast<int64_t>(n) > b.domain_cap)
    throw BudgetExceeded(std::string("domain too large for ") + what);
}

}  // namespace

ValueVec enumerate_domain(const CompiledSystem& sys, const TypeRef& type, int proc,
                          const EvalBounds& bounds) {
  TypeRef t = sys.resolve_type(type, proc);
  if (!t) throw AstralError("null type in domain enumeration");
  switch (t->kind) {
    case TypeKind::BuiltinT: {
      ValueVec out;
      switch (t->builtin) {
        case Builtin::Boolean:
          return {Value::boolean(false), Value::boolean(true)};
        case Builtin::Time: {
          cap_check(static_cast<size_t>(bounds.horizon) + 1, bounds, "time");
          for (int i = 0; i <= bounds.horizon; ++i) out.push_back(Value::integer(i));
          return out;
        }
        case Builtin::Integer:
        case Builtin::Real: {
          if (bounds.int_hi < bounds.int_lo)
            throw AstralError("unbounded integer quantifier domain (no bounds)");
          cap_check(static_cast<size_t>(bounds.int_hi - bounds.int_lo + 1), bounds,
                    "integer");
          for (int64_t i = bounds.int_lo; i <= bounds.int_hi; ++i)
            out.push_back(Value::integer(i));
          return out;
        }
        case Builtin::Id: {
          for (const auto& inst : sys.instances) out.push_back(Value::symbol(inst.name));
          return out;
        }
      }
      return out;
    }
    case TypeKind::Enumerated: {
      ValueVec out;
      for (Sym s : t->enumerators) out.push_back(Value::symbol(s));
      return out;
    }
    case TypeKind::InstanceOf: {
      ValueVec out;
      for (int i : sys.instances_of(t->name))
        out.push_back(Value::symbol(sys.instances[i].name));
      if (out.empty())
        throw AstralError("no instances of process type " + sym_name(t->name));
      return out;
    }
    case TypeKind::Undefined: {
      ValueVec out;
      for (int i = 0; i < bounds.undef_domain_size; ++i)
        out.push_back(Value::symbol(intern(sym_name(t->name) + "$" + std::to_string(i))));
      return out;
    }
    case TypeKind::SetOf: {
      ValueVec elems = enumerate_domain(sys, t->elem, proc, bounds);
      if (elems.size() > 20) throw BudgetExceeded("set domain base too large");
      size_t n = size_t(1) << elems.size();
      cap_check(n, bounds, "set");
      // Ordered by (cardinality, element index order): small sets first so
      // existential search over subsets finds sparse witnesses quickly.
      ValueVec out;
      std::vector<uint32_t> masks;
      for (uint32_t m = 0; m < n; ++m) masks.push_back(m);
      std::stable_sort(masks.begin(), masks.end(), [](uint32_t a, uint32_t b) {
        int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
        if (pa != pb) return pa < pb;
        return a < b;
      });
      for (uint32_t m : masks) {
        ValueVec xs;
        for (size_t i = 0; i < elems.size(); ++i)
          if (m & (1u << i)) xs.push_back(elems[i]);
        out.push_back(Value::set(std::move(xs)));
      }
      return out;
    }
    case TypeKind::Structure: {
      std::vector<ValueVec> field_domains;
      size_t total = 1;
      for (const auto& [f, ft] : t->fields) {
        field_domains.push_back(enumerate_domain(sys, ft, proc, bounds));
        total *= field_domains.back().size();
        cap_check(total, bounds, "structure");
      }
      ValueVec out;
      std::vector<size_t> idx(t->fields.size(), 0);
      while (true) {
        StructVal sv;
        for (size_t i = 0; i < t->fields.size(); ++i)
          sv.fields.emplace_back(t->fields[i].first, field_domains[i][idx[i]]);
        out.push_back(Value::structure(std::move(sv)));
        size_t k = t->fields.size();
        while (k > 0) {
          --k;
          if (++idx[k] < field_domains[k].size()) break;
          idx[k] = 0;
          if (k == 0) return out;
        }
        if (t->fields.empty()) return out;
      }
    }
    case TypeKind::TypedefAlias: {
      ValueVec base = enumerate_domain(sys, t->elem, proc, bounds);
      // Typedef predicates are pure value predicates; evaluate without a trace.
      CExpr pred = compile_expr(sys, t->predicate, proc, {{t->name, t->elem}});
      ValueVec out;
      for (auto& v : base) {
        Value frame[1] = {v};
        EvalCtx ctx;
        ctx.sys = &sys;
        ctx.frame = frame;
        ctx.now = 0;
        EvalLimits lim;
        ctx.limits = &lim;
        Value r = eval_root(pred, ctx);
        if (r.is_bool() && r.as_bool()) out.push_back(std::move(v));
      }
      return out;
    }
    case TypeKind::ListOf:
      throw AstralError("list-typed quantifier domains are not finite-izable");
    case TypeKind::Named:
      throw AstralError("unresolved type name: " + sym_name(t->name));
  }
  return {};
}

namespace {

CDomain make_domain(const CompiledSystem& sys, const TypeRef& type, int proc,
                    const EvalBounds& bounds) {
  CDomain d;
  TypeRef t = sys.resolve_type(type, proc);
  if (t && t->kind == TypeKind::BuiltinT &&
      (t->builtin == Builtin::Integer || t->builtin == Builtin::Real)) {
    d.is_int_range = true;
    d.lo = bounds.int_lo;
    d.hi = bounds.int_hi;
    if (d.hi < d.lo) throw AstralError("unbounded integer quantifier domain");
    return d;
  }
  if (t && t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Time) {
    d.is_int_range = true;
    d.lo = 0;
    d.hi = bounds.horizon;
    return d;
  }
  d.values = enumerate_domain(sys, type, proc, bounds);
  return d;
}

// --- expression compiler -------------------------------------------------------

struct Compiler {
  const CompiledSystem& sys;
  CExpr& out;
  int proc;  // -1 = system scope
  bool allow_exit_forms;
  std::vector<std::pair<Sym, TypeRef>> binder_stack;  // frame slot = position
  int max_frame = 0;

  Compiler(const CompiledSystem& s, CExpr& o, int p, bool exit_forms)
      : sys(s), out(o), proc(p), allow_exit_forms(exit_forms) {}

  int emit(CNode n) {
    for (int ch : {n.a, n.b, n.c, n.inst}) track(n, ch);
    if (n.args_at >= 0)
      for (int i = 0; i < n.nargs; ++i) track(n, out.arg_pool[n.args_at + i]);
    out.nodes.push_back(n);
    return static_cast<int>(out.nodes.size()) - 1;
  }
  void track(CNode& n, int child) {
    if (child < 0 || child >= static_cast<int>(out.nodes.size())) return;
    n.max_bref = std::max(n.max_bref, out.nodes[child].max_bref);
    n.has_choose = n.has_choose || out.nodes[child].has_choose;
  }
  int pool_value(Value v) {
    out.value_pool.push_back(std::move(v));
    return static_cast<int>(out.value_pool.size()) - 1;
  }
  int pool_args(const std::vector<int>& xs) {
    int at = static_cast<int>(out.arg_pool.size());
    out.arg_pool.insert(out.arg_pool.end(), xs.begin(), xs.end());
    return at;
  }

  int lit(Value v) {
    CNode n;
    n.op = COp::Lit;
    n.pool = pool_value(std::move(v));
    return emit(n);
  }

  [[noreturn]] void err(const std::string& msg, const SourceLoc& loc) {
    throw AstralError(msg + (loc.line ? " at " + loc.to_string() : ""), loc);
  }

  int find_binder(Sym id) {
    for (int i = static_cast<int>(binder_stack.size()) - 1; i >= 0; --i)
      if (binder_stack[i].first == id) return i;
    return -1;
  }

  // Looks up an enumerator symbol across visible type scopes.
  bool is_enumerator(Sym id) {
    auto scan = [&](const std::unordered_map<Sym, TypeRef>& types) {
      for (const auto& [n, t] : types) {
        TypeRef r = t;
        if (r && r->kind == TypeKind::Enumerated)
          for (Sym e : r->enumerators)
            if (e == id) return true;
      }
      return false;
    };
    if (scan(sys.global_types)) return true;
    if (proc >= 0 && scan(sys.procs[proc].types)) return true;
    if (proc < 0)
      for (const auto& p : sys.procs)
        if (scan(p.types)) return true;
    return false;
  }

  const CConst* find_const(Sym id, int scope_proc) {
    if (scope_proc >= 0) {
      auto it = sys.procs[scope_proc].consts.find(id);
      if (it != sys.procs[scope_proc].consts.end()) return &it->second;
    }
    auto g = sys.global_consts.find(id);
    if (g != sys.global_consts.end()) return &g->second;
    return nullptr;
  }

  int compile_const(const CConst& c, const Expr& ref) {
    if (c.params.empty()) {
      if (c.folded) return lit(*c.folded);
      if (c.definition) return compile(c.definition);
      err("constant " + sym_name(c.name) + " has no value", ref.loc);
    }
    if (!c.definition)
      err("table constant " + sym_name(c.name) + " has no definition", ref.loc);
    if (ref.args.size() != c.params.size())
      err("wrong argument count for constant " + sym_name(c.name), ref.loc);
    // Inline the definition with the actual arguments substituted.
    std::vector<std::pair<Sym, ExprPtr>> subst;
    for (size_t i = 0; i < c.params.size(); ++i)
      subst.emplace_back(c.params[i].name, ref.args[i]);
    return compile(substitute_names(c.definition, subst));
  }

  // Resolves the instance of a qualifier expression; emits nothing when the
  // qualifier is a literal instance name.
  void resolve_qual(const ExprPtr& qual, const SourceLoc& loc, InstMode& mode,
                    int& inst, int& qproc) {
    if (qual->kind == ExKind::Name && !qual->primed && qual->args.empty() &&
        !qual->qual && find_binder(qual->id) < 0) {
      int idx = sys.inst_of(qual->id);
      if (idx < 0) err("unknown instance: " + sym_name(qual->id), loc);
      mode = InstMode::Fixed;
      inst = idx;
      qproc = sys.instances[idx].proc;
      return;
    }
    // Dynamic qualifier; its process type is known when the static type is
    // a single process-instance domain.
    mode = InstMode::Dynamic;
    inst = compile(qual);
    qproc = -1;
    if (qual->kind == ExKind::Name && !qual->qual && qual->args.empty()) {
      int b = find_binder(qual->id);
      if (b >= 0 && binder_stack[b].second) {
        TypeRef t = sys.resolve_type(binder_stack[b].second, proc);
        if (t && t->kind == TypeKind::InstanceOf) {
          auto is = sys.instances_of(t->name);
          if (!is.empty()) qproc = sys.instances[is[0]].proc;
        }
      }
    }
  }

  int compile_name(const Expr& e) {
    if (!e.qual) {
      int b = find_binder(e.id);
      if (b >= 0) {
        if (e.primed || !e.args.empty())
          err("bound variable " + sym_name(e.id) + " takes no prime/arguments", e.loc);
        CNode n;
        n.op = COp::BoundRef;
        n.frame = b;
        n.max_bref = b;
        return emit(n);
      }
      if (proc >= 0) {
        const CProc& p = sys.procs[proc];
        auto vi = p.var_index.find(e.id);
        if (vi != p.var_index.end()) return compile_var_read(e, InstMode::SelfInst, -1, proc, vi->second);
        auto ci = p.consts.find(e.id);
        if (ci != p.consts.end()) return compile_const(ci->second, e);
      }
      if (is_enumerator(e.id)) {
        if (e.primed || !e.args.empty()) err("enumerator takes no arguments", e.loc);
        return lit(Value::symbol(e.id));
      }
      if (const CConst* c = find_const(e.id, -1)) return compile_const(*c, e);
      if (sys.inst_of(e.id) >= 0) {
        if (e.primed || !e.args.empty()) err("instance name takes no arguments", e.loc);
        return lit(Value::symbol(e.id));
      }
      err("unresolved name: " + sym_name(e.id), e.loc);
    }
    InstMode mode;
    int inst, qproc;
    resolve_qual(e.qual, e.loc, mode, inst, qproc);
    if (qproc >= 0) {
      const CProc& p = sys.procs[qproc];
      auto vi = p.var_index.find(e.id);
      if (vi != p.var_index.end()) return compile_var_read(e, mode, inst, qproc, vi->second);
      auto ci = p.consts.find(e.id);
      if (ci != p.consts.end()) return compile_const(ci->second, e);
      err("process " + sym_name(p.name) + " has no member " + sym_name(e.id), e.loc);
    }
    // Process type unknown until evaluation (generic id qualifier).
    return compile_var_read(e, mode, inst, -1, -1);
  }

  int compile_var_read(const Expr& e, InstMode mode, int inst, int qproc, int var) {
    if (e.primed && !allow_exit_forms)
      err("primed reference outside an exit assertion", e.loc);
    CNode n;
    n.op = COp::VarRead;
    n.inst_mode = mode;
    n.inst = inst;
    n.sym_id = static_cast<int>(e.id);
    n.b = var;
    n.c = qproc;
    n.flag = e.primed;
    if (var >= 0 && qproc >= 0) {
      const CVar& v = sys.procs[qproc].vars[var];
      if (e.args.size() != v.params.size())
        err("variable " + sym_name(e.id) + " expects " +
                std::to_string(v.params.size()) + " argument(s)",
            e.loc);
      if (mode == InstMode::Fixed)
        n.slot_base = sys.instances[inst].frame_base + v.slot_base;
    }
    std::vector<int> args;
    for (const auto& a : e.args) args.push_back(compile(a));
    n.nargs = static_cast<uint16_t>(args.size());
    n.args_at = pool_args(args);
    return emit(n);
  }

  int compile_event(const Expr& e) {
    InstMode mode = InstMode::SelfInst;
    int inst = -1, qproc = proc;
    if (e.qual) {
      resolve_qual(e.qual, e.loc, mode, inst, qproc);
    } else if (proc < 0) {
      err("unqualified event in system-level formula", e.loc);
    }
    CNode n;
    n.op = e.time ? COp::EventPred : COp::EventLast;
    n.ev = e.ev;
    n.inst_mode = mode;
    n.inst = inst;
    n.sym_id = static_cast<int>(e.id);
    n.c = qproc;
    n.b = -1;
    if (qproc >= 0) {
      const CProc& p = sys.procs[qproc];
      if (e.ev == EventKind::Change) {
        auto vi = p.var_index.find(e.id);
        if (vi == p.var_index.end())
          err("Change subject is not a declared variable: " + sym_name(e.id), e.loc);
        n.b = vi->second;
      } else {
        auto ti = p.trans_index.find(e.id);
        if (ti == p.trans_index.end())
          err("event subject is not a declared transition: " + sym_name(e.id), e.loc);
        n.b = ti->second;
        if (!e.subj_args.empty() &&
            e.subj_args.size() != p.transitions[ti->second].params.size())
          err("event parameter count mismatch for " + sym_name(e.id), e.loc);
      }
    }
    std::vector<int> args;
    for (const auto& a : e.subj_args) args.push_back(compile(a));
    n.nargs = static_cast<uint16_t>(args.size());
    n.args_at = pool_args(args);
    n.a = e.time ? compile(e.time) : -1;
    return emit(n);
  }

  int compile_apply(const Expr& e) {
    const Ops& o = ops();
    Sym op = e.id;
    auto bin = [&](COp c) {
      CNode n;
      n.op = c;
      n.a = compile(e.args[0]);
      n.b = e.args.size() > 1 ? compile(e.args[1]) : -1;
      return emit(n);
    };
    if (op == o.and_ || op == o.or_) {
      CNode n;
      n.op = op == o.and_ ? COp::And : COp::Or;
      std::vector<int> xs;
      for (const auto& a : e.args) xs.push_back(compile(a));
      n.nargs = static_cast<uint16_t>(xs.size());
      n.args_at = pool_args(xs);
      return emit(n);
    }
    if (op == o.not_) return bin(COp::Not);
    if (op == o.implies) return bin(COp::Implies);
    if (op == o.iff) return bin(COp::Iff);
    if (op == o.eq) return bin(COp::CmpEq);
    if (op == o.ne) return bin(COp::CmpNe);
    if (op == o.lt) return bin(COp::CmpLt);
    if (op == o.le) return bin(COp::CmpLe);
    if (op == o.gt) return bin(COp::CmpGt);
    if (op == o.ge) return bin(COp::CmpGe);
    if (op == o.add) return bin(COp::Add);
    if (op == o.sub) return bin(COp::Sub);
    if (op == o.mul) return bin(COp::Mul);
    if (op == o.div_) return bin(COp::Div);
    if (op == o.mod) return bin(COp::Mod);
    if (op == o.neg) return bin(COp::Neg);
    if (op == o.union_) return bin(COp::UnionOp);
    if (op == o.set_diff) return bin(COp::SetDiffOp);
    if (op == o.isin) return bin(COp::IsIn);
    if (op == o.not_isin) return bin(COp::NotIsIn);
    if (op == o.contained_in) return bin(COp::ContainedIn);
    if (op == o.subset) return bin(COp::SubsetOp);
    if (op == o.concat) return bin(COp::ConcatOp);
    if (op == o.set_size) return bin(COp::SetSize);
    if (op == o.list_len) return bin(COp::ListLen);
    if (op == o.index) return compile_index(e);
    err("unknown operator: " + sym_name(op), e.loc);
  }

  int compile_index(const Expr& e) {
    CNode n;
    n.op = COp::Index;
    n.a = compile(e.args[0]);
    const ExprPtr& idx = e.args[1];
    // A bare name that resolves to nothing is a structure field label.
    if (idx->kind == ExKind::Name && !idx->qual && idx->args.empty() && !idx->primed &&
        find_binder(idx->id) < 0 && !is_enumerator(idx->id) &&
        !(proc >= 0 && sys.procs[proc].var_index.count(idx->id)) &&
        !find_const(idx->id, proc) && sys.inst_of(idx->id) < 0) {
      n.b = lit(Value::symbol(idx->id));
    } else {
      n.b = compile(idx);
    }
    return emit(n);
  }

  int compile_binderized(const Expr& e, COp op) {
    CNode n;
    n.op = op;
    n.flag = e.is_forall;
    n.frame = static_cast<int>(binder_stack.size());
    n.domain_at = static_cast<int>(out.domains.size());
    for (const auto& b : e.binders) {
      if (!b.type) err("binder " + sym_name(b.name) + " lacks a type", e.loc);
      out.domains.push_back(make_domain(sys, b.type, proc, sys.bounds));
    }
    for (const auto& b : e.binders) binder_stack.emplace_back(b.name, b.type);
    max_frame = std::max(max_frame, static_cast<int>(binder_stack.size()));
    int body = compile(e.args[0]);
    binder_stack.resize(binder_stack.size() - e.binders.size());
    n.a = body;
    n.nargs = static_cast<uint16_t>(e.binders.size());
    // References to this node's own binders do not escape; references to any
    // outer binder are conservatively assumed once the body touches binders
    // at or above this frame (a single max cannot distinguish them).
    CNode& bodyn = out.nodes[body];
    n.max_bref = std::min(bodyn.max_bref, n.frame - 1);
    n.has_choose = bodyn.has_choose || op == COp::ChooseOp;
    int idx = static_cast<int>(out.nodes.size());
    out.nodes.push_back(n);
    if (op == COp::Quant) analyze_quant(idx);
    return idx;
  }

  // --- quantifier pruning ----------------------------------------------

  bool evaluable_below(int node, int frame_base) {
    return out.nodes[node].max_bref < frame_base;
  }

  // Unwraps past(atom, anchor) to the event atom when present.
  int event_atom_of(int node) {
    const CNode& n = out.nodes[node];
    if (n.op == COp::EventPred) return node;
    if (n.op == COp::PastAnchor && out.nodes[n.a].op == COp::EventPred) return n.a;
    return -1;
  }

  void analyze_quant(int qidx) {
    CNode& q = out.nodes[qidx];
    int nb = q.nargs;
    int base = q.frame;
    CQuantPrune pr;
    pr.clamp_lo.assign(nb, -1);
    pr.clamp_hi.assign(nb, -1);
    pr.clamp_lo_strict.assign(nb, false);
    pr.clamp_hi_strict.assign(nb, false);
    pr.pinned.assign(nb, false);

    std::vector<int> conjuncts;
    const CNode& body = out.nodes[q.a];
    int src = -1;
    if (q.flag && body.op == COp::Implies) src = body.a;
    if (!q.flag) src = q.a;
    if (src >= 0) {
      const CNode& s = out.nodes[src];
      if (s.op == COp::And)
        for (int i = 0; i < s.nargs; ++i) conjuncts.push_back(out.arg_pool[s.args_at + i]);
      else
        conjuncts.push_back(src);
    }

    auto local_bref = [&](int node) -> int {
      const CNode& n = out.nodes[node];
      if (n.op == COp::BoundRef && n.frame >= base && n.frame < base + nb)
        return n.frame - base;
      return -1;
    };

    for (int cj : conjuncts) {
      const CNode& n = out.nodes[cj];
      // range clamps on integer binders
      if (n.op == COp::CmpLt || n.op == COp::CmpLe || n.op == COp::CmpGt ||
          n.op == COp::CmpGe) {
        int lb = local_bref(n.a), rb = local_bref(n.b);
        bool lt = n.op == COp::CmpLt, le = n.op == COp::CmpLe;
        bool gt = n.op == COp::CmpGt, ge = n.op == COp::CmpGe;
        if (lb >= 0 && rb < 0 && evaluable_below(n.b, base)) {
          // binder OP expr
          if (lt || le) {
            if (pr.clamp_hi[lb] < 0) {
              pr.clamp_hi[lb] = n.b;
              pr.clamp_hi_strict[lb] = lt;
            }
          } else if (gt || ge) {
            if (pr.clamp_lo[lb] < 0) {
              pr.clamp_lo[lb] = n.b;
              pr.clamp_lo_strict[lb] = gt;
            }
          }
        } else if (rb >= 0 && lb < 0 && evaluable_below(n.a, base)) {
          // expr OP binder
          if (lt || le) {
            if (pr.clamp_lo[rb] < 0) {
              pr.clamp_lo[rb] = n.a;
              pr.clamp_lo_strict[rb] = lt;
            }
          } else if (gt || ge) {
            if (pr.clamp_hi[rb] < 0) {
              pr.clamp_hi[rb] = n.a;
              pr.clamp_hi_strict[rb] = gt;
            }
          }
        }
        continue;
      }
      // event-atom pinning
      int atom = event_atom_of(cj);
      if (atom < 0) continue;
      const CNode& a = out.nodes[atom];
      if (a.inst_mode == InstMode::Dynamic || a.b < 0 || a.c < 0) continue;
      // time pin: the event's time argument is exactly one unpinned binder
      int tb = a.a >= 0 ? local_bref(a.a) : -1;
      if (tb >= 0 && !pr.pinned[tb]) {
        // anchor / args need not be independent; candidates are a superset.
        CPin pin;
        pin.atom = atom;
        pin.binders.assign(1, tb);
        pr.pins.push_back(pin);
        pr.pinned[tb] = true;
        continue;
      }
      // param pin: subject args bind distinct unpinned binders; time and the
      // surrounding anchor must be evaluable without this quantifier.
      if (a.nargs > 0 && a.a >= 0 && evaluable_below(a.a, base)) {
        const CNode& wrap = out.nodes[cj];
        if (wrap.op == COp::PastAnchor && !evaluable_below(wrap.b, base)) continue;
        std::vector<int> covered(a.nargs, -1);
        bool ok = false, bad = false;
        std::vector<bool> used(nb, false);
        for (int i = 0; i < a.nargs; ++i) {
          int arg = out.arg_pool[a.args_at + i];
          int lb = local_bref(arg);
          if (lb >= 0) {
            if (pr.pinned[lb] || used[lb]) {
              bad = true;
              break;
            }
            used[lb] = true;
            covered[i] = lb;
            ok = true;
          } else if (!evaluable_below(arg, base)) {
            bad = true;
            break;
          }
        }
        if (bad || !ok) continue;
        CPin pin;
        pin.atom = atom;
        pin.binders = covered;
        for (int lb : covered)
          if (lb >= 0) pr.pinned[lb] = true;
        pr.pins.push_back(pin);
      }
    }

    bool useful = !pr.pins.empty();
    for (int i = 0; i < nb; ++i)
      if (pr.clamp_lo[i] >= 0 || pr.clamp_hi[i] >= 0) useful = true;
    if (useful) {
      out.prunes.push_back(std::move(pr));
      q.prune = static_cast<int>(out.prunes.size()) - 1;
    }
  }

  // ----------------------------------------------------------------------

  int compile(const ExprPtr& e) {
    switch (e->kind) {
      case ExKind::Lit:
        return lit(e->lit);
      case ExKind::Now: {
        CNode n;
        n.op = COp::NowRef;
        return emit(n);
      }
      case ExKind::Name:
        return compile_name(*e);
      case ExKind::Past: {
        CNode n;
        n.op = COp::PastAnchor;
        n.b = compile(e->args[1]);
        n.a = compile(e->args[0]);
        return emit(n);
      }
      case ExKind::Event:
        return compile_event(*e);
      case ExKind::Apply:
        return compile_apply(*e);
      case ExKind::Quantifier:
        return compile_binderized(*e, COp::Quant);
      case ExKind::Choose:
        return compile_binderized(*e, COp::ChooseOp);
      case ExKind::SetDef:
        return compile_binderized(*e, COp::SetDefOp);
      case ExKind::ListDef:
      case ExKind::SetLit: {
        CNode n;
        n.op = e->kind == ExKind::ListDef ? COp::MkList : COp::MkSet;
        std::vector<int> xs;
        for (const auto& a : e->args) xs.push_back(compile(a));
        n.nargs = static_cast<uint16_t>(xs.size());
        n.args_at = pool_args(xs);
        return emit(n);
      }
      case ExKind::StructDef: {
        CNode n;
        n.op = COp::MkStruct;
        out.sym_pool.push_back(e->field_names);
        n.pool = static_cast<int>(out.sym_pool.size()) - 1;
        std::vector<int> xs;
        for (const auto& a : e->args) xs.push_back(compile(a));
        n.nargs = static_cast<uint16_t>(xs.size());
        n.args_at = pool_args(xs);
        return emit(n);
      }
      case ExKind::IfThenElse: {
        CNode n;
        n.op = COp::IfElse;
        n.a = compile(e->args[0]);
        n.b = compile(e->args[1]);
        n.c = compile(e->args[2]);
        return emit(n);
      }
      case ExKind::CaseOf: {
        CNode n;
        n.op = COp::CaseOf;
        n.a = compile(e->args[0]);
        std::vector<int> xs;
        for (const auto& arm : e->arms) {
          xs.push_back(compile(arm.match));
          xs.push_back(compile(arm.body));
        }
        n.nargs = static_cast<uint16_t>(xs.size());
        n.args_at = pool_args(xs);
        return emit(n);
      }
      case ExKind::Becomes: {
        if (!allow_exit_forms) err("BECOMES outside an exit assertion", e->loc);
        if (e->args[0]->kind != ExKind::Name)
          err("BECOMES target must be a variable", e->loc);
        CNode n;
        n.op = COp::BecomesEq;
        n.a = compile(e->args[0]);
        if (out.nodes[n.a].op != COp::VarRead)
          err("BECOMES target must be a variable", e->loc);
        n.b = compile(e->args[1]);
        return emit(n);
      }
      case ExKind::NoChange: {
        if (!allow_exit_forms) err("NOCHANGE outside an exit assertion", e->loc);
        CNode n;
        n.op = COp::NoChangeEq;
        n.a = compile(e->args[0]);
        if (out.nodes[n.a].op != COp::VarRead)
          err("NOCHANGE target must be a variable", e->loc);
        return emit(n);
      }
      case ExKind::ImplOf:
      case ExKind::Impl0Of:
        err("IMPL is only meaningful inside mapping right-hand sides", e->loc);
    }
    err("unsupported expression", e->loc);
  }
};

}  // namespace

CExpr compile_expr(const CompiledSystem& sys, const ExprPtr& e, int proc,
                   const std::vector<Binder>& binders, bool allow_exit_forms) {
  CExpr out;
  out.source = e;
  Compiler c(sys, out, proc, allow_exit_forms);
  for (const auto& b : binders) c.binder_stack.emplace_back(b.name, b.type);
  c.max_frame = static_cast<int>(binders.size());
  out.root = c.compile(e);
  out.frame_size = c.max_frame;
  return out;
}

// --- system compilation --------------------------------------------------------

namespace {

CExpr try_compile(const CompiledSystem& sys, const ExprPtr& e, int proc,
                  const std::vector<Binder>& binders, bool exit_forms) {
  try {
    return compile_expr(sys, e, proc, binders, exit_forms);
  } catch (const AstralError& err) {
    CExpr broken;
    broken.source = e;
    broken.compile_error = err.what();
    return broken;
  }
}

Value fold_const(const CompiledSystem& sys, const CExpr& ce) {
  EvalCtx ctx;
  ctx.sys = &sys;
  ctx.now = 0;
  EvalLimits lim;
  ctx.limits = &lim;
  std::vector<Value> frame(static_cast<size_t>(ce.frame_size) + 1);
  ctx.frame = frame.data();
  return eval_root(ce, ctx);
}

}  // namespace

std::shared_ptr<CompiledSystem> compile_system(const SystemSpec& spec,
                                               const EvalBounds& bounds) {
  auto sys = std::make_shared<CompiledSystem>();
  sys->spec = std::make_shared<SystemSpec>(spec);
  sys->bounds = bounds;
  const SystemSpec& s = *sys->spec;

  for (const auto& t : s.global_types) sys->global_types[t.name] = t.def;

  // Process scaffolding first so instance domains resolve.
  sys->procs.reserve(s.levels.size());
  for (const auto& level : s.levels) {
    CProc p;
    p.name = level.process_type;
    p.level = &level;
    for (const auto& t : level.types) p.types[t.name] = t.def;
    sys->procs.push_back(std::move(p));
  }
  for (const auto& inst : s.instances) {
    int proc = -1;
    for (size_t i = 0; i < sys->procs.size(); ++i)
      if (sys->procs[i].name == inst.process_type) proc = static_cast<int>(i);
    if (proc < 0)
      throw AstralError("instance " + sym_name(inst.name) +
                        " has no process level: " + sym_name(inst.process_type));
    CInst ci;
    ci.name = inst.name;
    ci.proc = proc;
    sys->instances.push_back(ci);
    sys->inst_index[inst.name] = static_cast<int>(sys->instances.size()) - 1;
  }

  // Global constants (may reference earlier ones).
  for (const auto& c : s.global_consts) {
    CConst cc;
    cc.name = c.name;
    cc.type = c.type;
    cc.params = c.params;
    cc.definition = c.value;
    if (c.value && c.params.empty()) {
      try {
        cc.folded = fold_const(*sys, compile_expr(*sys, c.value, -1));
      } catch (const AstralError&) {
      }
    }
    sys->global_consts[c.name] = std::move(cc);
  }

  // Per-process variables, constants, transitions.
  for (size_t pi = 0; pi < sys->procs.size(); ++pi) {
    CProc& p = sys->procs[pi];
    const ProcessLevel& level = *p.level;
    for (const auto& c : level.constants) {
      CConst cc;
      cc.name = c.name;
      cc.type = c.type;
      cc.params = c.params;
      cc.definition = c.value;
      if (c.value && c.params.empty()) {
        try {
          cc.folded = fold_const(*sys, compile_expr(*sys, c.value, static_cast<int>(pi)));
        } catch (const AstralError&) {
        }
      }
      p.consts[c.name] = std::move(cc);
    }
    int slot = 0;
    for (const auto& v : level.variables) {
      CVar cv;
      cv.name = v.name;
      cv.type = v.type;
      cv.params = v.params;
      cv.slot_base = slot;
      if (!v.params.empty()) {
        std::vector<ValueVec> doms;
        size_t total = 1;
        for (const auto& b : v.params) {
          doms.push_back(enumerate_domain(*sys, b.type, static_cast<int>(pi), bounds));
          total *= doms.back().size();
          if (total > 4096)
            throw AstralError("parameterized variable domain too large: " +
                              sym_name(v.name));
        }
        std::vector<size_t> idx(v.params.size(), 0);
        while (true) {
          ValueVec tup;
          for (size_t i = 0; i < doms.size(); ++i) tup.push_back(doms[i][idx[i]]);
          cv.param_tuples.push_back(std::move(tup));
          size_t k = doms.size();
          bool done = true;
          while (k > 0) {
            --k;
            if (++idx[k] < doms[k].size()) {
              done = false;
              break;
            }
            idx[k] = 0;
          }
          if (done) break;
        }
        cv.components = static_cast<int>(cv.param_tuples.size());
      }
      slot += cv.components;
      p.var_index[v.name] = static_cast<int>(p.vars.size());
      p.vars.push_back(std::move(cv));
    }
    p.frame_size = slot;

    int ti = 0;
    for (const auto& tr : level.transitions) {
      CTrans ct;
      ct.name = tr.name;
      ct.params = tr.params;
      ct.exported = tr.exported;
      ct.duration_expr = tr.duration;
      ct.entry_src = tr.entry;
      ct.exit_src = tr.exit;
      ct.index = ti;
      try {
        Value d = fold_const(*sys, compile_expr(*sys, tr.duration, static_cast<int>(pi)));
        if (d.is_int() && d.as_int() >= 1) ct.duration = static_cast<int>(d.as_int());
      } catch (const AstralError&) {
        ct.duration = -1;  // symbolic; fine for levels that are never stepped
      }
      for (const auto& b : tr.params) {
        try {
          ct.param_domains.push_back(make_domain(*sys, b.type, static_cast<int>(pi), bounds));
        } catch (const AstralError&) {
          ct.param_domains.push_back(CDomain{});  // enumerated only if needed
        }
      }
      ct.entry = try_compile(*sys, tr.entry, static_cast<int>(pi), tr.params, false);
      ct.exit = try_compile(*sys, tr.exit, static_cast<int>(pi), tr.params, true);
      p.trans_index[tr.name] = ti++;
      p.transitions.push_back(std::move(ct));
    }
    p.initial = try_compile(*sys, level.initial, static_cast<int>(pi), {}, true);
    p.invariant = try_compile(*sys, level.invariant, static_cast<int>(pi), {}, false);
    p.axiom = try_compile(*sys, level.axiom, static_cast<int>(pi), {}, false);
  }

  // Frame layout across instances.
  int base = 0;
  for (auto& inst : sys->instances) {
    inst.frame_base = base;
    base += sys->procs[inst.proc].frame_size;
  }
  sys->total_slots = base;
  return sys;
}

}  // namespace astral
