#include "astral/typecheck.hpp"

#include <algorithm>

namespace astral {

TypeEnv type_env_of(const SystemSpec& sys, const ProcessLevel* level) {
  TypeEnv env;
  const SystemSpec* s = &sys;
  env.lookup = [s, level](Sym n) -> TypeRef {
    if (level)
      for (const auto& t : level->types)
        if (t.name == n) return t.def;
    for (const auto& t : s->global_types)
      if (t.name == n) return t.def;
    for (const auto& l : s->levels)
      for (const auto& t : l.types)
        if (t.name == n) return t.def;
    return nullptr;
  };
  env.is_process_type = [s](Sym n) {
    for (const auto& l : s->levels)
      if (l.process_type == n) return true;
    return false;
  };
  return env;
}

namespace {

// Resolve Named references (but never typedef bases).
TypeRef resolve_names(TypeRef t, const TypeEnv& env) {
  int guard = 0;
  while (t && t->kind == TypeKind::Named) {
    if (++guard > 64) throw AstralError("cyclic type definition");
    if (env.is_process_type && env.is_process_type(t->name))
      return TypeExpr::instance_of(t->name);
    TypeRef d = env.lookup ? env.lookup(t->name) : nullptr;
    if (!d) throw AstralError("unresolved type name: " + sym_name(t->name));
    t = d;
  }
  return t;
}

// Structural identity for the "T is identical to IMPL(T)" clause.
bool identical(const TypeRef& a, const TypeRef& b, const TypeEnv& ae, const TypeEnv& be,
               int depth = 0) {
  if (depth > 64) return false;
  TypeRef x = resolve_names(a, ae);
  TypeRef y = resolve_names(b, be);
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case TypeKind::BuiltinT:
      return x->builtin == y->builtin;
    case TypeKind::Enumerated:
      return x->enumerators == y->enumerators;
    case TypeKind::ListOf:
    case TypeKind::SetOf:
      return identical(x->elem, y->elem, ae, be, depth + 1);
    case TypeKind::Structure: {
      if (x->fields.size() != y->fields.size()) return false;
      for (size_t i = 0; i < x->fields.size(); ++i) {
        if (x->fields[i].first != y->fields[i].first) return false;
        if (!identical(x->fields[i].second, y->fields[i].second, ae, be, depth + 1))
          return false;
      }
      return true;
    }
    case TypeKind::TypedefAlias:
      return x->name == y->name && identical(x->elem, y->elem, ae, be, depth + 1) &&
             alpha_equal(x->predicate, y->predicate);
    case TypeKind::Undefined:
    case TypeKind::InstanceOf:
      return x->name == y->name;
    case TypeKind::Named:
      return false;
  }
  return false;
}

CompatVerdict compat_rec(const TypeRef& upper, const TypeRef& lower, const TypeEnv& ue,
                         const TypeEnv& le, int depth) {
  CompatVerdict v;
  if (depth > 64) {
    v.witness.push_back("recursion limit");
    return v;
  }
  TypeRef u = resolve_names(upper, ue);
  TypeRef l = resolve_names(lower, le);

  if (u->kind == TypeKind::Undefined) {
    v.compatible = true;
    v.witness.push_back("undefined upper type");
    return v;
  }
  if (identical(u, l, ue, le)) {
    v.compatible = true;
    v.witness.push_back("identical");
    return v;
  }
  // numeric identity modulo the integer/time <= real subtyping: the paper's
  // list-of-real vs list-of-integer example lands here.
  if (is_numeric_builtin(u) && is_numeric_builtin(l)) {
    v.compatible = true;
    v.witness.push_back("numeric");
    return v;
  }
  if (u->kind == TypeKind::ListOf && l->kind == TypeKind::ListOf) {
    CompatVerdict inner = compat_rec(u->elem, l->elem, ue, le, depth + 1);
    if (inner.compatible) {
      inner.witness.insert(inner.witness.begin(), "list elements");
      return inner;
    }
    v.witness.push_back("list element types incompatible");
    v.witness.insert(v.witness.end(), inner.witness.begin(), inner.witness.end());
    return v;
  }
  if (u->kind == TypeKind::SetOf && l->kind == TypeKind::SetOf) {
    CompatVerdict inner = compat_rec(u->elem, l->elem, ue, le, depth + 1);
    if (inner.compatible) {
      inner.witness.insert(inner.witness.begin(), "set elements");
      return inner;
    }
    v.witness.push_back("set element types incompatible");
    v.witness.insert(v.witness.end(), inner.witness.begin(), inner.witness.end());
    return v;
  }
  if (u->kind == TypeKind::Structure && l->kind == TypeKind::Structure) {
    if (u->fields.size() != l->fields.size()) {
      v.witness.push_back("structure field counts differ");
      return v;
    }
    for (size_t i = 0; i < u->fields.size(); ++i) {
      if (u->fields[i].first != l->fields[i].first) {
        v.witness.push_back("field identifiers differ: " +
                            sym_name(u->fields[i].first) + " vs " +
                            sym_name(l->fields[i].first));
        return v;
      }
    }
    for (size_t i = 0; i < u->fields.size(); ++i) {
      CompatVerdict inner =
          compat_rec(u->fields[i].second, l->fields[i].second, ue, le, depth + 1);
      if (!inner.compatible) {
        v.witness.push_back("field " + sym_name(u->fields[i].first) + " incompatible");
        v.witness.insert(v.witness.end(), inner.witness.begin(), inner.witness.end());
        return v;
      }
    }
    v.compatible = true;
    v.witness.push_back("structures with identical field names");
    return v;
  }
  if (l->kind == TypeKind::TypedefAlias) {
    CompatVerdict inner = compat_rec(u, l->elem, ue, le, depth + 1);
    if (inner.compatible) {
      inner.witness.insert(inner.witness.begin(), "lower typedef of a compatible base");
      return inner;
    }
    v.witness.push_back("lower typedef base incompatible");
    v.witness.insert(v.witness.end(), inner.witness.begin(), inner.witness.end());
    return v;
  }
  v.witness.push_back("no compatibility rule applies (" + render_type(u) + " vs " +
                      render_type(l) + ")");
  return v;
}

}  // namespace

CompatVerdict compatible(const TypeRef& upper, const TypeRef& lower,
                         const TypeEnv& upper_env, const TypeEnv& lower_env) {
  return compat_rec(upper, lower, upper_env, lower_env, 0);
}

// --- inference -----------------------------------------------------------------

namespace {

TypeRef t_int() { return TypeExpr::builtin_type(Builtin::Integer); }
TypeRef t_real() { return TypeExpr::builtin_type(Builtin::Real); }
TypeRef t_bool() { return TypeExpr::builtin_type(Builtin::Boolean); }
TypeRef t_time() { return TypeExpr::builtin_type(Builtin::Time); }

[[noreturn]] void terr(const std::string& msg, const SourceLoc& loc) {
  throw AstralError("type error: " + msg +
                        (loc.line ? " at " + loc.to_string() : ""),
                    loc);
}

struct Inferencer {
  TypeContext& ctx;

  TypeRef resolve(const TypeRef& t) { return resolve_names(t, ctx.env()); }

  bool numeric(const TypeRef& t) { return is_numeric_builtin(resolve(t)); }

  TypeRef numeric_join(const TypeRef& a, const TypeRef& b) {
    TypeRef x = resolve(a), y = resolve(b);
    if (x->builtin == Builtin::Real || y->builtin == Builtin::Real) return t_real();
    if (x->builtin == Builtin::Time || y->builtin == Builtin::Time) return t_time();
    return t_int();
  }

  // equality-comparable / branch-joinable; a null type is a wildcard
  // (empty collection literals)
  bool same_ish(const TypeRef& a, const TypeRef& b, int depth = 0) {
    if (depth > 32) return false;
    if (!a || !b) return true;
    TypeRef x = resolve(a), y = resolve(b);
    while (x->kind == TypeKind::TypedefAlias) x = resolve(x->elem);
    while (y->kind == TypeKind::TypedefAlias) y = resolve(y->elem);
    if (is_numeric_builtin(x) && is_numeric_builtin(y)) return true;
    if (x->kind != y->kind) {
      // instance domains are id values
      auto idish = [](const TypeRef& t) {
        return t->kind == TypeKind::InstanceOf ||
               (t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Id);
      };
      return idish(x) && idish(y);
    }
    switch (x->kind) {
      case TypeKind::BuiltinT:
        return x->builtin == y->builtin;
      case TypeKind::Enumerated:
        return x->enumerators == y->enumerators;
      case TypeKind::ListOf:
      case TypeKind::SetOf:
        return same_ish(x->elem, y->elem, depth + 1);
      case TypeKind::Structure: {
        if (x->fields.size() != y->fields.size()) return false;
        for (size_t i = 0; i < x->fields.size(); ++i)
          if (x->fields[i].first != y->fields[i].first ||
              !same_ish(x->fields[i].second, y->fields[i].second, depth + 1))
            return false;
        return true;
      }
      case TypeKind::InstanceOf:
        return true;
      case TypeKind::Undefined:
        return x->name == y->name;
      default:
        return false;
    }
  }

  const ProcessLevel* level_of_instance(Sym inst) {
    for (const auto& i : ctx.sys->instances)
      if (i.name == inst) return ctx.sys->find_level(i.process_type);
    return nullptr;
  }

  const ProcessLevel* level_of_qual(const ExprPtr& q) {
    if (q->kind == ExKind::Name && !q->qual && q->args.empty()) {
      for (const auto& b : ctx.bindings)
        if (b.name == q->id) {
          TypeRef t = resolve(b.type ? b.type : TypeRef());
          if (t && t->kind == TypeKind::InstanceOf)
            return ctx.sys->find_level(t->name);
          return nullptr;  // generic id binder
        }
      return level_of_instance(q->id);
    }
    TypeRef qt = infer(q);
    TypeRef r = resolve(qt);
    if (r && r->kind == TypeKind::InstanceOf) return ctx.sys->find_level(r->name);
    if (r && r->kind == TypeKind::BuiltinT && r->builtin == Builtin::Id) return nullptr;
    terr("qualifier is not id-valued", q->loc);
  }

  TypeRef member_type(const ProcessLevel* lvl, const Expr& e) {
    if (!lvl) terr("cannot resolve member " + sym_name(e.id) + " of a generic id", e.loc);
    for (const auto& v : lvl->variables)
      if (v.name == e.id) {
        if (e.args.size() != v.params.size())
          terr("variable " + sym_name(e.id) + " expects " +
                   std::to_string(v.params.size()) + " argument(s)",
               e.loc);
        for (size_t i = 0; i < e.args.size(); ++i) {
          TypeRef at = infer(e.args[i]);
          if (!same_ish(at, v.params[i].type))
            terr("argument type mismatch for " + sym_name(e.id), e.loc);
        }
        return v.type;
      }
    for (const auto& c : lvl->constants)
      if (c.name == e.id) {
        if (e.args.size() != c.params.size())
          terr("constant " + sym_name(e.id) + " arity mismatch", e.loc);
        for (size_t i = 0; i < e.args.size(); ++i) {
          TypeRef at = infer(e.args[i]);
          if (!same_ish(at, c.params[i].type))
            terr("argument type mismatch for " + sym_name(e.id), e.loc);
        }
        return c.type;
      }
    terr("process " + sym_name(lvl->process_type) + " has no member " + sym_name(e.id),
         e.loc);
  }

  TypeRef name_type(const Expr& e) {
    if (e.primed && !ctx.in_exit) terr("primed reference outside an exit", e.loc);
    if (e.qual) return member_type(level_of_qual(e.qual), e);
    for (auto it = ctx.bindings.rbegin(); it != ctx.bindings.rend(); ++it)
      if (it->name == e.id) {
        if (!e.args.empty()) terr("bound variable takes no arguments", e.loc);
        return it->type ? it->type : t_int();
      }
    if (ctx.level) {
      for (const auto& v : ctx.level->variables)
        if (v.name == e.id) return member_type(ctx.level, e);
      for (const auto& c : ctx.level->constants)
        if (c.name == e.id) return member_type(ctx.level, e);
    }
    // enumerators
    auto scan = [&](const std::vector<TypeDecl>& ts) -> TypeRef {
      for (const auto& t : ts) {
        TypeRef d = t.def;
        if (d && d->kind == TypeKind::Enumerated)
          for (Sym c : d->enumerators)
            if (c == e.id) return TypeExpr::named(t.name);
      }
      return nullptr;
    };
    if (ctx.level)
      if (TypeRef t = scan(ctx.level->types)) return t;
    if (TypeRef t = scan(ctx.sys->global_types)) return t;
    for (const auto& l : ctx.sys->levels)
      if (TypeRef t = scan(l.types)) return t;
    for (const auto& c : ctx.sys->global_consts)
      if (c.name == e.id) {
        if (e.args.size() != c.params.size())
          terr("constant " + sym_name(e.id) + " arity mismatch", e.loc);
        for (size_t i = 0; i < e.args.size(); ++i) {
          TypeRef at = infer(e.args[i]);
          if (!same_ish(at, c.params[i].type))
            terr("argument type mismatch for " + sym_name(e.id), e.loc);
        }
        return c.type;
      }
    for (const auto& i : ctx.sys->instances)
      if (i.name == e.id) return TypeExpr::instance_of(i.process_type);
    terr("unresolved name: " + sym_name(e.id), e.loc);
  }

  TypeRef apply_type(const Expr& e) {
    const Ops& o = ops();
    Sym op = e.id;
    auto arg = [&](size_t i) { return infer(e.args[i]); };
    if (op == o.and_ || op == o.or_) {
      for (const auto& a : e.args)
        if (resolve(infer(a))->builtin != Builtin::Boolean)
          terr("boolean connective on non-boolean operand", e.loc);
      return t_bool();
    }
    if (op == o.not_ || op == o.implies || op == o.iff) {
      for (const auto& a : e.args) {
        TypeRef t = resolve(infer(a));
        if (!(t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Boolean))
          terr("boolean operator on non-boolean operand", e.loc);
      }
      return t_bool();
    }
    if (op == o.eq || op == o.ne) {
      if (!same_ish(arg(0), arg(1)))
        terr("incomparable operand types for =", e.loc);
      return t_bool();
    }
    if (op == o.lt || op == o.le || op == o.gt || op == o.ge) {
      if (!numeric(arg(0)) || !numeric(arg(1)))
        terr("ordering on non-numeric operands", e.loc);
      return t_bool();
    }
    if (op == o.add || op == o.sub || op == o.mul || op == o.div_ || op == o.mod) {
      TypeRef a = arg(0), b = arg(1);
      if (!numeric(a) || !numeric(b)) terr("arithmetic on non-numeric operands", e.loc);
      return numeric_join(a, b);
    }
    if (op == o.neg) {
      if (!numeric(arg(0))) terr("negation of a non-numeric operand", e.loc);
      return arg(0);
    }
    if (op == o.union_ || op == o.set_diff) {
      TypeRef a = resolve(arg(0)), b = resolve(arg(1));
      while (a->kind == TypeKind::TypedefAlias) a = resolve(a->elem);
      while (b->kind == TypeKind::TypedefAlias) b = resolve(b->elem);
      if (a->kind != TypeKind::SetOf || b->kind != TypeKind::SetOf)
        terr("set operator on non-set operands", e.loc);
      return a;
    }
    if (op == o.isin || op == o.not_isin) {
      TypeRef b = resolve(arg(1));
      while (b->kind == TypeKind::TypedefAlias) b = resolve(b->elem);
      if (b->kind != TypeKind::SetOf) terr("ISIN requires a set", e.loc);
      if (!same_ish(arg(0), b->elem)) terr("ISIN element type mismatch", e.loc);
      return t_bool();
    }
    if (op == o.contained_in || op == o.subset) {
      TypeRef a = resolve(arg(0)), b = resolve(arg(1));
      while (a->kind == TypeKind::TypedefAlias) a = resolve(a->elem);
      while (b->kind == TypeKind::TypedefAlias) b = resolve(b->elem);
      if (a->kind != TypeKind::SetOf || b->kind != TypeKind::SetOf)
        terr("subset operator on non-set operands", e.loc);
      return t_bool();
    }
    if (op == o.concat) {
      TypeRef a = resolve(arg(0)), b = resolve(arg(1));
      if (a->kind != TypeKind::ListOf || b->kind != TypeKind::ListOf)
        terr("CONCAT on non-list operands", e.loc);
      return a;
    }
    if (op == o.set_size) {
      TypeRef a = resolve(arg(0));
      while (a->kind == TypeKind::TypedefAlias) a = resolve(a->elem);
      if (a->kind != TypeKind::SetOf) terr("set_size of a non-set", e.loc);
      return t_int();
    }
    if (op == o.list_len) {
      if (resolve(arg(0))->kind != TypeKind::ListOf) terr("list_len of a non-list", e.loc);
      return t_int();
    }
    if (op == o.index) {
      TypeRef a = resolve(arg(0));
      if (a->kind == TypeKind::ListOf) {
        if (!numeric(infer(e.args[1]))) terr("list index must be numeric", e.loc);
        return a->elem;
      }
      if (a->kind == TypeKind::Structure) {
        const ExprPtr& f = e.args[1];
        if (f->kind != ExKind::Name) terr("structure index must be a field name", e.loc);
        for (const auto& [fn, ft] : a->fields)
          if (fn == f->id) return ft;
        terr("structure has no field " + sym_name(f->id), e.loc);
      }
      terr("indexing a non-list/non-structure value", e.loc);
    }
    terr("unknown operator " + sym_name(op), e.loc);
  }

  TypeRef infer(const ExprPtr& e) {
    switch (e->kind) {
      case ExKind::Lit:
        if (e->lit.is_bool()) return t_bool();
        if (e->lit.is_int()) return t_int();
        if (e->lit.is_sym()) return TypeExpr::builtin_type(Builtin::Id);
        if (e->lit.is_set()) return TypeExpr::set_of(t_int());
        return TypeExpr::list_of(t_int());
      case ExKind::Now:
        return t_time();
      case ExKind::Name:
        return name_type(*e);
      case ExKind::Past: {
        if (!numeric(infer(e->args[1]))) terr("past-time must be numeric", e->loc);
        return infer(e->args[0]);
      }
      case ExKind::Event: {
        // the subject must be a declared transition (Start/End/Call) or a
        // declared variable (Change) of the subject's process
        const ProcessLevel* lvl = e->qual ? level_of_qual(e->qual) : ctx.level;
        if (lvl) {
          bool found = false;
          if (e->ev == EventKind::Change) {
            for (const auto& v : lvl->variables)
              if (v.name == e->id) found = true;
            if (!found) terr("Change subject is not a declared variable", e->loc);
          } else {
            for (const auto& t : lvl->transitions)
              if (t.name == e->id) {
                found = true;
                if (!e->subj_args.empty() && e->subj_args.size() != t.params.size())
                  terr("event parameter count mismatch", e->loc);
              }
            if (!found) terr("event subject is not a declared transition", e->loc);
          }
        }
        for (const auto& a : e->subj_args) infer(a);
        if (e->time) {
          if (!numeric(infer(e->time))) terr("event time must be numeric", e->loc);
          return t_bool();
        }
        return t_time();
      }
      case ExKind::Apply:
        return apply_type(*e);
      case ExKind::Quantifier: {
        size_t before = ctx.bindings.size();
        for (const auto& b : e->binders) ctx.bindings.push_back(b);
        TypeRef t = resolve(infer(e->args[0]));
        ctx.bindings.resize(before);
        if (!(t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Boolean))
          terr("quantifier body must be boolean", e->loc);
        return t_bool();
      }
      case ExKind::Choose: {
        ctx.bindings.push_back(e->binders[0]);
        TypeRef t = resolve(infer(e->args[0]));
        ctx.bindings.pop_back();
        if (!(t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Boolean))
          terr("choose body must be boolean", e->loc);
        return e->binders[0].type;
      }
      case ExKind::SetDef: {
        ctx.bindings.push_back(e->binders[0]);
        TypeRef t = resolve(infer(e->args[0]));
        ctx.bindings.pop_back();
        if (!(t->kind == TypeKind::BuiltinT && t->builtin == Builtin::Boolean))
          terr("SETDEF body must be boolean", e->loc);
        return TypeExpr::set_of(e->binders[0].type);
      }
      case ExKind::ListDef: {
        if (e->args.empty()) return TypeExpr::list_of(nullptr);
        TypeRef first = infer(e->args[0]);
        for (size_t i = 1; i < e->args.size(); ++i)
          if (!same_ish(first, infer(e->args[i])))
            terr("mixed element types in LISTDEF", e->loc);
        return TypeExpr::list_of(first);
      }
      case ExKind::SetLit: {
        if (e->args.empty()) return TypeExpr::set_of(nullptr);
        TypeRef first = infer(e->args[0]);
        for (size_t i = 1; i < e->args.size(); ++i)
          if (!same_ish(first, infer(e->args[i])))
            terr("mixed element types in set literal", e->loc);
        return TypeExpr::set_of(first);
      }
      case ExKind::StructDef: {
        std::vector<std::pair<Sym, TypeRef>> fs;
        for (size_t i = 0; i < e->args.size(); ++i)
          fs.emplace_back(e->field_names[i], infer(e->args[i]));
        return TypeExpr::structure(std::move(fs));
      }
      case ExKind::IfThenElse: {
        TypeRef c = resolve(infer(e->args[0]));
        if (!(c->kind == TypeKind::BuiltinT && c->builtin == Builtin::Boolean))
          terr("IF condition must be boolean", e->loc);
        TypeRef a = infer(e->args[1]);
        TypeRef b = infer(e->args[2]);
        if (!same_ish(a, b)) terr("IF branches have different types", e->loc);
        return a;
      }
      case ExKind::CaseOf: {
        TypeRef s = infer(e->args[0]);
        TypeRef out;
        for (const auto& arm : e->arms) {
          if (!same_ish(s, infer(arm.match))) terr("CASE key type mismatch", e->loc);
          TypeRef bt = infer(arm.body);
          if (!out) out = bt;
          else if (!same_ish(out, bt)) terr("CASE branches have different types", e->loc);
        }
        return out;
      }
      case ExKind::Becomes: {
        if (!ctx.in_exit) terr("BECOMES outside an exit", e->loc);
        TypeRef v = infer(e->args[0]);
        if (!same_ish(v, infer(e->args[1]))) terr("BECOMES type mismatch", e->loc);
        return t_bool();
      }
      case ExKind::NoChange:
        if (!ctx.in_exit) terr("NOCHANGE outside an exit", e->loc);
        infer(e->args[0]);
        return t_bool();
      case ExKind::ImplOf:
      case ExKind::Impl0Of:
        terr("IMPL outside a mapping right-hand side", e->loc);
    }
    terr("unsupported expression", e->loc);
  }
};

}  // namespace

TypeRef infer_type(const ExprPtr& e, TypeContext& ctx) {
  Inferencer inf{ctx};
  return inf.infer(e);
}

}  // namespace astral
