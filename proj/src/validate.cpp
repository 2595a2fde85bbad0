#include <set>

#include "astral/typecheck.hpp"

namespace astral {

namespace {

struct Validator {
  const SystemSpec& sys;
  DiagnosticList diags;

  void diag(const std::string& code, const std::string& msg, SourceLoc loc = {}) {
    Diagnostic d;
    d.file = sys.source_file;
    d.loc = loc;
    d.code = code;
    d.message = msg;
    diags.push_back(std::move(d));
  }

  // --- type well-formedness -------------------------------------------

  void check_type(const TypeRef& t, const ProcessLevel* scope, SourceLoc loc) {
    if (!t) return;
    switch (t->kind) {
      case TypeKind::Enumerated: {
        if (t->enumerators.empty()) diag("empty-enumeration", "enumerated type has no constants", loc);
        std::set<Sym> seen;
        for (Sym c : t->enumerators)
          if (!seen.insert(c).second)
            diag("duplicate-enumerator", "duplicate enumerator " + sym_name(c), loc);
        break;
      }
      case TypeKind::Structure: {
        std::set<Sym> seen;
        for (const auto& [f, ft] : t->fields) {
          if (!seen.insert(f).second)
            diag("duplicate-field", "duplicate structure field " + sym_name(f), loc);
          check_type(ft, scope, loc);
        }
        break;
      }
      case TypeKind::ListOf:
      case TypeKind::SetOf:
        check_type(t->elem, scope, loc);
        break;
      case TypeKind::TypedefAlias:
        check_type(t->elem, scope, loc);
        break;
      case TypeKind::Named: {
        TypeEnv env = type_env_of(sys, scope);
        if (!env.lookup(t->name) && !env.is_process_type(t->name))
          diag("unresolved-type", "unresolved type name " + sym_name(t->name), loc);
        break;
      }
      default:
        break;
    }
  }

  // --- expression resolution --------------------------------------------

  struct Scope {
    const ProcessLevel* level;
    std::vector<Sym> bound;
    bool in_exit = false;
    const TransitionDecl* trans = nullptr;
  };

  const ProcessLevel* level_of_instance(Sym inst) const {
    for (const auto& i : sys.instances)
      if (i.name == inst) return sys.find_level(i.process_type);
    return nullptr;
  }

  bool is_enumerator(Sym id, const ProcessLevel* level) const {
    auto scan = [&](const std::vector<TypeDecl>& ts) {
      for (const auto& t : ts)
        if (t.def && t.def->kind == TypeKind::Enumerated)
          for (Sym c : t.def->enumerators)
            if (c == id) return true;
      return false;
    };
    if (level && scan(level->types)) return true;
    if (scan(sys.global_types)) return true;
    for (const auto& l : sys.levels)
      if (scan(l.types)) return true;
    return false;
  }

  // Returns the level a qualifier denotes, or null for generic/unknown.
  const ProcessLevel* qual_level(const ExprPtr& q, Scope& sc) {
    if (q->kind == ExKind::Name && !q->qual && q->args.empty()) {
      for (Sym b : sc.bound)
        if (b == q->id) return nullptr;  // bound id variable: generic
      if (const ProcessLevel* l = level_of_instance(q->id)) return l;
      diag("unresolved-name", "unknown instance " + sym_name(q->id), q->loc);
      return nullptr;
    }
    resolve(q, sc);
    return nullptr;
  }

  void resolve_member(const Expr& e, const ProcessLevel* lvl, Scope& sc) {
    if (!lvl) {  // generic qualifier: member existence checked at evaluation
      for (const auto& a : e.args) resolve(a, sc);
      return;
    }
    for (const auto& v : lvl->variables)
      if (v.name == e.id) {
        if (e.args.size() != v.params.size())
          diag("arity", "variable " + sym_name(e.id) + " expects " +
                            std::to_string(v.params.size()) + " argument(s)",
               e.loc);
        for (const auto& a : e.args) resolve(a, sc);
        return;
      }
    for (const auto& c : lvl->constants)
      if (c.name == e.id) {
        for (const auto& a : e.args) resolve(a, sc);
        return;
      }
    diag("unresolved-name",
         "process " + sym_name(lvl->process_type) + " has no member " + sym_name(e.id),
         e.loc);
  }

  void resolve(const ExprPtr& e, Scope& sc) {
    if (!e) return;
    switch (e->kind) {
      case ExKind::Name: {
        if (e->primed && !sc.in_exit)
          diag("primed-outside-exit", "primed reference outside an exit assertion",
               e->loc);
        if (e->qual) {
          const ProcessLevel* lvl = qual_level(e->qual, sc);
          resolve_member(*e, lvl, sc);
          return;
        }
        for (Sym b : sc.bound)
          if (b == e->id) return;
        if (sc.trans)
          for (const auto& p : sc.trans->params)
            if (p.name == e->id) return;
        if (sc.level) {
          for (const auto& v : sc.level->variables)
            if (v.name == e->id) {
              if (e->args.size() != v.params.size())
                diag("arity", "variable " + sym_name(e->id) + " expects " +
                                  std::to_string(v.params.size()) + " argument(s)",
                     e->loc);
              for (const auto& a : e->args) resolve(a, sc);
              return;
            }
          for (const auto& c : sc.level->constants)
            if (c.name == e->id) {
              for (const auto& a : e->args) resolve(a, sc);
              return;
            }
        }
        if (is_enumerator(e->id, sc.level)) return;
        for (const auto& c : sys.global_consts)
          if (c.name == e->id) {
            for (const auto& a : e->args) resolve(a, sc);
            return;
          }
        for (const auto& i : sys.instances)
          if (i.name == e->id) return;
        diag("unresolved-name", "unresolved name " + sym_name(e->id), e->loc);
        return;
      }
      case ExKind::Event: {
        const ProcessLevel* lvl = sc.level;
        if (e->qual) lvl = qual_level(e->qual, sc);
        if (lvl) {
          bool found = false;
          if (e->ev == EventKind::Change) {
            for (const auto& v : lvl->variables)
              if (v.name == e->id) found = true;
            if (!found)
              diag("unresolved-name",
                   "Change subject is not a declared variable: " + sym_name(e->id),
                   e->loc);
          } else {
            for (const auto& t : lvl->transitions)
              if (t.name == e->id) found = true;
            if (!found)
              diag("unresolved-name",
                   "event subject is not a declared transition: " + sym_name(e->id),
                   e->loc);
          }
        }
        for (const auto& a : e->subj_args) resolve(a, sc);
        if (e->time) resolve(e->time, sc);
        return;
      }
      case ExKind::Quantifier:
      case ExKind::Choose:
      case ExKind::SetDef: {
        size_t before = sc.bound.size();
        for (const auto& b : e->binders) {
          check_type(b.type, sc.level, e->loc);
          sc.bound.push_back(b.name);
        }
        resolve(e->args[0], sc);
        sc.bound.resize(before);
        return;
      }
      case ExKind::Becomes:
      case ExKind::NoChange:
        if (!sc.in_exit)
          diag("exit-form-outside-exit",
               e->kind == ExKind::Becomes ? "BECOMES outside an exit assertion"
                                          : "NOCHANGE outside an exit assertion",
               e->loc);
        break;
      case ExKind::ImplOf:
      case ExKind::Impl0Of:
        diag("impl-outside-mapping", "IMPL is only allowed in mapping files", e->loc);
        break;
      default:
        break;
    }
    for_each_child(*e, [&](const ExprPtr& c) { resolve(c, sc); });
  }

  bool has_primed(const ExprPtr& e) {
    if (!e) return false;
    if (e->kind == ExKind::Name && e->primed) return true;
    bool found = false;
    for_each_child(*e, [&](const ExprPtr& c) { found = found || has_primed(c); });
    return found;
  }

  // Attempt to evaluate a duration to a number using declared constant values.
  std::optional<int64_t> duration_value(const ExprPtr& d, const ProcessLevel& level) {
    if (d->kind == ExKind::Lit && d->lit.is_int()) return d->lit.as_int();
    if (d->kind == ExKind::Name && !d->qual && d->args.empty()) {
      for (const auto& c : level.constants)
        if (c.name == d->id && c.value) return duration_value(c.value, level);
      for (const auto& c : sys.global_consts)
        if (c.name == d->id && c.value) return duration_value(c.value, level);
    }
    return std::nullopt;
  }

  void run() {
    // instances resolve to declared process types
    for (const auto& i : sys.instances)
      if (!sys.find_level(i.process_type))
        diag("unknown-process-type", "instance " + sym_name(i.name) +
                                         " names unknown process type " +
                                         sym_name(i.process_type),
             i.loc);
    for (const auto& t : sys.global_types) check_type(t.def, nullptr, t.loc);
    for (const auto& c : sys.global_consts) {
      check_type(c.type, nullptr, c.loc);
      if (c.value) {
        Scope sc{nullptr, {}, false, nullptr};
        for (const auto& p : c.params) sc.bound.push_back(p.name);
        resolve(c.value, sc);
      }
    }

    for (const auto& level : sys.levels) {
      for (const auto& t : level.types) check_type(t.def, &level, t.loc);
      for (const auto& c : level.constants) {
        check_type(c.type, &level, c.loc);
        if (c.value) {
          Scope sc{&level, {}, false, nullptr};
          for (const auto& p : c.params) sc.bound.push_back(p.name);
          resolve(c.value, sc);
        }
      }
      for (const auto& v : level.variables) {
        check_type(v.type, &level, v.loc);
        for (const auto& p : v.params) {
          check_type(p.type, &level, v.loc);
          TypeEnv env = type_env_of(sys, &level);
          TypeRef t = p.type;
          int guard = 0;
          while (t && t->kind == TypeKind::Named && guard++ < 16) {
            if (env.is_process_type(t->name)) {
              t = TypeExpr::instance_of(t->name);
              break;
            }
            t = env.lookup(t->name);
          }
          if (t && (t->kind == TypeKind::BuiltinT &&
                    (t->builtin == Builtin::Integer || t->builtin == Builtin::Real ||
                     t->builtin == Builtin::Time)))
            diag("var-param-domain",
                 "parameterized variable " + sym_name(v.name) +
                     " needs an inherently finite parameter domain",
                 v.loc);
        }
      }
      // exported names are declared
      for (Sym ex : level.exports) {
        bool found = false;
        for (const auto& t : level.transitions)
          if (t.name == ex) found = true;
        for (const auto& v : level.variables)
          if (v.name == ex) found = true;
        if (!found)
          diag("unknown-export",
               "exported name " + sym_name(ex) + " is not declared in this level",
               level.loc);
      }
      // clauses
      Scope sc{&level, {}, false, nullptr};
      resolve(level.initial, sc);
      resolve(level.axiom, sc);
      resolve(level.invariant, sc);
      for (const auto& tr : level.transitions) {
        if (auto d = duration_value(tr.duration, level)) {
          if (*d < 1)
            diag("duration-non-null",
                 "duration of " + sym_name(tr.name) + " must be non-null (got " +
                     std::to_string(*d) + ")",
                 tr.loc);
        }
        Scope entry_sc{&level, {}, false, &tr};
        if (has_primed(tr.entry))
          diag("primed-in-entry",
               "entry of " + sym_name(tr.name) + " contains a primed reference",
               tr.loc);
        resolve(tr.entry, entry_sc);
        resolve(tr.duration, entry_sc);
        Scope exit_sc{&level, {}, true, &tr};
        resolve(tr.exit, exit_sc);
      }
    }
  }
};

}  // namespace

DiagnosticList validate_spec(const SystemSpec& s) {
  Validator v{s};
  v.run();
  return v.diags;
}

}  // namespace astral
