#include "astral/expr.hpp"

#include <algorithm>
#include <sstream>

namespace astral {

const Ops& ops() {
  static const Ops o = [] {
    Ops x;
    x.and_ = intern("&");
    x.or_ = intern("|");
    x.not_ = intern("~");
    x.implies = intern("->");
    x.iff = intern("<->");
    x.eq = intern("=");
    x.ne = intern("~=");
    x.lt = intern("<");
    x.le = intern("<=");
    x.gt = intern(">");
    x.ge = intern(">=");
    x.add = intern("+");
    x.sub = intern("-");
    x.mul = intern("*");
    x.div_ = intern("/");
    x.mod = intern("MOD");
    x.neg = intern("u-");
    x.union_ = intern("UNION");
    x.set_diff = intern("SET_DIFF");
    x.isin = intern("ISIN");
    x.not_isin = intern("~ISIN");
    x.contained_in = intern("CONTAINED_IN");
    x.subset = intern("SUBSET");
    x.concat = intern("CONCAT");
    x.set_size = intern("set_size");
    x.list_len = intern("list_len");
    x.index = intern("[]");
    return x;
  }();
  return o;
}

namespace {

std::shared_ptr<Expr> node(ExKind k, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->loc = loc;
  return e;
}

bool any_choose(const std::vector<ExprPtr>& xs) {
  for (const auto& x : xs)
    if (x && x->contains_choose) return true;
  return false;
}

void seal(const std::shared_ptr<Expr>& e) {
  bool c = e->kind == ExKind::Choose;
  c = c || any_choose(e->args) || any_choose(e->subj_args);
  if (e->qual && e->qual->contains_choose) c = true;
  if (e->time && e->time->contains_choose) c = true;
  for (const auto& a : e->arms) {
    if (a.match && a.match->contains_choose) c = true;
    if (a.body && a.body->contains_choose) c = true;
  }
  e->contains_choose = c;
}

}  // namespace

namespace mk {

ExprPtr lit_int(int64_t v, SourceLoc loc) { return lit(Value::integer(v), loc); }
ExprPtr lit_bool(bool v, SourceLoc loc) { return lit(Value::boolean(v), loc); }

ExprPtr lit(Value v, SourceLoc loc) {
  auto e = node(ExKind::Lit, loc);
  e->lit = std::move(v);
  return e;
}

ExprPtr name(Sym id, SourceLoc loc) { return name(nullptr, id, false, {}, loc); }

ExprPtr name(ExprPtr qual, Sym id, bool primed, std::vector<ExprPtr> args,
             SourceLoc loc) {
  auto e = node(ExKind::Name, loc);
  e->qual = std::move(qual);
  e->id = id;
  e->primed = primed;
  e->args = std::move(args);
  seal(e);
  return e;
}

ExprPtr now(SourceLoc loc) { return node(ExKind::Now, loc); }

ExprPtr past(ExprPtr x, ExprPtr t, SourceLoc loc) {
  auto e = node(ExKind::Past, loc);
  e->args = {std::move(x), std::move(t)};
  seal(e);
  return e;
}

ExprPtr event(ExprPtr qual, EventKind k, Sym subject, std::vector<ExprPtr> subj_args,
              ExprPtr time, SourceLoc loc) {
  auto e = node(ExKind::Event, loc);
  e->qual = std::move(qual);
  e->ev = k;
  e->id = subject;
  e->subj_args = std::move(subj_args);
  e->time = std::move(time);
  seal(e);
  return e;
}

ExprPtr apply(Sym op, std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = node(ExKind::Apply, loc);
  e->id = op;
  e->args = std::move(args);
  seal(e);
  return e;
}

ExprPtr quant(bool is_forall, std::vector<Binder> bs, ExprPtr body, SourceLoc loc) {
  auto e = node(ExKind::Quantifier, loc);
  e->is_forall = is_forall;
  e->binders = std::move(bs);
  e->args = {std::move(body)};
  seal(e);
  return e;
}

ExprPtr choose(Binder b, ExprPtr body, SourceLoc loc) {
  auto e = node(ExKind::Choose, loc);
  e->binders = {std::move(b)};
  e->args = {std::move(body)};
  seal(e);
  return e;
}

ExprPtr set_def(Binder b, ExprPtr body, SourceLoc loc) {
  auto e = node(ExKind::SetDef, loc);
  e->binders = {std::move(b)};
  e->args = {std::move(body)};
  seal(e);
  return e;
}

ExprPtr list_def(std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = node(ExKind::ListDef, loc);
  e->args = std::move(args);
  seal(e);
  return e;
}

ExprPtr set_lit(std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = node(ExKind::SetLit, loc);
  e->args = std::move(args);
  seal(e);
  return e;
}

ExprPtr struct_def(std::vector<Sym> fields, std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = node(ExKind::StructDef, loc);
  e->field_names = std::move(fields);
  e->args = std::move(args);
  seal(e);
  return e;
}

ExprPtr if_then_else(ExprPtr c, ExprPtr t, ExprPtr f, SourceLoc loc) {
  auto e = node(ExKind::IfThenElse, loc);
  e->args = {std::move(c), std::move(t), std::move(f)};
  seal(e);
  return e;
}

ExprPtr case_of(ExprPtr scrutinee, std::vector<CaseArm> arms, SourceLoc loc) {
  auto e = node(ExKind::CaseOf, loc);
  e->args = {std::move(scrutinee)};
  e->arms = std::move(arms);
  seal(e);
  return e;
}

ExprPtr becomes(ExprPtr lhs, ExprPtr rhs, SourceLoc loc) {
  auto e = node(ExKind::Becomes, loc);
  e->args = {std::move(lhs), std::move(rhs)};
  seal(e);
  return e;
}

ExprPtr no_change(ExprPtr lhs, SourceLoc loc) {
  auto e = node(ExKind::NoChange, loc);
  e->args = {std::move(lhs)};
  seal(e);
  return e;
}

ExprPtr impl_of(ExprPtr x, SourceLoc loc) {
  auto e = node(ExKind::ImplOf, loc);
  e->args = {std::move(x)};
  seal(e);
  return e;
}

ExprPtr impl0_of(ExprPtr x, SourceLoc loc) {
  auto e = node(ExKind::Impl0Of, loc);
  e->args = {std::move(x)};
  seal(e);
  return e;
}

ExprPtr conj(std::vector<ExprPtr> xs) {
  std::vector<ExprPtr> out;
  for (auto& x : xs) {
    if (x->kind == ExKind::Lit && x->lit.is_bool()) {
      if (!x->lit.as_bool()) return lit_bool(false);
      continue;  // drop TRUE
    }
    if (x->kind == ExKind::Apply && x->id == ops().and_) {
      for (auto& c : x->args) out.push_back(c);
    } else {
      out.push_back(std::move(x));
    }
  }
  if (out.empty()) return lit_bool(true);
  if (out.size() == 1) return out[0];
  return apply(ops().and_, std::move(out));
}

ExprPtr disj(std::vector<ExprPtr> xs) {
  std::vector<ExprPtr> out;
  for (auto& x : xs) {
    if (x->kind == ExKind::Lit && x->lit.is_bool()) {
      if (x->lit.as_bool()) return lit_bool(true);
      continue;  // drop FALSE
    }
    if (x->kind == ExKind::Apply && x->id == ops().or_) {
      for (auto& c : x->args) out.push_back(c);
    } else {
      out.push_back(std::move(x));
    }
  }
  if (out.empty()) return lit_bool(false);
  if (out.size() == 1) return out[0];
  return apply(ops().or_, std::move(out));
}

ExprPtr implies(ExprPtr a, ExprPtr b) { return apply(ops().implies, {std::move(a), std::move(b)}); }
ExprPtr negate(ExprPtr a) { return apply(ops().not_, {std::move(a)}); }
ExprPtr eq(ExprPtr a, ExprPtr b) { return apply(ops().eq, {std::move(a), std::move(b)}); }

}  // namespace mk

void for_each_child(const Expr& e, const std::function<void(const ExprPtr&)>& f) {
  if (e.qual) f(e.qual);
  for (const auto& a : e.args) f(a);
  for (const auto& a : e.subj_args) f(a);
  if (e.time) f(e.time);
  for (const auto& arm : e.arms) {
    f(arm.match);
    f(arm.body);
  }
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExKind::Lit:
      if (a->lit != b->lit) return false;
      break;
    case ExKind::Name:
      if (a->id != b->id || a->primed != b->primed) return false;
      break;
    case ExKind::Event:
      if (a->ev != b->ev || a->id != b->id) return false;
      if ((a->time == nullptr) != (b->time == nullptr)) return false;
      break;
    case ExKind::Apply:
      if (a->id != b->id) return false;
      break;
    case ExKind::Quantifier:
      if (a->is_forall != b->is_forall) return false;
      [[fallthrough]];
    case ExKind::Choose:
    case ExKind::SetDef: {
      if (a->binders.size() != b->binders.size()) return false;
      for (size_t i = 0; i < a->binders.size(); ++i) {
        if (a->binders[i].name != b->binders[i].name) return false;
        if (!type_equal(a->binders[i].type, b->binders[i].type)) return false;
      }
      break;
    }
    case ExKind::StructDef:
      if (a->field_names != b->field_names) return false;
      break;
    default:
      break;
  }
  if (a->args.size() != b->args.size()) return false;
  if (a->subj_args.size() != b->subj_args.size()) return false;
  if (a->arms.size() != b->arms.size()) return false;
  if ((a->qual == nullptr) != (b->qual == nullptr)) return false;
  if (a->qual && !expr_equal(a->qual, b->qual)) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!expr_equal(a->args[i], b->args[i])) return false;
  for (size_t i = 0; i < a->subj_args.size(); ++i)
    if (!expr_equal(a->subj_args[i], b->subj_args[i])) return false;
  if (a->time && b->time && !expr_equal(a->time, b->time)) return false;
  if ((a->time == nullptr) != (b->time == nullptr)) return false;
  for (size_t i = 0; i < a->arms.size(); ++i) {
    if (!expr_equal(a->arms[i].match, b->arms[i].match)) return false;
    if (!expr_equal(a->arms[i].body, b->arms[i].body)) return false;
  }
  return true;
}

namespace {

struct AlphaCtx {
  std::vector<std::pair<Sym, Sym>> pairs;  // a-name -> b-name

  bool bound_a(Sym s) const {
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it)
      if (it->first == s) return true;
    return false;
  }
  bool bound_b(Sym s) const {
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it)
      if (it->second == s) return true;
    return false;
  }
  bool matches(Sym sa, Sym sb) const {
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
      if (it->first == sa) return it->second == sb;
      if (it->second == sb) return false;  // sb bound to a different a-name
    }
    return false;
  }
};

bool alpha_rec(const ExprPtr& a, const ExprPtr& b, AlphaCtx& ctx) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExKind::Lit:
      return a->lit == b->lit;
    case ExKind::Name: {
      if (a->primed != b->primed) return false;
      bool ba = !a->qual && a->args.empty() && ctx.bound_a(a->id);
      bool bb = !b->qual && b->args.empty() && ctx.bound_b(b->id);
      if (ba != bb) return false;
      if (ba) {
        if (!ctx.matches(a->id, b->id)) return false;
      } else if (a->id != b->id) {
        return false;
      }
      break;
    }
    case ExKind::Event:
      if (a->ev != b->ev || a->id != b->id) return false;
      break;
    case ExKind::Apply:
      if (a->id != b->id) return false;
      break;
    case ExKind::StructDef:
      if (a->field_names != b->field_names) return false;
      break;
    case ExKind::Quantifier:
      if (a->is_forall != b->is_forall) return false;
      break;
    default:
      break;
  }

  if (a->kind == ExKind::Quantifier || a->kind == ExKind::Choose ||
      a->kind == ExKind::SetDef) {
    if (a->binders.size() != b->binders.size()) return false;
    size_t n = a->binders.size();
    for (size_t i = 0; i < n; ++i)
      if (!type_equal(a->binders[i].type, b->binders[i].type)) return false;
    for (size_t i = 0; i < n; ++i)
      ctx.pairs.emplace_back(a->binders[i].name, b->binders[i].name);
    bool ok = alpha_rec(a->args[0], b->args[0], ctx);
    ctx.pairs.resize(ctx.pairs.size() - n);
    return ok;
  }

  if ((a->qual == nullptr) != (b->qual == nullptr)) return false;
  if (a->qual && !alpha_rec(a->qual, b->qual, ctx)) return false;
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!alpha_rec(a->args[i], b->args[i], ctx)) return false;
  if (a->subj_args.size() != b->subj_args.size()) return false;
  for (size_t i = 0; i < a->subj_args.size(); ++i)
    if (!alpha_rec(a->subj_args[i], b->subj_args[i], ctx)) return false;
  if ((a->time == nullptr) != (b->time == nullptr)) return false;
  if (a->time && !alpha_rec(a->time, b->time, ctx)) return false;
  if (a->arms.size() != b->arms.size()) return false;
  for (size_t i = 0; i < a->arms.size(); ++i) {
    if (!alpha_rec(a->arms[i].match, b->arms[i].match, ctx)) return false;
    if (!alpha_rec(a->arms[i].body, b->arms[i].body, ctx)) return false;
  }
  return true;
}

}  // namespace

bool alpha_equal(const ExprPtr& a, const ExprPtr& b) {
  AlphaCtx ctx;
  return alpha_rec(a, b, ctx);
}

namespace {
void free_names_rec(const ExprPtr& e, std::vector<Sym>& bound, std::vector<Sym>& out) {
  if (!e) return;
  if (e->kind == ExKind::Name && !e->qual && e->args.empty()) {
    if (std::find(bound.begin(), bound.end(), e->id) == bound.end())
      out.push_back(e->id);
  }
  if (e->kind == ExKind::Quantifier || e->kind == ExKind::Choose ||
      e->kind == ExKind::SetDef) {
    size_t before = bound.size();
    for (const auto& b : e->binders) bound.push_back(b.name);
    free_names_rec(e->args[0], bound, out);
    bound.resize(before);
    return;
  }
  for_each_child(*e, [&](const ExprPtr& c) { free_names_rec(c, bound, out); });
}
}  // namespace

void collect_free_names(const ExprPtr& e, std::vector<Sym>& out) {
  std::vector<Sym> bound;
  free_names_rec(e, bound, out);
}

bool name_free_in(const ExprPtr& e, Sym id) {
  std::vector<Sym> names;
  collect_free_names(e, names);
  return std::find(names.begin(), names.end(), id) != names.end();
}

namespace {

using Subst = std::vector<std::pair<Sym, ExprPtr>>;

Sym fresh_name(Sym base, const std::function<bool(Sym)>& collides) {
  for (int i = 1;; ++i) {
    Sym cand = intern(sym_name(base) + "_" + std::to_string(i));
    if (!collides(cand)) return cand;
  }
}

ExprPtr subst_rec(const ExprPtr& e, const Subst& subst);

ExprPtr clone_with(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& f) {
  auto out = std::make_shared<Expr>(*e);
  if (out->qual) out->qual = f(out->qual);
  for (auto& a : out->args) a = f(a);
  for (auto& a : out->subj_args) a = f(a);
  if (out->time) out->time = f(out->time);
  for (auto& arm : out->arms) arm.body = f(arm.body);  // matches are patterns
  seal(out);
  return out;
}

ExprPtr subst_rec(const ExprPtr& e, const Subst& subst) {
  if (!e || subst.empty()) return e;
  if (e->kind == ExKind::Name && !e->qual && e->args.empty() && !e->primed) {
    for (const auto& [from, to] : subst)
      if (from == e->id) return to;
    return e;
  }
  if (e->kind == ExKind::Quantifier || e->kind == ExKind::Choose ||
      e->kind == ExKind::SetDef) {
    // Drop shadowed entries; freshen binders that would capture.
    Subst inner;
    for (const auto& p : subst) {
      bool shadowed = false;
      for (const auto& b : e->binders)
        if (b.name == p.first) shadowed = true;
      if (!shadowed) inner.push_back(p);
    }
    auto out = std::make_shared<Expr>(*e);
    ExprPtr body = e->args[0];
    for (auto& b : out->binders) {
      bool captures = false;
      for (const auto& p : inner)
        if (name_free_in(p.second, b.name)) captures = true;
      if (captures) {
        Sym nb = fresh_name(b.name, [&](Sym cand) {
          if (name_free_in(body, cand)) return true;
          for (const auto& p : inner)
            if (name_free_in(p.second, cand)) return true;
          return false;
        });
        Subst rename{{b.name, mk::name(nb)}};
        body = subst_rec(body, rename);
        b.name = nb;
      }
    }
    out->args[0] = subst_rec(body, inner);
    seal(out);
    return out;
  }
  return clone_with(e, [&](const ExprPtr& c) { return subst_rec(c, subst); });
}

}  // namespace

ExprPtr substitute_names(const ExprPtr& e, const Subst& subst) {
  return subst_rec(e, subst);
}

ExprPtr substitute_now(const ExprPtr& e, const ExprPtr& t) {
  if (!e) return e;
  if (e->kind == ExKind::Now) return t;
  // past re-anchors: the inner expression's `now` is the past time, so only
  // the time argument is rewritten here.
  if (e->kind == ExKind::Past) {
    auto out = std::make_shared<Expr>(*e);
    out->args[1] = substitute_now(e->args[1], t);
    seal(out);
    return out;
  }
  return clone_with(e, [&](const ExprPtr& c) { return substitute_now(c, t); });
}

ExprPtr flatten_connectives(const ExprPtr& e) {
  if (!e) return e;
  ExprPtr walked = clone_with(e, [](const ExprPtr& c) { return flatten_connectives(c); });
  if (walked->kind == ExKind::Apply) {
    if (walked->id == ops().and_) return mk::conj(walked->args);
    if (walked->id == ops().or_) return mk::disj(walked->args);
  }
  return walked;
}

namespace {

// Bound variables are rigid; anchoring them in a past() wrapper would only
// add noise, so they stay bare.
ExprPtr push_past(const ExprPtr& e, const ExprPtr& anchor, std::vector<Sym>& bound) {
  if (!e) return e;
  switch (e->kind) {
    case ExKind::Lit:
      return e;
    case ExKind::Now:
      return anchor ? anchor : e;
    case ExKind::Past: {
      ExprPtr t = push_past(e->args[1], anchor, bound);
      return push_past(e->args[0], t, bound);
    }
    case ExKind::Name: {
      // The wrapper's anchor re-points `now` for everything inside the atom,
      // so the internals only need the substitution, not their own wrappers.
      auto out = std::make_shared<Expr>(*e);
      if (out->qual)
        out->qual = anchor ? substitute_now(out->qual, anchor)
                           : push_past(out->qual, nullptr, bound);
      for (auto& a : out->args)
        a = anchor ? substitute_now(a, anchor) : push_past(a, nullptr, bound);
      seal(out);
      if (!anchor) return out;
      if (!e->qual && e->args.empty() &&
          std::find(bound.begin(), bound.end(), e->id) != bound.end())
        return out;
      return mk::past(out, anchor, e->loc);
    }
    case ExKind::Event: {
      auto out = std::make_shared<Expr>(*e);
      if (out->qual)
        out->qual = anchor ? substitute_now(out->qual, anchor)
                           : push_past(out->qual, nullptr, bound);
      for (auto& a : out->subj_args)
        a = anchor ? substitute_now(a, anchor) : push_past(a, nullptr, bound);
      if (out->time)
        out->time = anchor ? substitute_now(out->time, anchor)
                           : push_past(out->time, nullptr, bound);
      seal(out);
      if (!anchor) return out;
      return mk::past(out, anchor, e->loc);
    }
    case ExKind::Quantifier:
    case ExKind::Choose:
    case ExKind::SetDef: {
      auto out = std::make_shared<Expr>(*e);
      size_t before = bound.size();
      for (const auto& b : e->binders) bound.push_back(b.name);
      out->args[0] = push_past(e->args[0], anchor, bound);
      bound.resize(before);
      seal(out);
      return out;
    }
    default:
      return clone_with(e,
                        [&](const ExprPtr& c) { return push_past(c, anchor, bound); });
  }
}

}  // namespace

ExprPtr normalize_past(const ExprPtr& e) {
  std::vector<Sym> bound;
  return push_past(e, nullptr, bound);
}

// --- rendering -------------------------------------------------------------

namespace {

// Higher binds tighter.
int op_prec(Sym op) {
  const Ops& o = ops();
  if (op == o.iff) return 1;
  if (op == o.implies) return 2;
  if (op == o.or_) return 3;
  if (op == o.and_) return 4;
  if (op == o.eq || op == o.ne || op == o.lt || op == o.le || op == o.gt ||
      op == o.ge || op == o.isin || op == o.not_isin || op == o.contained_in ||
      op == o.subset)
    return 5;
  if (op == o.add || op == o.sub || op == o.union_ || op == o.set_diff ||
      op == o.concat)
    return 6;
  if (op == o.mul || op == o.div_ || op == o.mod) return 7;
  if (op == o.not_ || op == o.neg) return 8;
  return 9;
}

void render_rec(const ExprPtr& e, int min_prec, std::string& out);

void render_binders(const std::vector<Binder>& bs, std::string& out) {
  // Group consecutive binders of equal type: "a, b: integer".
  for (size_t i = 0; i < bs.size(); ++i) {
    if (i) out += ", ";
    out += sym_name(bs[i].name);
    bool last_of_group =
        i + 1 >= bs.size() || !type_equal(bs[i].type, bs[i + 1].type);
    if (last_of_group) {
      out += ": ";
      out += render_type(bs[i].type);
    }
  }
}

void render_args(const std::vector<ExprPtr>& args, std::string& out) {
  out += "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    render_rec(args[i], 0, out);
  }
  out += ")";
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::Start: return "Start";
    case EventKind::End: return "End";
    case EventKind::Call: return "Call";
    case EventKind::Change: return "Change";
  }
  return "?";
}

void render_rec(const ExprPtr& e, int min_prec, std::string& out) {
  if (!e) {
    out += "<null>";
    return;
  }
  switch (e->kind) {
    case ExKind::Lit:
      out += render_value(e->lit);
      return;
    case ExKind::Now:
      out += "now";
      return;
    case ExKind::Name: {
      if (e->qual) {
        render_rec(e->qual, 9, out);
        out += ".";
      }
      out += sym_name(e->id);
      if (e->primed) out += "'";
      if (!e->args.empty()) render_args(e->args, out);
      return;
    }
    case ExKind::Past:
      out += "past(";
      render_rec(e->args[0], 0, out);
      out += ", ";
      render_rec(e->args[1], 0, out);
      out += ")";
      return;
    case ExKind::Event: {
      if (e->qual) {
        render_rec(e->qual, 9, out);
        out += ".";
      }
      out += event_name(e->ev);
      out += "(";
      out += sym_name(e->id);
      if (!e->subj_args.empty()) render_args(e->subj_args, out);
      if (e->time) {
        out += ", ";
        render_rec(e->time, 0, out);
      }
      out += ")";
      return;
    }
    case ExKind::Apply: {
      const Ops& o = ops();
      Sym op = e->id;
      if (op == o.set_size || op == o.list_len) {
        out += sym_name(op);
        render_args(e->args, out);
        return;
      }
      if (op == o.index) {
        render_rec(e->args[0], 9, out);
        out += "[";
        render_rec(e->args[1], 0, out);
        out += "]";
        return;
      }
      if (op == o.not_ || op == o.neg) {
        int p = 8;
        bool paren = p < min_prec;
        if (paren) out += "(";
        out += (op == o.not_ ? "~" : "-");
        render_rec(e->args[0], p, out);
        if (paren) out += ")";
        return;
      }
      int p = op_prec(op);
      bool paren = p < min_prec;
      if (paren) out += "(";
      if (op == o.and_ || op == o.or_) {
        for (size_t i = 0; i < e->args.size(); ++i) {
          if (i) {
            out += " ";
            out += sym_name(op);
            out += " ";
          }
          render_rec(e->args[i], p + 1, out);
        }
      } else if (op == o.implies) {
        render_rec(e->args[0], p + 1, out);
        out += " -> ";
        render_rec(e->args[1], p, out);  // right associative
      } else {
        render_rec(e->args[0], p + (op == o.iff ? 1 : 0), out);
        out += " ";
        out += sym_name(op);
        out += " ";
        render_rec(e->args[1], p + 1, out);
      }
      if (paren) out += ")";
      return;
    }
    case ExKind::Quantifier: {
      bool paren = min_prec > 0;
      if (paren) out += "(";
      out += e->is_forall ? "FORALL " : "EXISTS ";
      render_binders(e->binders, out);
      out += " (";
      render_rec(e->args[0], 0, out);
      out += ")";
      if (paren) out += ")";
      return;
    }
    case ExKind::Choose:
    case ExKind::SetDef: {
      bool paren = min_prec > 0 && e->kind == ExKind::Choose;
      if (paren) out += "(";
      out += e->kind == ExKind::Choose ? "choose " : "SETDEF ";
      render_binders(e->binders, out);
      out += " (";
      render_rec(e->args[0], 0, out);
      out += ")";
      if (paren) out += ")";
      return;
    }
    case ExKind::ListDef:
      out += "LISTDEF";
      render_args(e->args, out);
      return;
    case ExKind::SetLit: {
      out += "{";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) out += ", ";
        render_rec(e->args[i], 0, out);
      }
      out += "}";
      return;
    }
    case ExKind::StructDef: {
      out += "STRUCTDEF(";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) out += ", ";
        out += sym_name(e->field_names[i]);
        out += ": ";
        render_rec(e->args[i], 0, out);
      }
      out += ")";
      return;
    }
    case ExKind::IfThenElse:
      out += "IF ";
      render_rec(e->args[0], 0, out);
      out += " THEN ";
      render_rec(e->args[1], 0, out);
      out += " ELSE ";
      render_rec(e->args[2], 0, out);
      out += " FI";
      return;
    case ExKind::CaseOf: {
      out += "CASE ";
      render_rec(e->args[0], 0, out);
      out += " OF ";
      for (const auto& arm : e->arms) {
        render_rec(arm.match, 9, out);
        out += ": ";
        render_rec(arm.body, 0, out);
        out += " ";
      }
      out += "ESAC";
      return;
    }
    case ExKind::Becomes: {
      int p = 5;
      bool paren = p < min_prec;
      if (paren) out += "(";
      render_rec(e->args[0], p + 1, out);
      out += " BECOMES ";
      render_rec(e->args[1], p + 1, out);
      if (paren) out += ")";
      return;
    }
    case ExKind::NoChange:
      out += "NOCHANGE(";
      render_rec(e->args[0], 0, out);
      out += ")";
      return;
    case ExKind::ImplOf:
      out += "IMPL(";
      render_rec(e->args[0], 0, out);
      out += ")";
      return;
    case ExKind::Impl0Of:
      out += "IMPL_0(";
      render_rec(e->args[0], 0, out);
      out += ")";
      return;
  }
}

void pretty_rec(const ExprPtr& e, int indent, std::string& out) {
  const Ops& o = ops();
  std::string pad(static_cast<size_t>(indent) * 2, ' ');
  // Break only on the outer boolean skeleton; atoms render inline.
  if (e && e->kind == ExKind::Apply &&
      (e->id == o.and_ || e->id == o.or_ || e->id == o.implies || e->id == o.iff)) {
    out += pad + "( ";
    std::string joiner = sym_name(e->id);
    for (size_t i = 0; i < e->args.size(); ++i) {
      if (i) out += pad + joiner + " ";
      std::string inner;
      pretty_rec(e->args[i], indent + 1, inner);
      // Inline the child if it fit on one line.
      size_t first_nl = inner.find('\n');
      if (first_nl == inner.size() - 1) {
        std::string trimmed = inner.substr(0, first_nl);
        size_t start = trimmed.find_first_not_of(' ');
        out += (i ? "" : "") + trimmed.substr(start) + "\n";
      } else {
        if (i == 0) out += "\n";
        out += inner;
      }
    }
    out += pad + ")\n";
    return;
  }
  if (e && e->kind == ExKind::Quantifier) {
    out += pad + (e->is_forall ? "FORALL " : "EXISTS ");
    std::string bs;
    render_binders(e->binders, bs);
    out += bs + "\n";
    pretty_rec(e->args[0], indent + 1, out);
    return;
  }
  out += pad + render_expr(e) + "\n";
}

}  // namespace

std::string render_expr(const ExprPtr& e) {
  std::string out;
  render_rec(e, 0, out);
  return out;
}

std::string render_expr_pretty(const ExprPtr& e, int indent) {
  std::string out;
  pretty_rec(e, indent, out);
  return out;
}

}  // namespace astral
