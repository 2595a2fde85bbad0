#include "astral/parser.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "astral/lexer.hpp"

namespace astral {

namespace {

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;
  std::string file;

  explicit Parser(std::string_view text, std::string f)
      : toks(lex(text, f)), file(std::move(f)) {}

  const Token& peek(size_t ahead = 0) const {
    size_t k = pos + ahead;
    return k < toks.size() ? toks[k] : toks.back();
  }
  const Token& cur() const { return peek(0); }
  bool at_kw(Kw k) const { return cur().tok == Tok::Kw && cur().kw == k; }
  bool at_punct(Punct p) const { return cur().tok == Tok::Punct && cur().punct == p; }
  bool at_ident() const { return cur().tok == Tok::Ident; }

  [[noreturn]] void fail(const std::string& expected) const {
    std::ostringstream os;
    os << "syntax error";
    if (!file.empty()) os << " in " << file;
    os << " at " << cur().loc.line << ":" << cur().loc.col << ": expected "
       << expected << ", found ";
    if (cur().tok == Tok::Eof)
      os << "end of input";
    else
      os << "'" << cur().text << "'";
    throw AstralError(os.str(), cur().loc);
  }

  Token take() { return toks[pos < toks.size() - 1 ? pos++ : pos]; }
  void expect_punct(Punct p) {
    if (!at_punct(p)) fail(std::string("'") + punct_spelling(p) + "'");
    take();
  }
  void expect_kw(Kw k) {
    if (!at_kw(k)) fail(std::string("'") + kw_spelling(k) + "'");
    take();
  }
  Sym expect_ident(const char* what) {
    if (!at_ident()) fail(what);
    return take().ident;
  }

  // ---- types ----

  TypeRef parse_type() {
    SourceLoc loc = cur().loc;
    if (cur().tok == Tok::Kw) {
      switch (cur().kw) {
        case Kw::Integer: take(); return TypeExpr::builtin_type(Builtin::Integer);
        case Kw::Real: take(); return TypeExpr::builtin_type(Builtin::Real);
        case Kw::Boolean: take(); return TypeExpr::builtin_type(Builtin::Boolean);
        case Kw::Time: take(); return TypeExpr::builtin_type(Builtin::Time);
        case Kw::Id: take(); return TypeExpr::builtin_type(Builtin::Id);
        case Kw::List: {
          take();
          expect_kw(Kw::Of);
          return TypeExpr::list_of(parse_type());
        }
        case Kw::Set: {
          take();
          expect_kw(Kw::Of);
          return TypeExpr::set_of(parse_type());
        }
        case Kw::Structure: {
          take();
          expect_kw(Kw::Of);
          expect_punct(Punct::LParen);
          std::vector<std::pair<Sym, TypeRef>> fields;
          while (true) {
            std::vector<Sym> group;
            group.push_back(expect_ident("field name"));
            while (at_punct(Punct::Comma)) {
              take();
              group.push_back(expect_ident("field name"));
            }
            expect_punct(Punct::Colon);
            TypeRef t = parse_type();
            for (Sym g : group) fields.emplace_back(g, t);
            if (at_punct(Punct::Comma)) {
              take();
              continue;
            }
            break;
          }
          expect_punct(Punct::RParen);
          return TypeExpr::structure(std::move(fields));
        }
        case Kw::Typedef: {
          take();
          Sym var = expect_ident("typedef variable");
          expect_punct(Punct::Colon);
          TypeRef base = parse_type();
          expect_punct(Punct::LParen);
          ExprPtr pred = parse_expr();
          expect_punct(Punct::RParen);
          return TypeExpr::typedef_alias(var, base, pred);
        }
        default:
          fail("a type");
      }
    }
    if (at_ident()) return TypeExpr::named(take().ident);
    if (at_punct(Punct::LParen)) {
      take();
      std::vector<Sym> cs;
      cs.push_back(expect_ident("enumerator"));
      while (at_punct(Punct::Comma)) {
        take();
        cs.push_back(expect_ident("enumerator"));
      }
      expect_punct(Punct::RParen);
      std::set<Sym> uniq(cs.begin(), cs.end());
      if (uniq.size() != cs.size())
        throw AstralError("duplicate enumerator in enumerated type", loc);
      return TypeExpr::enumerated(std::move(cs));
    }
    fail("a type");
  }

  // Binder groups: a, b: T1, c: T2
  std::vector<Binder> parse_binders() {
    std::vector<Binder> out;
    while (true) {
      std::vector<Sym> group;
      group.push_back(expect_ident("binder name"));
      while (at_punct(Punct::Comma)) {
        take();
        if (!at_ident()) fail("binder name");
        group.push_back(take().ident);
        if (at_punct(Punct::Colon)) break;
        if (!at_punct(Punct::Comma)) fail("',' or ':'");
      }
      expect_punct(Punct::Colon);
      TypeRef t = parse_type();
      for (Sym g : group) out.push_back({g, t});
      if (at_punct(Punct::Comma)) {
        take();
        continue;
      }
      break;
    }
    return out;
  }

  // ---- expressions (precedence climbing) ----

  ExprPtr parse_expr() { return parse_iff(); }

  ExprPtr parse_iff() {
    ExprPtr l = parse_implies();
    while (at_punct(Punct::Iff)) {
      SourceLoc loc = take().loc;
      ExprPtr r = parse_implies();
      l = mk::apply(ops().iff, {l, r}, loc);
    }
    return l;
  }

  ExprPtr parse_implies() {
    ExprPtr l = parse_or();
    if (at_punct(Punct::Arrow)) {
      SourceLoc loc = take().loc;
      ExprPtr r = parse_implies();  // right associative
      return mk::apply(ops().implies, {l, r}, loc);
    }
    return l;
  }

  ExprPtr parse_or() {
    ExprPtr l = parse_and();
    if (!at_punct(Punct::Pipe)) return l;
    std::vector<ExprPtr> xs{l};
    SourceLoc loc = cur().loc;
    while (at_punct(Punct::Pipe)) {
      take();
      xs.push_back(parse_and());
    }
    return mk::apply(ops().or_, std::move(xs), loc);
  }

  ExprPtr parse_and() {
    ExprPtr l = parse_cmp();
    if (!at_punct(Punct::Amp)) return l;
    std::vector<ExprPtr> xs{l};
    SourceLoc loc = cur().loc;
    while (at_punct(Punct::Amp)) {
      take();
      xs.push_back(parse_cmp());
    }
    return mk::apply(ops().and_, std::move(xs), loc);
  }

  ExprPtr parse_cmp() {
    ExprPtr l = parse_add();
    const Ops& o = ops();
    Sym op = 0;
    if (at_punct(Punct::Eq)) op = o.eq;
    else if (at_punct(Punct::Neq)) op = o.ne;
    else if (at_punct(Punct::Lt)) op = o.lt;
    else if (at_punct(Punct::Le)) op = o.le;
    else if (at_punct(Punct::Gt)) op = o.gt;
    else if (at_punct(Punct::Ge)) op = o.ge;
    else if (at_kw(Kw::Isin)) op = o.isin;
    else if (at_kw(Kw::ContainedIn)) op = o.contained_in;
    else if (at_kw(Kw::Subset)) op = o.subset;
    else if (at_punct(Punct::TildeNot) && peek(1).tok == Tok::Kw && peek(1).kw == Kw::Isin) {
      SourceLoc loc = take().loc;  // '~'
      take();                      // ISIN
      ExprPtr r = parse_add();
      return mk::apply(o.not_isin, {l, r}, loc);
    } else if (at_kw(Kw::Becomes)) {
      SourceLoc loc = take().loc;
      ExprPtr r = parse_add();
      return mk::becomes(l, r, loc);
    }
    if (!op) return l;
    SourceLoc loc = take().loc;
    ExprPtr r = parse_add();
    return mk::apply(op, {l, r}, loc);
  }

  ExprPtr parse_add() {
    ExprPtr l = parse_mul();
    const Ops& o = ops();
    while (true) {
      Sym op = 0;
      if (at_punct(Punct::Plus)) op = o.add;
      else if (at_punct(Punct::Minus)) op = o.sub;
      else if (at_kw(Kw::Union)) op = o.union_;
      else if (at_kw(Kw::SetDiff)) op = o.set_diff;
      else if (at_kw(Kw::Concat)) op = o.concat;
      if (!op) return l;
      SourceLoc loc = take().loc;
      ExprPtr r = parse_mul();
      l = mk::apply(op, {l, r}, loc);
    }
  }

  ExprPtr parse_mul() {
    ExprPtr l = parse_unary();
    const Ops& o = ops();
    while (true) {
      Sym op = 0;
      if (at_punct(Punct::Star)) op = o.mul;
      else if (at_punct(Punct::Slash)) op = o.div_;
      else if (at_kw(Kw::Mod)) op = o.mod;
      if (!op) return l;
      SourceLoc loc = take().loc;
      ExprPtr r = parse_unary();
      l = mk::apply(op, {l, r}, loc);
    }
  }

  ExprPtr parse_unary() {
    if (at_punct(Punct::TildeNot)) {
      SourceLoc loc = take().loc;
      return mk::apply(ops().not_, {parse_unary()}, loc);
    }
    if (at_punct(Punct::Minus)) {
      SourceLoc loc = take().loc;
      ExprPtr e = parse_unary();
      if (e->kind == ExKind::Lit && e->lit.is_int())
        return mk::lit_int(-e->lit.as_int(), loc);
      return mk::apply(ops().neg, {e}, loc);
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (true) {
      if (at_punct(Punct::Dot)) {
        take();
        if (cur().tok == Tok::Kw &&
            (cur().kw == Kw::Start || cur().kw == Kw::End || cur().kw == Kw::Call ||
             cur().kw == Kw::Change)) {
          e = parse_event(e);
          continue;
        }
        SourceLoc loc = cur().loc;
        Sym id = expect_ident("member name or event");
        bool primed = false;
        if (at_punct(Punct::Prime)) {
          take();
          primed = true;
        }
        std::vector<ExprPtr> args;
        if (at_punct(Punct::LParen)) args = parse_arg_list();
        e = mk::name(e, id, primed, std::move(args), loc);
        continue;
      }
      if (at_punct(Punct::LBracket)) {
        SourceLoc loc = take().loc;
        ExprPtr idx = parse_expr();
        expect_punct(Punct::RBracket);
        e = mk::apply(ops().index, {e, idx}, loc);
        continue;
      }
      break;
    }
    return e;
  }

  std::vector<ExprPtr> parse_arg_list() {
    expect_punct(Punct::LParen);
    std::vector<ExprPtr> args;
    if (!at_punct(Punct::RParen)) {
      args.push_back(parse_expr());
      while (at_punct(Punct::Comma)) {
        take();
        args.push_back(parse_expr());
      }
    }
    expect_punct(Punct::RParen);
    return args;
  }

  ExprPtr parse_event(ExprPtr qual) {
    SourceLoc loc = cur().loc;
    EventKind k;
    switch (take().kw) {
      case Kw::Start: k = EventKind::Start; break;
      case Kw::End: k = EventKind::End; break;
      case Kw::Call: k = EventKind::Call; break;
      default: k = EventKind::Change; break;
    }
    expect_punct(Punct::LParen);
    Sym subject = expect_ident("transition or variable name");
    std::vector<ExprPtr> subj_args;
    if (at_punct(Punct::LParen)) subj_args = parse_arg_list();
    ExprPtr time;
    if (at_punct(Punct::Comma)) {
      take();
      time = parse_expr();
    }
    expect_punct(Punct::RParen);
    return mk::event(std::move(qual), k, subject, std::move(subj_args),
                     std::move(time), loc);
  }

  ExprPtr parse_primary() {
    SourceLoc loc = cur().loc;
    if (cur().tok == Tok::Int) return mk::lit_int(take().ival, loc);
    if (at_kw(Kw::True_)) { take(); return mk::lit_bool(true, loc); }
    if (at_kw(Kw::False_)) { take(); return mk::lit_bool(false, loc); }
    if (at_kw(Kw::Now)) { take(); return mk::now(loc); }
    if (at_kw(Kw::Past)) {
      take();
      expect_punct(Punct::LParen);
      ExprPtr e = parse_expr();
      expect_punct(Punct::Comma);
      ExprPtr t = parse_expr();
      expect_punct(Punct::RParen);
      return mk::past(e, t, loc);
    }
    if (at_kw(Kw::Start) || at_kw(Kw::End) || at_kw(Kw::Call) || at_kw(Kw::Change))
      return parse_event(nullptr);
    if (at_kw(Kw::SetSize) || at_kw(Kw::ListLen)) {
      bool is_set = cur().kw == Kw::SetSize;
      take();
      auto args = parse_arg_list();
      if (args.size() != 1) throw AstralError("expected one argument", loc);
      return mk::apply(is_set ? ops().set_size : ops().list_len, std::move(args), loc);
    }
    if (at_kw(Kw::Nochange)) {
      take();
      auto args = parse_arg_list();
      if (args.size() != 1) throw AstralError("NOCHANGE takes one variable", loc);
      return mk::no_change(args[0], loc);
    }
    if (at_kw(Kw::Impl)) {
      take();
      auto args = parse_arg_list();
      if (args.size() != 1) throw AstralError("IMPL takes one expression", loc);
      return mk::impl_of(args[0], loc);
    }
    if (at_kw(Kw::Impl0)) {
      take();
      auto args = parse_arg_list();
      if (args.size() != 1) throw AstralError("IMPL_0 takes one expression", loc);
      return mk::impl0_of(args[0], loc);
    }
    if (at_kw(Kw::Forall) || at_kw(Kw::Exists)) {
      bool fa = cur().kw == Kw::Forall;
      take();
      std::vector<Binder> bs = parse_binders();
      expect_punct(Punct::LParen);
      ExprPtr body = parse_expr();
      expect_punct(Punct::RParen);
      return mk::quant(fa, std::move(bs), body, loc);
    }
    if (at_kw(Kw::Choose) || at_kw(Kw::Setdef)) {
      bool is_choose = cur().kw == Kw::Choose;
      take();
      std::vector<Binder> bs = parse_binders();
      if (bs.size() != 1)
        throw AstralError(is_choose ? "choose binds one variable"
                                    : "SETDEF binds one variable",
                          loc);
      expect_punct(Punct::LParen);
      ExprPtr body = parse_expr();
      expect_punct(Punct::RParen);
      return is_choose ? mk::choose(bs[0], body, loc) : mk::set_def(bs[0], body, loc);
    }
    if (at_kw(Kw::Listdef)) {
      take();
      return mk::list_def(parse_arg_list(), loc);
    }
    if (at_kw(Kw::Structdef)) {
      take();
      expect_punct(Punct::LParen);
      std::vector<Sym> fields;
      std::vector<ExprPtr> inits;
      while (true) {
        fields.push_back(expect_ident("field name"));
        expect_punct(Punct::Colon);
        inits.push_back(parse_expr());
        if (at_punct(Punct::Comma)) {
          take();
          continue;
        }
        break;
      }
      expect_punct(Punct::RParen);
      return mk::struct_def(std::move(fields), std::move(inits), loc);
    }
    if (at_punct(Punct::LBrace)) {
      take();
      std::vector<ExprPtr> xs;
      if (!at_punct(Punct::RBrace)) {
        xs.push_back(parse_expr());
        while (at_punct(Punct::Comma)) {
          take();
          xs.push_back(parse_expr());
        }
      }
      expect_punct(Punct::RBrace);
      return mk::set_lit(std::move(xs), loc);
    }
    if (at_kw(Kw::If)) {
      take();
      ExprPtr c = parse_expr();
      expect_kw(Kw::Then);
      ExprPtr t = parse_expr();
      expect_kw(Kw::Else);
      ExprPtr f = parse_expr();
      expect_kw(Kw::Fi);
      return mk::if_then_else(c, t, f, loc);
    }
    if (at_kw(Kw::Case)) {
      take();
      ExprPtr scrut = parse_expr();
      expect_kw(Kw::Of);
      std::vector<CaseArm> arms;
      while (!at_kw(Kw::Esac)) {
        ExprPtr match = parse_unary();
        expect_punct(Punct::Colon);
        ExprPtr body = parse_expr();
        arms.push_back({match, body});
      }
      expect_kw(Kw::Esac);
      if (arms.empty()) throw AstralError("CASE needs at least one arm", loc);
      return mk::case_of(scrut, std::move(arms), loc);
    }
    if (at_punct(Punct::LParen)) {
      take();
      ExprPtr e = parse_expr();
      expect_punct(Punct::RParen);
      return e;
    }
    if (at_ident()) {
      Sym id = take().ident;
      bool primed = false;
      if (at_punct(Punct::Prime)) {
        take();
        primed = true;
      }
      std::vector<ExprPtr> args;
      if (at_punct(Punct::LParen)) args = parse_arg_list();
      return mk::name(nullptr, id, primed, std::move(args), loc);
    }
    fail("an expression");
  }

  // ---- declarations ----

  std::vector<InstanceDecl> parse_instance_groups() {
    std::vector<InstanceDecl> out;
    std::set<Sym> seen;
    while (at_ident()) {
      std::vector<std::pair<Sym, SourceLoc>> names;
      names.emplace_back(cur().ident, cur().loc);
      take();
      while (at_punct(Punct::Comma)) {
        take();
        if (!at_ident()) fail("instance name");
        names.emplace_back(cur().ident, cur().loc);
        take();
      }
      expect_punct(Punct::Colon);
      Sym ty = expect_ident("process type name");
      for (auto& [n, l] : names) {
        if (!seen.insert(n).second)
          throw AstralError("duplicate instance declaration: " + sym_name(n), l);
        out.push_back({n, ty, l});
      }
    }
    return out;
  }

  void parse_type_decls(std::vector<TypeDecl>& out) {
    std::set<Sym> seen;
    for (const auto& t : out) seen.insert(t.name);
    while (at_ident()) {
      TypeDecl d;
      d.loc = cur().loc;
      d.name = take().ident;
      if (at_punct(Punct::Colon)) {
        take();
        d.def = parse_type();
      } else {
        d.def = TypeExpr::undefined(d.name);
      }
      if (!seen.insert(d.name).second)
        throw AstralError("duplicate type declaration: " + sym_name(d.name), d.loc);
      out.push_back(std::move(d));
    }
  }

  void parse_const_decls(std::vector<ConstDecl>& out) {
    std::set<Sym> seen;
    for (const auto& c : out) seen.insert(c.name);
    while (at_ident()) {
      ConstDecl d;
      d.loc = cur().loc;
      d.name = take().ident;
      if (at_punct(Punct::LParen)) {
        take();
        d.params = parse_binders();
        expect_punct(Punct::RParen);
      }
      expect_punct(Punct::Colon);
      d.type = parse_type();
      if (at_punct(Punct::EqEq)) {
        take();
        d.value = parse_expr();
      }
      if (!seen.insert(d.name).second)
        throw AstralError("duplicate constant declaration: " + sym_name(d.name), d.loc);
      out.push_back(std::move(d));
    }
  }

  void parse_var_decls(std::vector<VarDecl>& out) {
    std::set<Sym> seen;
    for (const auto& v : out) seen.insert(v.name);
    while (at_ident()) {
      VarDecl d;
      d.loc = cur().loc;
      d.name = take().ident;
      if (at_punct(Punct::LParen)) {
        take();
        d.params = parse_binders();
        expect_punct(Punct::RParen);
      }
      expect_punct(Punct::Colon);
      d.type = parse_type();
      if (!seen.insert(d.name).second)
        throw AstralError("duplicate variable declaration: " + sym_name(d.name), d.loc);
      out.push_back(std::move(d));
      if (at_punct(Punct::Comma)) take();
    }
  }

  ProcessLevel parse_process() {
    ProcessLevel p;
    p.loc = cur().loc;
    expect_kw(Kw::Process);
    p.process_type = expect_ident("process type name");
    if (at_kw(Kw::Level)) {
      take();
      if (cur().tok != Tok::Int) fail("level number");
      p.level = static_cast<int>(take().ival);
    }
    std::set<Sym> trans_seen;
    while (true) {
      if (at_kw(Kw::Export)) {
        take();
        p.exports.push_back(expect_ident("exported name"));
        while (at_punct(Punct::Comma)) {
          take();
          p.exports.push_back(expect_ident("exported name"));
        }
        continue;
      }
      if (at_kw(Kw::Import)) {
        take();
        while (true) {
          ImportRef r;
          r.head = expect_ident("imported name");
          if (at_punct(Punct::Dot)) {
            take();
            r.member = expect_ident("imported member");
          }
          p.imports.push_back(r);
          if (at_punct(Punct::Comma)) {
            take();
            continue;
          }
          break;
        }
        continue;
      }
      if (at_kw(Kw::Type)) {
        take();
        parse_type_decls(p.types);
        continue;
      }
      if (at_kw(Kw::Constant)) {
        take();
        parse_const_decls(p.constants);
        continue;
      }
      if (at_kw(Kw::Variable)) {
        take();
        parse_var_decls(p.variables);
        continue;
      }
      if (at_kw(Kw::Initial)) {
        take();
        p.initial = parse_expr();
        continue;
      }
      if (at_kw(Kw::Axiom)) {
        take();
        p.axiom = parse_expr();
        continue;
      }
      if (at_kw(Kw::Invariant)) {
        take();
        p.invariant = parse_expr();
        continue;
      }
      if (at_kw(Kw::Transition)) {
        TransitionDecl tr;
        tr.loc = take().loc;
        tr.name = expect_ident("transition name");
        if (!trans_seen.insert(tr.name).second)
          throw AstralError("duplicate transition declaration: " + sym_name(tr.name),
                            tr.loc);
        if (at_punct(Punct::LParen)) {
          take();
          tr.params = parse_binders();
          expect_punct(Punct::RParen);
        }
        expect_kw(Kw::Entry);
        expect_punct(Punct::LBracket);
        expect_kw(Kw::Time);
        expect_punct(Punct::Colon);
        tr.duration = parse_expr();
        expect_punct(Punct::RBracket);
        tr.entry = parse_expr();
        expect_kw(Kw::Exit);
        tr.exit = parse_expr();
        p.transitions.push_back(std::move(tr));
        continue;
      }
      break;
    }
    if (!p.initial) p.initial = mk::lit_bool(true);
    if (!p.axiom) p.axiom = mk::lit_bool(true);
    if (!p.invariant) p.invariant = mk::lit_bool(true);
    for (auto& tr : p.transitions)
      for (Sym e : p.exports)
        if (e == tr.name) tr.exported = true;
    return p;
  }

  SystemSpec parse_system_file() {
    SystemSpec s;
    s.source_file = file;
    expect_kw(Kw::Global);
    expect_kw(Kw::Specification);
    s.name = expect_ident("specification name");
    while (true) {
      if (at_kw(Kw::Processes)) {
        take();
        auto is = parse_instance_groups();
        s.instances.insert(s.instances.end(), is.begin(), is.end());
        continue;
      }
      if (at_kw(Kw::Type)) {
        take();
        parse_type_decls(s.global_types);
        continue;
      }
      if (at_kw(Kw::Constant)) {
        take();
        parse_const_decls(s.global_consts);
        continue;
      }
      break;
    }
    while (at_kw(Kw::Process)) s.levels.push_back(parse_process());
    if (cur().tok != Tok::Eof) fail("PROCESS or end of input");
    return s;
  }

  ImplBlock parse_impl_file() {
    ImplBlock b;
    b.source_file = file;
    expect_kw(Kw::Implementation);
    b.name = expect_ident("implementation name");
    expect_kw(Kw::Of);
    b.of_process = expect_ident("upper process type");
    if (at_kw(Kw::Processes)) {
      take();
      b.processes = parse_instance_groups();
    }
    std::set<std::pair<int, Sym>> seen;
    while (at_kw(Kw::Impl)) {
      ImplMapEntry e = parse_map_entry();
      int klass;
      switch (e.kind) {
        case MapKind::TransStart: klass = 1; break;
        case MapKind::TransEnd: klass = 2; break;
        case MapKind::TransCall: klass = 3; break;
        case MapKind::Operator: klass = 4; break;
        case MapKind::ConstCase: klass = 5; break;  // per mapped type
        default: klass = 0; break;  // one value/type/sequence map per symbol
      }
      if (!seen.insert({klass, e.target}).second)
        throw AstralError("duplicate mapping for " + sym_name(e.target), e.loc);
      b.entries.push_back(std::move(e));
    }
    if (cur().tok != Tok::Eof) fail("IMPL mapping or end of input");
    return b;
  }

  ImplMapEntry parse_map_entry() {
    ImplMapEntry e;
    e.loc = cur().loc;
    expect_kw(Kw::Impl);
    expect_punct(Punct::LParen);

    if (at_kw(Kw::Start) || at_kw(Kw::End) || at_kw(Kw::Call)) {
      Kw which = take().kw;
      e.kind = which == Kw::Start   ? MapKind::TransStart
               : which == Kw::End   ? MapKind::TransEnd
                                    : MapKind::TransCall;
      expect_punct(Punct::LParen);
      e.target = expect_ident("transition name");
      if (at_punct(Punct::LParen)) {
        take();
        while (true) {
          e.params.push_back({expect_ident("parameter name"), nullptr});
          if (at_punct(Punct::Comma)) {
            take();
            continue;
          }
          break;
        }
        expect_punct(Punct::RParen);
      }
      expect_punct(Punct::Comma);
      expect_kw(Kw::Now);
      expect_punct(Punct::RParen);
      expect_punct(Punct::RParen);
      expect_punct(Punct::EqEq);
      e.rhs = parse_expr();
      return e;
    }

    // Timed operators cannot be mapped; parse the attempt so the
    // well-formedness checker can reject it with a diagnostic.
    if (at_kw(Kw::Past) || at_kw(Kw::Change)) {
      e.kind = MapKind::Operator;
      e.target = intern(cur().kw == Kw::Past ? "past" : "Change");
      take();
      int depth = 0;
      while (!(depth == 0 && at_punct(Punct::RParen))) {
        if (cur().tok == Tok::Eof) fail("')'");
        if (at_punct(Punct::LParen)) ++depth;
        if (at_punct(Punct::RParen)) --depth;
        take();
      }
      expect_punct(Punct::RParen);
      expect_punct(Punct::EqEq);
      e.rhs = parse_expr();
      return e;
    }

    // Operator map: the operator token/keyword, then typed operands + result.
    Sym opsym = 0;
    const Ops& o = ops();
    if (at_punct(Punct::Eq)) opsym = o.eq;
    else if (at_punct(Punct::Neq)) opsym = o.ne;
    else if (at_punct(Punct::Lt)) opsym = o.lt;
    else if (at_punct(Punct::Le)) opsym = o.le;
    else if (at_punct(Punct::Gt)) opsym = o.gt;
    else if (at_punct(Punct::Ge)) opsym = o.ge;
    else if (at_punct(Punct::Plus)) opsym = o.add;
    else if (at_punct(Punct::Minus)) opsym = o.sub;
    else if (at_punct(Punct::Star)) opsym = o.mul;
    else if (at_punct(Punct::Slash)) opsym = o.div_;
    else if (at_kw(Kw::Isin)) opsym = o.isin;
    else if (at_kw(Kw::ContainedIn)) opsym = o.contained_in;
    else if (at_kw(Kw::Subset)) opsym = o.subset;
    else if (at_kw(Kw::Union)) opsym = o.union_;
    else if (at_kw(Kw::SetDiff)) opsym = o.set_diff;
    else if (at_kw(Kw::Concat)) opsym = o.concat;
    else if (at_kw(Kw::Mod)) opsym = o.mod;
    else if (at_kw(Kw::SetSize)) opsym = o.set_size;
    else if (at_kw(Kw::ListLen)) opsym = o.list_len;
    if (opsym) {
      take();
      e.kind = MapKind::Operator;
      e.target = opsym;
      expect_punct(Punct::LParen);
      e.params = parse_binders();
      expect_punct(Punct::RParen);
      expect_punct(Punct::Colon);
      e.op_result = parse_type();
      expect_punct(Punct::RParen);
      expect_punct(Punct::EqEq);
      e.rhs = parse_expr();
      return e;
    }

    Sym head = expect_ident("mapped symbol");
    if (at_punct(Punct::Colon)) {
      // IMPL(c: T) == CASE c OF ... ESAC
      take();
      e.kind = MapKind::ConstCase;
      e.params = {{head, nullptr}};
      e.target_type = parse_type();
      if (e.target_type->kind == TypeKind::Named) e.target = e.target_type->name;
      expect_punct(Punct::RParen);
      expect_punct(Punct::EqEq);
      ExprPtr rhs = parse_expr();
      if (rhs->kind != ExKind::CaseOf)
        throw AstralError("constant case mapping requires a CASE form", e.loc);
      if (!(rhs->args[0]->kind == ExKind::Name && rhs->args[0]->id == head))
        throw AstralError("constant case mapping must split on the mapped constant",
                          e.loc);
      e.case_arms = rhs->arms;
      e.rhs = rhs;
      return e;
    }

    e.kind = MapKind::Plain;
    e.target = head;
    if (at_punct(Punct::LParen)) {
      take();
      // Formals, optionally typed: IMPL(serving(P)) or IMPL(serving(P: phone)).
      while (true) {
        Sym n = expect_ident("parameter name");
        TypeRef t;
        if (at_punct(Punct::Colon)) {
          take();
          t = parse_type();
        }
        e.params.push_back({n, t});
        if (at_punct(Punct::Comma)) {
          take();
          continue;
        }
        break;
      }
      expect_punct(Punct::RParen);
    }
    expect_punct(Punct::RParen);
    expect_punct(Punct::EqEq);
    if (at_kw(Kw::When)) {
      take();
      e.kind = MapKind::SeqWhen;
      e.seq_entry = parse_expr();
      expect_kw(Kw::Do);
      e.seq_transitions.push_back(expect_ident("transition name"));
      while (at_kw(Kw::Before)) {
        take();
        e.seq_transitions.push_back(expect_ident("transition name"));
      }
      expect_kw(Kw::Od);
      return e;
    }
    if (at_kw(Kw::List) || at_kw(Kw::Set) || at_kw(Kw::Structure) || at_kw(Kw::Typedef)) {
      e.rhs_type = parse_type();
      return e;
    }
    e.rhs = parse_expr();
    return e;
  }

  EnvSchedule parse_sched_file() {
    EnvSchedule s;
    while (at_kw(Kw::At)) {
      SchedCall c;
      c.loc = take().loc;
      if (cur().tok != Tok::Int) fail("tick number");
      c.tick = static_cast<int>(take().ival);
      expect_kw(Kw::Call);
      c.instance = expect_ident("instance name");
      expect_punct(Punct::Dot);
      c.transition = expect_ident("transition name");
      if (at_punct(Punct::LParen)) {
        take();
        while (!at_punct(Punct::RParen)) {
          if (cur().tok == Tok::Int) {
            c.params.push_back(Value::integer(take().ival));
          } else if (at_punct(Punct::Minus)) {
            take();
            if (cur().tok != Tok::Int) fail("integer");
            c.params.push_back(Value::integer(-take().ival));
          } else if (at_kw(Kw::True_)) {
            take();
            c.params.push_back(Value::boolean(true));
          } else if (at_kw(Kw::False_)) {
            take();
            c.params.push_back(Value::boolean(false));
          } else if (at_ident()) {
            c.params.push_back(Value::symbol(take().ident));
          } else {
            fail("a literal parameter");
          }
          if (at_punct(Punct::Comma)) take();
        }
        expect_punct(Punct::RParen);
      }
      s.calls.push_back(std::move(c));
    }
    if (cur().tok != Tok::Eof) fail("AT or end of input");
    s.normalize();
    return s;
  }
};

}  // namespace

SourceKind classify_source(std::string_view text) {
  auto toks = lex(text);
  if (!toks.empty() && toks[0].tok == Tok::Kw && toks[0].kw == Kw::Implementation)
    return SourceKind::ImplBlockText;
  return SourceKind::System;
}

SystemSpec parse_system(std::string_view text, const std::string& file) {
  Parser p(text, file);
  return p.parse_system_file();
}

ImplBlock parse_impl_block(std::string_view text, const std::string& file) {
  Parser p(text, file);
  return p.parse_impl_file();
}

EnvSchedule parse_schedule(std::string_view text, const std::string& file) {
  Parser p(text, file);
  return p.parse_sched_file();
}

ExprPtr parse_expr_text(std::string_view text, const std::string& file) {
  Parser p(text, file);
  ExprPtr e = p.parse_expr();
  if (p.cur().tok != Tok::Eof) p.fail("end of input");
  return e;
}

}  // namespace astral
