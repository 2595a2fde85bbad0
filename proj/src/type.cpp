#include "astral/type.hpp"

#include "astral/expr.hpp"

namespace astral {

namespace {
TypeRef make(TypeKind k) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = k;
  return t;
}
}  // namespace

TypeRef TypeExpr::builtin_type(Builtin b) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::BuiltinT;
  t->builtin = b;
  return t;
}

TypeRef TypeExpr::enumerated(std::vector<Sym> cs) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::Enumerated;
  t->enumerators = std::move(cs);
  return t;
}

TypeRef TypeExpr::list_of(TypeRef e) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::ListOf;
  t->elem = std::move(e);
  return t;
}

TypeRef TypeExpr::set_of(TypeRef e) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::SetOf;
  t->elem = std::move(e);
  return t;
}

TypeRef TypeExpr::structure(std::vector<std::pair<Sym, TypeRef>> fs) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::Structure;
  t->fields = std::move(fs);
  return t;
}

TypeRef TypeExpr::typedef_alias(Sym var, TypeRef base, ExprPtr pred) {
  auto t = std::make_shared<TypeExpr>();
  t->kind = TypeKind::TypedefAlias;
  t->name = var;
  t->elem = std::move(base);
  t->predicate = std::move(pred);
  return t;
}

TypeRef TypeExpr::undefined(Sym name) {
  auto t = make(TypeKind::Undefined);
  const_cast<TypeExpr*>(t.get())->name = name;
  return t;
}

TypeRef TypeExpr::named(Sym name) {
  auto t = make(TypeKind::Named);
  const_cast<TypeExpr*>(t.get())->name = name;
  return t;
}

TypeRef TypeExpr::instance_of(Sym process_type) {
  auto t = make(TypeKind::InstanceOf);
  const_cast<TypeExpr*>(t.get())->name = process_type;
  return t;
}

bool type_equal(const TypeRef& a, const TypeRef& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TypeKind::BuiltinT:
      return a->builtin == b->builtin;
    case TypeKind::Enumerated:
      return a->enumerators == b->enumerators;
    case TypeKind::ListOf:
    case TypeKind::SetOf:
      return type_equal(a->elem, b->elem);
    case TypeKind::Structure: {
      if (a->fields.size() != b->fields.size()) return false;
      for (size_t i = 0; i < a->fields.size(); ++i) {
        if (a->fields[i].first != b->fields[i].first) return false;
        if (!type_equal(a->fields[i].second, b->fields[i].second)) return false;
      }
      return true;
    }
    case TypeKind::TypedefAlias:
      return a->name == b->name && type_equal(a->elem, b->elem) &&
             expr_equal(a->predicate, b->predicate);
    case TypeKind::Undefined:
    case TypeKind::Named:
    case TypeKind::InstanceOf:
      return a->name == b->name;
  }
  return false;
}

std::string render_type(const TypeRef& t) {
  if (!t) return "<null-type>";
  switch (t->kind) {
    case TypeKind::BuiltinT:
      switch (t->builtin) {
        case Builtin::Integer: return "integer";
        case Builtin::Real: return "real";
        case Builtin::Boolean: return "boolean";
        case Builtin::Time: return "time";
        case Builtin::Id: return "id";
      }
      return "?";
    case TypeKind::Enumerated: {
      std::string out = "(";
      for (size_t i = 0; i < t->enumerators.size(); ++i) {
        if (i) out += ", ";
        out += sym_name(t->enumerators[i]);
      }
      return out + ")";
    }
    case TypeKind::ListOf:
      return "LIST OF " + render_type(t->elem);
    case TypeKind::SetOf:
      return "SET OF " + render_type(t->elem);
    case TypeKind::Structure: {
      std::string out = "STRUCTURE OF (";
      for (size_t i = 0; i < t->fields.size(); ++i) {
        if (i) out += ", ";
        out += sym_name(t->fields[i].first);
        out += ": ";
        out += render_type(t->fields[i].second);
      }
      return out + ")";
    }
    case TypeKind::TypedefAlias:
      return "TYPEDEF " + sym_name(t->name) + ": " + render_type(t->elem) +
             " (" + render_expr(t->predicate) + ")";
    case TypeKind::Undefined:
    case TypeKind::Named:
    case TypeKind::InstanceOf:
      return sym_name(t->name);
  }
  return "?";
}

bool is_numeric_builtin(const TypeRef& t) {
  return t && t->kind == TypeKind::BuiltinT &&
         (t->builtin == Builtin::Integer || t->builtin == Builtin::Real ||
          t->builtin == Builtin::Time);
}

}  // namespace astral
