// Type expressions of the specification subset.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "astral/basics.hpp"

namespace astral {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct TypeExpr;
using TypeRef = std::shared_ptr<const TypeExpr>;

enum class Builtin { Integer, Real, Boolean, Time, Id };

enum class TypeKind {
  BuiltinT,    // integer / real / boolean / time / id
  Enumerated,  // (c1, ..., cn)
  ListOf,
  SetOf,
  Structure,     // STRUCTURE OF (f1: T1, ..., fn: Tn)
  TypedefAlias,  // TYPEDEF v: base (pred)
  Undefined,     // declared name with no definition; nothing is known about it
  Named,         // reference to a declared type, resolved through a context
  InstanceOf,    // id values restricted to the instances of one process type
};

struct TypeExpr {
  TypeKind kind;
  Builtin builtin = Builtin::Integer;        // BuiltinT
  std::vector<Sym> enumerators;              // Enumerated
  TypeRef elem;                              // ListOf / SetOf / TypedefAlias base
  std::vector<std::pair<Sym, TypeRef>> fields;  // Structure
  Sym name = 0;       // TypedefAlias bound var, Undefined/Named/InstanceOf name
  ExprPtr predicate;  // TypedefAlias

  static TypeRef builtin_type(Builtin b);
  static TypeRef enumerated(std::vector<Sym> cs);
  static TypeRef list_of(TypeRef t);
  static TypeRef set_of(TypeRef t);
  static TypeRef structure(std::vector<std::pair<Sym, TypeRef>> fs);
  static TypeRef typedef_alias(Sym var, TypeRef base, ExprPtr pred);
  static TypeRef undefined(Sym name);
  static TypeRef named(Sym name);
  static TypeRef instance_of(Sym process_type);
};

// Structural equality (Named compares by name; no resolution).
bool type_equal(const TypeRef& a, const TypeRef& b);

std::string render_type(const TypeRef& t);

// integer and time are subtypes of real; either is acceptable where a
// numeric value is expected.
bool is_numeric_builtin(const TypeRef& t);

}  // namespace astral
