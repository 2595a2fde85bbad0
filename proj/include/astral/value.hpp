// Runtime values of the evaluation domain.
//
// The subset restricts reals to integer values, so one integer carrier
// covers integer, time and real. Enumerated constants and process-instance
// ids are symbols; sets are kept sorted and deduplicated so equality is
// structural.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "astral/basics.hpp"

namespace astral {

struct Value;
using ValueVec = std::vector<Value>;

struct StructVal {
  // Field order is the declaration order of the structure type.
  std::vector<std::pair<Sym, Value>> fields;
};

struct Value {
  // Index order matters: the fixed total order compares variant index first.
  std::variant<int64_t, bool, Sym, std::shared_ptr<const ValueVec>,  // set
               std::shared_ptr<const ValueVec>,                      // list
               std::shared_ptr<const StructVal>>
      v;

  Value() : v(int64_t{0}) {}
  static Value integer(int64_t i) { return Value{decltype(v)(std::in_place_index<0>, i)}; }
  static Value boolean(bool b) { return Value{decltype(v)(std::in_place_index<1>, b)}; }
  static Value symbol(Sym s) { return Value{decltype(v)(std::in_place_index<2>, s)}; }
  static Value set(ValueVec elems);   // sorts + dedups
  static Value list(ValueVec elems);
  static Value structure(StructVal s);

  bool is_int() const { return v.index() == 0; }
  bool is_bool() const { return v.index() == 1; }
  bool is_sym() const { return v.index() == 2; }
  bool is_set() const { return v.index() == 3; }
  bool is_list() const { return v.index() == 4; }
  bool is_struct() const { return v.index() == 5; }

  int64_t as_int() const;
  bool as_bool() const;
  Sym as_sym() const;
  const ValueVec& as_set() const;
  const ValueVec& as_list() const;
  const StructVal& as_struct() const;

 private:
  explicit Value(decltype(v) x) : v(std::move(x)) {}
};

// Fixed total order over all values (used for canonical choose witnesses,
// set normalization and deterministic iteration). Symbols compare by name.
int compare_values(const Value& a, const Value& b);
inline bool operator==(const Value& a, const Value& b) { return compare_values(a, b) == 0; }
inline bool operator!=(const Value& a, const Value& b) { return compare_values(a, b) != 0; }
inline bool operator<(const Value& a, const Value& b) { return compare_values(a, b) < 0; }

size_t hash_value(const Value& v);

// Lexicographic (size-first) order on tuples of values.
bool compare_vecs_less(const ValueVec& a, const ValueVec& b);

// Surface rendering: 7, TRUE, Idle, {1, 2}, [1, 2], (f1: 0, f2: 3)
std::string render_value(const Value& v);

}  // namespace astral
