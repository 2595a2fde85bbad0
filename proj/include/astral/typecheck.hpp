// Type inference and the structural type-compatibility relation.
#pragma once

#include <functional>

#include "astral/spec.hpp"

namespace astral {

// Name-to-definition view of one side's type tables.
struct TypeEnv {
  std::function<TypeRef(Sym)> lookup;  // returns null when unknown
  std::function<bool(Sym)> is_process_type;
};

TypeEnv type_env_of(const SystemSpec& sys, const ProcessLevel* level);

struct CompatVerdict {
  bool compatible = false;
  // Rule applied / failing subcomponent, outermost first. Non-empty iff
  // incompatible... plus one entry naming the rule when compatible.
  std::vector<std::string> witness;
};

// The six-clause compatibility definition: undefined upper types are
// compatible with anything; identity; lists and sets with compatible
// elements; structures with identical field names and pairwise-compatible
// fields; a lower typedef unfolds to its base. Upper typedefs are not
// unfolded (the relation is asymmetric by construction).
CompatVerdict compatible(const TypeRef& upper, const TypeRef& lower,
                         const TypeEnv& upper_env, const TypeEnv& lower_env);

// --- inference -----------------------------------------------------------------

struct TypeContext {
  const SystemSpec* sys = nullptr;
  const ProcessLevel* level = nullptr;  // unqualified-name scope, may be null
  std::vector<Binder> bindings;
  bool in_exit = false;  // primes / BECOMES / NOCHANGE allowed

  TypeEnv env() const { return type_env_of(*sys, level); }
};

// Standard structural inference; throws AstralError with a source span on
// mismatches or unresolved names.
TypeRef infer_type(const ExprPtr& e, TypeContext& ctx);

}  // namespace astral
