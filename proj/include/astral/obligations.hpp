// Generates the sequential (S/P) and parallel (impl_*) refinement proof
// obligations as closed formulas over lower-level traces, with transition
// quantifiers expanded over the concrete transitions.
#pragma once

#include "astral/implmap.hpp"

namespace astral {

enum class SchemaId {
  S0, S1j, S2, P0, Pj1, Pn1,
  ImplEnd1, ImplEnd2, ImplTransEntry, ImplTransExit, ImplTransCalled,
  ImplTransMutex, ImplTransFire, ImplVarsNoChange, ImplInitialState,
  ImplLocalAxiom,
};

const char* schema_name(SchemaId id);

struct SchemaInfo {
  SchemaId id;
  const char* name;
  const char* kind;  // "obligation" or "assumption"
  const char* template_text;
};

// The sixteen-entry schema catalog (documentation + golden tests).
std::vector<SchemaInfo> list_schemas();

struct AssumptionInfo {
  const char* name;
  const char* template_text;
};
// impl_call and impl_call_fire_parms: environment assumptions, enforced on
// schedules/traces by the checker, never checked as obligations.
std::vector<AssumptionInfo> list_assumptions();

struct Obligation {
  SchemaId schema;
  Sym transition = 0;  // 0 = system-level instance
  ExprPtr formula;     // closed, lower-level vocabulary, past-normalized
};

struct ObligationSet {
  std::vector<Obligation> obligations;
  std::vector<AssumptionInfo> assumptions;
};

// The ten 7.1 schemas instantiated for every upper transition (call-related
// schemas only for exported ones), rewritten to the lower level with the
// concrete mapped durations substituted.
ObligationSet gen_parallel(const ResolvedImpl& ri);

// The 4 schemas for one upper transition refined by a sequence (P0..Pn+1)
// or selection (S0, S1_j, S2).
ObligationSet gen_sequential(const ResolvedImpl& ri, Sym upper_trans);

// Mapped duration of an upper transition as a concrete tick count.
int mapped_duration(const ResolvedImpl& ri, const TransitionDecl& tr);

// <schema>__<transition>.obl; system-level schemas use "system".
std::string obl_filename(const Obligation& o);
std::string render_obligation(const Obligation& o);

}  // namespace astral
