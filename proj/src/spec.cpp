#include "astral/spec.hpp"

#include <algorithm>
#include <sstream>

namespace astral {

const ProcessLevel* SystemSpec::find_level(Sym process_type) const {
  for (const auto& l : levels)
    if (l.process_type == process_type) return &l;
  return nullptr;
}

const InstanceDecl* SystemSpec::find_instance(Sym name) const {
  for (const auto& i : instances)
    if (i.name == name) return &i;
  return nullptr;
}

void EnvSchedule::normalize() {
  std::stable_sort(calls.begin(), calls.end(), [](const SchedCall& a, const SchedCall& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    const std::string& ia = sym_name(a.instance);
    const std::string& ib = sym_name(b.instance);
    if (ia != ib) return ia < ib;
    const std::string& ta = sym_name(a.transition);
    const std::string& tb = sym_name(b.transition);
    if (ta != tb) return ta < tb;
    return compare_vecs_less(a.params, b.params);
  });
}

namespace {

void render_binder_list(const std::vector<Binder>& bs, std::string& out) {
  for (size_t i = 0; i < bs.size(); ++i) {
    if (i) out += ", ";
    out += sym_name(bs[i].name);
    bool last = i + 1 >= bs.size() || !type_equal(bs[i].type, bs[i + 1].type);
    if (last) {
      out += ": ";
      out += render_type(bs[i].type);
    }
  }
}

void render_instances(const std::vector<InstanceDecl>& is, std::string& out) {
  // Group consecutive instances of the same type.
  for (size_t i = 0; i < is.size();) {
    size_t j = i;
    while (j < is.size() && is[j].process_type == is[i].process_type) ++j;
    out += "  ";
    for (size_t k = i; k < j; ++k) {
      if (k > i) out += ", ";
      out += sym_name(is[k].name);
    }
    out += ": ";
    out += sym_name(is[i].process_type);
    out += "\n";
    i = j;
  }
}

void render_level(const ProcessLevel& p, std::string& out) {
  out += "PROCESS " + sym_name(p.process_type);
  if (p.level != 1) out += " LEVEL " + std::to_string(p.level);
  out += "\n";
  if (!p.exports.empty()) {
    out += "EXPORT\n  ";
    for (size_t i = 0; i < p.exports.size(); ++i) {
      if (i) out += ", ";
      out += sym_name(p.exports[i]);
    }
    out += "\n";
  }
  if (!p.imports.empty()) {
    out += "IMPORT\n  ";
    for (size_t i = 0; i < p.imports.size(); ++i) {
      if (i) out += ", ";
      out += sym_name(p.imports[i].head);
      if (p.imports[i].member) out += "." + sym_name(p.imports[i].member);
    }
    out += "\n";
  }
  if (!p.types.empty()) {
    out += "TYPE\n";
    for (const auto& t : p.types) {
      out += "  " + sym_name(t.name);
      if (t.def && t.def->kind != TypeKind::Undefined)
        out += ": " + render_type(t.def);
      out += "\n";
    }
  }
  if (!p.constants.empty()) {
    out += "CONSTANT\n";
    for (const auto& c : p.constants) {
      out += "  " + sym_name(c.name);
      if (!c.params.empty()) {
        out += "(";
        render_binder_list(c.params, out);
        out += ")";
      }
      out += ": " + render_type(c.type);
      if (c.value) out += " == " + render_expr(c.value);
      out += "\n";
    }
  }
  if (!p.variables.empty()) {
    out += "VARIABLE\n";
    for (const auto& v : p.variables) {
      out += "  " + sym_name(v.name);
      if (!v.params.empty()) {
        out += "(";
        render_binder_list(v.params, out);
        out += ")";
      }
      out += ": " + render_type(v.type) + "\n";
    }
  }
  if (p.initial) out += "INITIAL\n  " + render_expr(p.initial) + "\n";
  if (p.axiom) out += "AXIOM\n  " + render_expr(p.axiom) + "\n";
  if (p.invariant) out += "INVARIANT\n  " + render_expr(p.invariant) + "\n";
  for (const auto& tr : p.transitions) {
    out += "TRANSITION " + sym_name(tr.name);
    if (!tr.params.empty()) {
      out += "(";
      render_binder_list(tr.params, out);
      out += ")";
    }
    out += "\nENTRY [TIME: " + render_expr(tr.duration) + "]\n  ";
    out += render_expr(tr.entry);
    out += "\nEXIT\n  " + render_expr(tr.exit) + "\n";
  }
}

}  // namespace

std::string render_system(const SystemSpec& s) {
  std::string out = "GLOBAL SPECIFICATION " + sym_name(s.name) + "\n";
  if (!s.instances.empty()) {
    out += "PROCESSES\n";
    render_instances(s.instances, out);
  }
  if (!s.global_types.empty()) {
    out += "TYPE\n";
    for (const auto& t : s.global_types) {
      out += "  " + sym_name(t.name);
      if (t.def && t.def->kind != TypeKind::Undefined)
        out += ": " + render_type(t.def);
      out += "\n";
    }
  }
  if (!s.global_consts.empty()) {
    out += "CONSTANT\n";
    for (const auto& c : s.global_consts) {
      out += "  " + sym_name(c.name);
      if (!c.params.empty()) {
        out += "(";
        render_binder_list(c.params, out);
        out += ")";
      }
      out += ": " + render_type(c.type);
      if (c.value) out += " == " + render_expr(c.value);
      out += "\n";
    }
  }
  for (const auto& p : s.levels) {
    out += "\n";
    render_level(p, out);
  }
  return out;
}

std::string render_impl_block(const ImplBlock& b) {
  std::string out = "IMPLEMENTATION " + sym_name(b.name) + " OF " +
                    sym_name(b.of_process) + "\n";
  if (!b.processes.empty()) {
    out += "PROCESSES\n";
    render_instances(b.processes, out);
  }
  for (const auto& e : b.entries) {
    out += "IMPL(";
    switch (e.kind) {
      case MapKind::Plain:
        out += sym_name(e.target);
        if (!e.params.empty()) {
          out += "(";
          render_binder_list(e.params, out);
          out += ")";
        }
        out += ") == ";
        out += e.rhs_type ? render_type(e.rhs_type) : render_expr(e.rhs);
        break;
      case MapKind::ConstCase: {
        out += sym_name(e.params[0].name) + ": " + render_type(e.target_type) +
               ") == CASE " + sym_name(e.params[0].name) + " OF ";
        for (const auto& arm : e.case_arms)
          out += render_expr(arm.match) + ": " + render_expr(arm.body) + " ";
        out += "ESAC";
        break;
      }
      case MapKind::Operator: {
        out += sym_name(e.target) + "(";
        render_binder_list(e.params, out);
        out += "): " + render_type(e.op_result) + ") == " + render_expr(e.rhs);
        break;
      }
      case MapKind::TransStart:
      case MapKind::TransEnd:
      case MapKind::TransCall: {
        out += e.kind == MapKind::TransStart ? "Start("
               : e.kind == MapKind::TransEnd ? "End("
                                             : "Call(";
        out += sym_name(e.target);
        if (!e.params.empty()) {
          out += "(";
          for (size_t i = 0; i < e.params.size(); ++i) {
            if (i) out += ", ";
            out += sym_name(e.params[i].name);
          }
          out += ")";
        }
        out += ", now)) == " + render_expr(e.rhs);
        break;
      }
      case MapKind::SeqWhen: {
        out += sym_name(e.target) + ") == WHEN " + render_expr(e.seq_entry) + " DO ";
        for (size_t i = 0; i < e.seq_transitions.size(); ++i) {
          if (i) out += " BEFORE ";
          out += sym_name(e.seq_transitions[i]);
        }
        out += " OD";
        break;
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace astral
