#include "astral/trace.hpp"

#include <algorithm>
#include <sstream>

namespace astral {

namespace {

std::vector<int> trans_bases(const CompiledSystem& sys) {
  std::vector<int> bases(sys.instances.size(), 0);
  int acc = 0;
  for (size_t i = 0; i < sys.instances.size(); ++i) {
    bases[i] = acc;
    acc += static_cast<int>(sys.procs[sys.instances[i].proc].transitions.size());
  }
  return bases;
}

std::vector<int> var_bases(const CompiledSystem& sys) {
  std::vector<int> bases(sys.instances.size(), 0);
  int acc = 0;
  for (size_t i = 0; i < sys.instances.size(); ++i) {
    bases[i] = acc;
    acc += static_cast<int>(sys.procs[sys.instances[i].proc].vars.size());
  }
  return bases;
}

}  // namespace

int Trace::trans_key(int inst, int trans) const {
  static thread_local const CompiledSystem* cached_sys = nullptr;
  static thread_local std::vector<int> cached;
  if (cached_sys != sys) {
    cached = trans_bases(*sys);
    cached_sys = sys;
  }
  return cached[inst] + trans;
}

int Trace::var_key(int inst, int var) const {
  static thread_local const CompiledSystem* cached_sys = nullptr;
  static thread_local std::vector<int> cached;
  if (cached_sys != sys) {
    cached = var_bases(*sys);
    cached_sys = sys;
  }
  return cached[inst] + var;
}

const TransOccs& Trace::occs_of(int inst, int trans) const {
  return occs[trans_key(inst, trans)];
}

void Trace::finalize() {
  int total_trans = 0, total_vars = 0;
  for (const auto& inst : sys->instances) {
    total_trans += static_cast<int>(sys->procs[inst.proc].transitions.size());
    total_vars += static_cast<int>(sys->procs[inst.proc].vars.size());
  }
  occs.assign(static_cast<size_t>(total_trans), {});
  slot_changes.assign(static_cast<size_t>(sys->total_slots), {});
  var_changes.assign(static_cast<size_t>(total_vars), {});

  for (int t = 0; t <= horizon; ++t) {
    TickEvents& ev = events[t];
    auto by_inst_trans = [](const auto& a, const auto& b) {
      if (a.inst != b.inst) return a.inst < b.inst;
      if (a.trans != b.trans) return a.trans < b.trans;
      return compare_vecs_less(a.params, b.params);
    };
    std::stable_sort(ev.calls.begin(), ev.calls.end(), by_inst_trans);
    std::stable_sort(ev.starts.begin(), ev.starts.end(), by_inst_trans);
    std::stable_sort(ev.ends.begin(), ev.ends.end(), by_inst_trans);
    for (const auto& c : ev.calls) {
      TransOccs& o = occs[trans_key(c.inst, c.trans)];
      if (o.call_ticks.empty() || o.call_ticks.back() != t) o.call_ticks.push_back(t);
      o.calls.emplace_back(t, c.params);
    }
    for (const auto& s : ev.starts) {
      TransOccs& o = occs[trans_key(s.inst, s.trans)];
      o.start_ticks.push_back(t);
      o.start_params.push_back(s.params);
    }
    for (const auto& e : ev.ends) {
      TransOccs& o = occs[trans_key(e.inst, e.trans)];
      o.end_ticks.push_back(t);
      o.end_params.push_back(e.params);
      o.end_fire.push_back(e.fire_tick);
    }
    std::sort(ev.changed_slots.begin(), ev.changed_slots.end());
    for (int slot : ev.changed_slots) slot_changes[slot].push_back(t);
  }
  // Variable-level change ticks (any component).
  for (size_t ii = 0; ii < sys->instances.size(); ++ii) {
    const CInst& inst = sys->instances[ii];
    const CProc& p = sys->procs[inst.proc];
    for (size_t vi = 0; vi < p.vars.size(); ++vi) {
      const CVar& v = p.vars[vi];
      std::vector<int>& out = var_changes[var_key(static_cast<int>(ii), static_cast<int>(vi))];
      for (int c = 0; c < v.components; ++c) {
        const auto& ticks = slot_changes[inst.frame_base + v.slot_base + c];
        out.insert(out.end(), ticks.begin(), ticks.end());
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }
  finalized = true;
}

void Trace::init_recording() {
  int total_trans = 0, total_vars = 0;
  for (const auto& inst : sys->instances) {
    total_trans += static_cast<int>(sys->procs[inst.proc].transitions.size());
    total_vars += static_cast<int>(sys->procs[inst.proc].vars.size());
  }
  occs.assign(static_cast<size_t>(total_trans), {});
  slot_changes.assign(static_cast<size_t>(sys->total_slots), {});
  var_changes.assign(static_cast<size_t>(total_vars), {});
  finalized = true;
}

void Trace::record_call(int tick, int inst, int trans, ValueVec params) {
  TransOccs& o = occs[trans_key(inst, trans)];
  if (o.call_ticks.empty() || o.call_ticks.back() != tick) o.call_ticks.push_back(tick);
  o.calls.emplace_back(tick, params);
  events[tick].calls.push_back({inst, trans, std::move(params)});
}

void Trace::record_start(int tick, int inst, int trans, ValueVec params) {
  TransOccs& o = occs[trans_key(inst, trans)];
  o.start_ticks.push_back(tick);
  o.start_params.push_back(params);
  events[tick].starts.push_back({inst, trans, std::move(params)});
}

void Trace::record_end(int tick, int inst, int trans, ValueVec params, int fire) {
  TransOccs& o = occs[trans_key(inst, trans)];
  o.end_ticks.push_back(tick);
  o.end_params.push_back(params);
  o.end_fire.push_back(fire);
  events[tick].ends.push_back({inst, trans, std::move(params), fire});
}

void Trace::note_changed(int tick, int slot) {
  events[tick].changed_slots.push_back(slot);
  slot_changes[slot].push_back(tick);
  // variable-level change tick
  int inst = -1;
  for (int i = static_cast<int>(sys->instances.size()) - 1; i >= 0; --i)
    if (slot >= sys->instances[i].frame_base) {
      inst = i;
      break;
    }
  const CProc& p = sys->procs[sys->instances[inst].proc];
  int local = slot - sys->instances[inst].frame_base;
  for (size_t vi = 0; vi < p.vars.size(); ++vi) {
    const CVar& v = p.vars[vi];
    if (local >= v.slot_base && local < v.slot_base + v.components) {
      auto& ticks = var_changes[var_key(inst, static_cast<int>(vi))];
      if (ticks.empty() || ticks.back() != tick) ticks.push_back(tick);
      break;
    }
  }
}

bool Trace::same_shape(const Trace& o) const {
  if (horizon != o.horizon) return false;
  for (int t = 0; t <= horizon; ++t) {
    if (vals[t].size() != o.vals[t].size()) return false;
    for (size_t i = 0; i < vals[t].size(); ++i)
      if (vals[t][i] != o.vals[t][i]) return false;
    const TickEvents& a = events[t];
    const TickEvents& b = o.events[t];
    auto eq_calls = [](const std::vector<CallEv>& x, const std::vector<CallEv>& y) {
      if (x.size() != y.size()) return false;
      for (size_t i = 0; i < x.size(); ++i)
        if (x[i].inst != y[i].inst || x[i].trans != y[i].trans ||
            x[i].params != y[i].params)
          return false;
      return true;
    };
    if (!eq_calls(a.calls, b.calls)) return false;
    if (a.starts.size() != b.starts.size() || a.ends.size() != b.ends.size())
      return false;
    for (size_t i = 0; i < a.starts.size(); ++i)
      if (a.starts[i].inst != b.starts[i].inst ||
          a.starts[i].trans != b.starts[i].trans ||
          a.starts[i].params != b.starts[i].params)
        return false;
    for (size_t i = 0; i < a.ends.size(); ++i)
      if (a.ends[i].inst != b.ends[i].inst || a.ends[i].trans != b.ends[i].trans ||
          a.ends[i].params != b.ends[i].params ||
          a.ends[i].fire_tick != b.ends[i].fire_tick)
        return false;
  }
  return true;
}

std::string dump_trace(const Trace& tr) {
  const CompiledSystem& sys = *tr.sys;
  std::ostringstream os;

  // Instance order: sorted by name for the dump.
  std::vector<int> inst_order(sys.instances.size());
  for (size_t i = 0; i < inst_order.size(); ++i) inst_order[i] = static_cast<int>(i);
  std::sort(inst_order.begin(), inst_order.end(), [&](int a, int b) {
    return sym_name(sys.instances[a].name) < sym_name(sys.instances[b].name);
  });

  auto params_str = [](const ValueVec& ps) {
    std::string out = "(";
    for (size_t i = 0; i < ps.size(); ++i) {
      if (i) out += ", ";
      out += render_value(ps[i]);
    }
    return out + ")";
  };

  for (int t = 0; t <= tr.horizon; ++t) {
    os << "T " << t << "\n";
    for (int ii : inst_order) {
      const CInst& inst = sys.instances[ii];
      const CProc& p = sys.procs[inst.proc];
      // variables sorted by name
      std::vector<int> vorder(p.vars.size());
      for (size_t i = 0; i < vorder.size(); ++i) vorder[i] = static_cast<int>(i);
      std::sort(vorder.begin(), vorder.end(), [&](int a, int b) {
        return sym_name(p.vars[a].name) < sym_name(p.vars[b].name);
      });
      for (int vi : vorder) {
        const CVar& v = p.vars[vi];
        for (int c = 0; c < v.components; ++c) {
          os << "V " << sym_name(inst.name) << "." << sym_name(v.name);
          if (!v.params.empty()) os << params_str(v.param_tuples[c]);
          os << " = " << render_value(tr.vals[t][inst.frame_base + v.slot_base + c])
             << "\n";
        }
      }
      const TickEvents& ev = tr.events[t];
      auto emit_events = [&](const char* tag, auto& list) {
        for (const auto& e : list) {
          if (e.inst != ii) continue;
          os << "E " << sym_name(inst.name) << " " << tag << " "
             << sym_name(p.transitions[e.trans].name) << params_str(e.params);
          if constexpr (std::is_same_v<std::decay_t<decltype(e)>, EndEv>)
            os << " fire=" << e.fire_tick;
          os << "\n";
        }
      };
      emit_events("CALL", ev.calls);
      emit_events("START", ev.starts);
      emit_events("END", ev.ends);
      // changed components
      std::vector<std::string> changes;
      for (int vi : vorder) {
        const CVar& v = p.vars[vi];
        for (int c = 0; c < v.components; ++c) {
          int slot = inst.frame_base + v.slot_base + c;
          bool changed = std::find(ev.changed_slots.begin(), ev.changed_slots.end(),
                                   slot) != ev.changed_slots.end();
          if (changed) {
            std::string line = "C " + sym_name(inst.name) + "." + sym_name(v.name);
            if (!v.params.empty()) line += params_str(v.param_tuples[c]);
            changes.push_back(std::move(line));
          }
        }
      }
      for (const auto& c : changes) os << c << "\n";
    }
  }
  return os.str();
}

}  // namespace astral
