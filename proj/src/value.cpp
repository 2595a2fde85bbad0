#include "astral/value.hpp"

#include <algorithm>

namespace astral {

Value Value::set(ValueVec elems) {
  std::sort(elems.begin(), elems.end());
  elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
  return Value{decltype(v)(std::in_place_index<3>,
                           std::make_shared<const ValueVec>(std::move(elems)))};
}

Value Value::list(ValueVec elems) {
  return Value{decltype(v)(std::in_place_index<4>,
                           std::make_shared<const ValueVec>(std::move(elems)))};
}

Value Value::structure(StructVal s) {
  return Value{decltype(v)(std::in_place_index<5>,
                           std::make_shared<const StructVal>(std::move(s)))};
}

int64_t Value::as_int() const {
  if (!is_int()) throw AstralError("value is not numeric: " + render_value(*this));
  return std::get<0>(v);
}
bool Value::as_bool() const {
  if (!is_bool()) throw AstralError("value is not boolean: " + render_value(*this));
  return std::get<1>(v);
}
Sym Value::as_sym() const {
  if (!is_sym()) throw AstralError("value is not a constant symbol: " + render_value(*this));
  return std::get<2>(v);
}
const ValueVec& Value::as_set() const {
  if (!is_set()) throw AstralError("value is not a set: " + render_value(*this));
  return *std::get<3>(v);
}
const ValueVec& Value::as_list() const {
  if (!is_list()) throw AstralError("value is not a list: " + render_value(*this));
  return *std::get<4>(v);
}
const StructVal& Value::as_struct() const {
  if (!is_struct()) throw AstralError("value is not a structure: " + render_value(*this));
  return *std::get<5>(v);
}

namespace {
int compare_vecs(const ValueVec& a, const ValueVec& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (size_t i = 0; i < a.size(); ++i) {
    int c = compare_values(a[i], b[i]);
    if (c != 0) return c;
  }
  return 0;
}
}  // namespace

int compare_values(const Value& a, const Value& b) {
  if (a.v.index() != b.v.index()) return a.v.index() < b.v.index() ? -1 : 1;
  switch (a.v.index()) {
    case 0: {
      int64_t x = std::get<0>(a.v), y = std::get<0>(b.v);
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case 1: {
      bool x = std::get<1>(a.v), y = std::get<1>(b.v);
      return x == y ? 0 : (!x ? -1 : 1);
    }
    case 2: {
      const std::string& x = sym_name(std::get<2>(a.v));
      const std::string& y = sym_name(std::get<2>(b.v));
      return x.compare(y) < 0 ? -1 : (x == y ? 0 : 1);
    }
    case 3:
      return compare_vecs(*std::get<3>(a.v), *std::get<3>(b.v));
    case 4:
      return compare_vecs(*std::get<4>(a.v), *std::get<4>(b.v));
    case 5: {
      const StructVal& x = *std::get<5>(a.v);
      const StructVal& y = *std::get<5>(b.v);
      if (x.fields.size() != y.fields.size())
        return x.fields.size() < y.fields.size() ? -1 : 1;
      for (size_t i = 0; i < x.fields.size(); ++i) {
        const std::string& fx = sym_name(x.fields[i].first);
        const std::string& fy = sym_name(y.fields[i].first);
        int c = fx.compare(fy);
        if (c != 0) return c < 0 ? -1 : 1;
        c = compare_values(x.fields[i].second, y.fields[i].second);
        if (c != 0) return c;
      }
      return 0;
    }
  }
  return 0;
}

size_t hash_value(const Value& v) {
  auto mix = [](size_t h, size_t x) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
  };
  size_t h = v.v.index();
  switch (v.v.index()) {
    case 0: return mix(h, std::hash<int64_t>()(std::get<0>(v.v)));
    case 1: return mix(h, std::get<1>(v.v) ? 2u : 1u);
    case 2: return mix(h, std::hash<std::string>()(sym_name(std::get<2>(v.v))));
    case 3:
    case 4: {
      const ValueVec& xs = v.v.index() == 3 ? *std::get<3>(v.v) : *std::get<4>(v.v);
      for (const auto& x : xs) h = mix(h, hash_value(x));
      return h;
    }
    case 5: {
      for (const auto& [f, x] : std::get<5>(v.v)->fields) {
        h = mix(h, std::hash<std::string>()(sym_name(f)));
        h = mix(h, hash_value(x));
      }
      return h;
    }
  }
  return h;
}

bool compare_vecs_less(const ValueVec& a, const ValueVec& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (size_t i = 0; i < a.size(); ++i) {
    int c = compare_values(a[i], b[i]);
    if (c) return c < 0;
  }
  return false;
}

std::string render_value(const Value& v) {
  switch (v.v.index()) {
    case 0: return std::to_string(std::get<0>(v.v));
    case 1: return std::get<1>(v.v) ? "TRUE" : "FALSE";
    case 2: return sym_name(std::get<2>(v.v));
    case 3:
    case 4: {
      const ValueVec& xs = v.v.index() == 3 ? *std::get<3>(v.v) : *std::get<4>(v.v);
      std::string out = v.v.index() == 3 ? "{" : "[";
      for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += render_value(xs[i]);
      }
      out += v.v.index() == 3 ? "}" : "]";
      return out;
    }
    case 5: {
      std::string out = "(";
      const auto& fs = std::get<5>(v.v)->fields;
      for (size_t i = 0; i < fs.size(); ++i) {
        if (i) out += ", ";
        out += sym_name(fs[i].first);
        out += ": ";
        out += render_value(fs[i].second);
      }
      out += ")";
      return out;
    }
  }
  return "?";
}

}  // namespace astral
