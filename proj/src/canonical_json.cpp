#include "cotransport/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace cotransport {
namespace {

void newline(std::ostream& out, int indent, int depth) {
  if (indent < 0) return;
  out << '\n' << std::string(static_cast<std::size_t>(indent * depth), ' ');
}

void emit(std::ostream& out, const Json& v, int indent, int depth) {
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map keeps keys sorted
        if (!first) out << ',';
        first = false;
        newline(out, indent, depth + 1);
        out << Json(it.key()).dump() << (indent < 0 ? ":" : ": ");
        emit(out, it.value(), indent, depth + 1);
      }
      newline(out, indent, depth);
      out << '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out << "[]";
        return;
      }
      out << '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        newline(out, indent, depth + 1);
        emit(out, v[i], indent, depth + 1);
      }
      newline(out, indent, depth);
      out << ']';
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      out << (std::isfinite(d) ? format_double(d) : "null");
      return;
    }
    default:
      out << v.dump();
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_canonical(std::ostream& out, const Json& value, int indent) { emit(out, value, indent, 0); }

std::string canonical_dump(const Json& value, int indent) {
  std::ostringstream out;
  write_canonical(out, value, indent);
  return out.str();
}

}  // namespace cotransport
