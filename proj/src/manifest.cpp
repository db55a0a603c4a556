#include "cpc/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace cpc {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string &msg) { throw Error(ErrorCode::InvalidManifest, msg); }

bool is_binary_kind(NodeKind k) { return k == NodeKind::Binary || k == NodeKind::BinaryVarConst; }
bool is_compare_kind(NodeKind k) { return k == NodeKind::Compare || k == NodeKind::IfCmpVarConst; }

uint8_t parse_op(NodeKind kind, const std::string &name) {
  if (is_binary_kind(kind)) {
    for (int i = 0; i < 5; ++i)
      if (to_string(static_cast<BinaryOp>(i)) == name)
        return static_cast<uint8_t>(i);
  } else if (is_compare_kind(kind)) {
    for (int i = 0; i < 6; ++i)
      if (to_string(static_cast<CompareOp>(i)) == name)
        return static_cast<uint8_t>(i);
  }
  invalid("operator '" + name + "' is not valid for " + std::string(to_string(kind)));
}

std::string op_name(const StencilKey &k) {
  if (is_binary_kind(k.kind))
    return std::string(to_string(static_cast<BinaryOp>(k.op)));
  if (is_compare_kind(k.kind))
    return std::string(to_string(static_cast<CompareOp>(k.op)));
  return "";
}

std::string type_name(uint8_t t) {
  return t == 0 ? "void" : std::string(to_string(static_cast<ValueType>(t - 1)));
}

uint8_t parse_type(const std::string &name) {
  if (name == "void")
    return 0;
  if (auto t = parse_value_type(name))
    return static_cast<uint8_t>(static_cast<uint8_t>(*t) + 1);
  invalid("unknown type '" + name + "'");
}

std::string upper(std::string s) {
  for (auto &c : s)
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string field_value(const StencilKey &k, const std::string &field) {
  if (field == "op")
    return op_name(k);
  if (field == "type")
    return type_name(k.type);
  if (field == "loc0" || field == "loc1" || field == "loc2") {
    int i = field[3] - '0';
    return i < k.nlocs ? std::string(to_string(k.locs[i])) : "";
  }
  if (field == "pt")
    return std::to_string(k.pt);
  if (field == "spill")
    return k.spill ? "true" : "false";
  invalid("unknown filter field '" + field + "'");
}

std::string scalar_text(const json &v) {
  if (v.is_string())
    return v.get<std::string>();
  if (v.is_boolean())
    return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer())
    return std::to_string(v.get<int64_t>());
  invalid("filter values must be strings, integers or booleans");
}

Generator parse_generator(const json &g) {
  if (!g.is_object())
    invalid("generator must be an object");
  Generator out;
  if (!g.contains("kind") || !g["kind"].is_string())
    invalid("generator needs a string 'kind'");
  auto kind = parse_node_kind(g["kind"].get<std::string>());
  if (!kind)
    invalid("unknown node kind '" + g["kind"].get<std::string>() + "'");
  out.kind = *kind;
  out.has_ops = g.contains("ops");
  if (out.has_ops)
    for (const auto &o : g["ops"])
      out.ops.push_back(parse_op(out.kind, o.get<std::string>()));
  if (g.contains("types"))
    for (const auto &t : g["types"])
      out.types.push_back(parse_type(t.get<std::string>()));
  else
    out.types = {0};
  if (g.contains("locations")) {
    if (g["locations"].size() > 3)
      invalid("at most 3 operand locations");
    for (const auto &dom : g["locations"]) {
      std::vector<Loc> d;
      for (const auto &l : dom) {
        auto loc = parse_loc(l.get<std::string>());
        if (!loc)
          invalid("unknown location '" + l.get<std::string>() + "'");
        d.push_back(*loc);
      }
      out.locations.push_back(std::move(d));
    }
  }
  if (g.contains("pass_through")) {
    const auto &pt = g["pass_through"];
    if (!pt.is_array() || pt.size() != 2)
      invalid("pass_through must be [lo, hi]");
    out.pt_lo = pt[0].get<int>();
    out.pt_hi = pt[1].get<int>();
    if (out.pt_lo < 0 || out.pt_hi > kMaxPassThrough || out.pt_lo > out.pt_hi)
      invalid("pass_through range must lie within 0.." + std::to_string(kMaxPassThrough));
  }
  if (g.contains("spill")) {
    out.spill.clear();
    for (const auto &s : g["spill"])
      out.spill.push_back(s.get<bool>());
  }
  if (g.contains("must_elide"))
    out.must_elide = g["must_elide"].get<bool>();
  if (g.contains("filters")) {
    for (const auto &f : g["filters"]) {
      if (f.contains("exclude")) {
        ExcludeFilter ex;
        for (const auto &[field, values] : f["exclude"].items()) {
          std::vector<std::string> vs;
          for (const auto &v : values)
            vs.push_back(scalar_text(v));
          ex.fields.emplace_back(field, std::move(vs));
        }
        out.excludes.push_back(std::move(ex));
      } else if (f.contains("register_budget")) {
        out.register_budget = f["register_budget"].get<int>();
      } else {
        invalid("unknown filter");
      }
    }
  }
  return out;
}

bool excluded(const StencilKey &k, const ExcludeFilter &f) {
  if (f.fields.empty())
    return false;
  for (const auto &[field, values] : f.fields) {
    auto v = field_value(k, field);
    if (std::find(values.begin(), values.end(), v) == values.end())
      return false;
  }
  return true;
}

bool produces_value(NodeKind k) {
  switch (k) {
  case NodeKind::Literal:
  case NodeKind::VarLoad:
  case NodeKind::Binary:
  case NodeKind::Compare:
  case NodeKind::ArrayLoad:
  case NodeKind::Call:
  case NodeKind::ExternalCall:
    return true;
  default:
    return false;
  }
}

} // namespace

int register_inputs(const StencilKey &k) noexcept {
  int n = 0;
  for (int i = 0; i < k.nlocs; ++i)
    n += k.locs[i] == Loc::Reg;
  return n;
}

int register_outputs(const StencilKey &k) noexcept {
  if (!produces_value(k.kind) || k.spill)
    return 0;
  if ((k.kind == NodeKind::Call || k.kind == NodeKind::ExternalCall) && k.type == 0)
    return 0;
  return 1;
}

Manifest parse_manifest(const std::string &json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception &e) {
    invalid(e.what());
  }
  if (!doc.is_object() || !doc.contains("generators") || !doc["generators"].is_array())
    invalid("manifest needs a 'generators' array");
  Manifest m;
  try {
    for (const auto &g : doc["generators"])
      m.generators.push_back(parse_generator(g));
  } catch (const json::exception &e) {
    invalid(e.what());
  }
  return m;
}

Manifest load_manifest(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::vector<ExpandedKey> expand(const Manifest &m) {
  if (m.generators.empty())
    throw Error(ErrorCode::EmptyExpansion, "manifest has no generators");
  std::map<StencilKey, bool> keys;
  for (const auto &g : m.generators) {
    std::vector<uint8_t> ops = g.has_ops ? g.ops : std::vector<uint8_t>{0};
    bool any = false;
    // Odometer over the operand-location domains.
    size_t nloc = g.locations.size();
    size_t combos = 1;
    for (const auto &d : g.locations)
      combos *= d.size();
    for (auto op : ops)
      for (auto type : g.types)
        for (size_t c = 0; c < combos; ++c)
          for (int pt = g.pt_lo; pt <= g.pt_hi; ++pt)
            for (bool spill : g.spill) {
              StencilKey k;
              k.kind = g.kind;
              k.op = op;
              k.type = type;
              k.nlocs = static_cast<uint8_t>(nloc);
              size_t rest = c;
              for (size_t i = nloc; i-- > 0;) {
                k.locs[i] = g.locations[i][rest % g.locations[i].size()];
                rest /= g.locations[i].size();
              }
              k.pt = static_cast<uint8_t>(pt);
              k.spill = spill;
              if (std::any_of(g.excludes.begin(), g.excludes.end(),
                              [&](const auto &f) { return excluded(k, f); }))
                continue;
              if (g.register_budget &&
                  pt + std::max(register_inputs(k), register_outputs(k)) > *g.register_budget)
                continue;
              any = true;
              keys[k] = keys[k] || g.must_elide;
            }
    if (!any)
      throw Error(ErrorCode::EmptyExpansion,
                  std::string(to_string(g.kind)) + " generator expands to no keys");
  }
  std::vector<ExpandedKey> out;
  out.reserve(keys.size());
  for (const auto &[k, must] : keys)
    out.push_back({k, must, compile_defines(k), source_file_for(k.kind)});
  return out;
}

std::vector<std::pair<std::string, std::string>> compile_defines(const StencilKey &k) {
  std::vector<std::pair<std::string, std::string>> d;
  d.emplace_back("CP_STENCIL_NAME", k.symbol());
  d.emplace_back("CP_KIND", std::to_string(static_cast<int>(k.kind)));
  d.emplace_back("CP_KIND_" + upper(std::string(to_string(k.kind))), "1");
  d.emplace_back("CP_OP", std::to_string(k.op));
  if (auto op = op_name(k); !op.empty())
    d.emplace_back("CP_OP_" + upper(op), "1");
  d.emplace_back("CP_TYPE", std::to_string(k.type));
  d.emplace_back("CP_TYPE_" + upper(type_name(k.type)), "1");
  d.emplace_back("CP_NLOCS", std::to_string(k.nlocs));
  for (int i = 0; i < 3; ++i)
    d.emplace_back("CP_LOC" + std::to_string(i),
                   std::to_string(i < k.nlocs ? static_cast<int>(k.locs[i]) : 0));
  d.emplace_back("CP_PT", std::to_string(k.pt));
  d.emplace_back("CP_SPILL", k.spill ? "1" : "0");
  return d;
}

std::string source_file_for(NodeKind k) {
  std::string name(to_string(k)), out;
  for (size_t i = 0; i < name.size(); ++i) {
    char c = name[i];
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (i)
        out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      out += c;
    }
  }
  return "stencils/" + out + ".c";
}

} // namespace cpc
