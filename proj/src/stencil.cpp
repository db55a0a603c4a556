#include "cpc/stencil.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace cpc {

namespace {

constexpr std::string_view kNodeKindNames[kNodeKindCount] = {
    "FunctionEntry", "Literal", "VarLoad",      "VarStore",       "Binary",
    "Compare",       "Branch",  "Jump",         "Call",           "Return",
    "ExternalCall",  "IfCmpVarConst", "BinaryVarConst", "ArrayLoad", "ArrayStore"};

constexpr std::string_view kLocNames[3] = {"Reg", "Stack", "Lit"};

bool op_is_binary(NodeKind k) { return k == NodeKind::Binary || k == NodeKind::BinaryVarConst; }
bool op_is_compare(NodeKind k) { return k == NodeKind::Compare || k == NodeKind::IfCmpVarConst; }

void store_le(uint8_t *p, uint64_t v, unsigned bytes) {
  for (unsigned i = 0; i < bytes; ++i)
    p[i] = static_cast<uint8_t>(v >> (8 * i));
}

} // namespace

std::string_view to_string(NodeKind k) noexcept {
  auto i = static_cast<size_t>(k);
  return i < kNodeKindCount ? kNodeKindNames[i] : "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept {
  for (int i = 0; i < kNodeKindCount; ++i)
    if (kNodeKindNames[i] == name)
      return static_cast<NodeKind>(i);
  return std::nullopt;
}

std::string_view to_string(Loc l) noexcept {
  auto i = static_cast<size_t>(l);
  return i < 3 ? kLocNames[i] : "?";
}

std::optional<Loc> parse_loc(std::string_view name) noexcept {
  for (int i = 0; i < 3; ++i)
    if (kLocNames[i] == name)
      return static_cast<Loc>(i);
  return std::nullopt;
}

std::array<uint8_t, StencilKey::kBytes> StencilKey::bytes() const noexcept {
  std::array<uint8_t, kBytes> b{};
  b[0] = static_cast<uint8_t>(kind);
  b[1] = op;
  b[2] = type;
  for (int i = 0; i < 3; ++i)
    b[3 + i] = i < nlocs ? static_cast<uint8_t>(locs[i]) : 0;
  b[6] = nlocs;
  b[7] = pt;
  b[8] = spill ? 1 : 0;
  return b;
}

StencilKey StencilKey::from_bytes(std::span<const uint8_t> b) {
  if (b.size() != kBytes)
    throw Error(ErrorCode::InvalidStencil, "stencil key must be 9 bytes");
  StencilKey k;
  if (b[0] >= kNodeKindCount || b[2] > kValueTypeCount || b[6] > 3 || b[7] > 15 || b[8] > 1)
    throw Error(ErrorCode::InvalidStencil, "stencil key field out of range");
  k.kind = static_cast<NodeKind>(b[0]);
  k.op = b[1];
  k.type = b[2];
  k.nlocs = b[6];
  for (int i = 0; i < 3; ++i) {
    if (b[3 + i] > 2 || (i >= k.nlocs && b[3 + i] != 0))
      throw Error(ErrorCode::InvalidStencil, "stencil key location out of range");
    k.locs[i] = static_cast<Loc>(b[3 + i]);
  }
  k.pt = b[7];
  k.spill = b[8] != 0;
  return k;
}

std::string StencilKey::hex() const {
  static const char *digits = "0123456789abcdef";
  std::string s;
  for (auto c : bytes()) {
    s += digits[c >> 4];
    s += digits[c & 15];
  }
  return s;
}

std::string StencilKey::describe() const {
  std::string s(to_string(kind));
  if (op_is_binary(kind))
    s += "." + std::string(to_string(static_cast<BinaryOp>(op)));
  else if (op_is_compare(kind))
    s += "." + std::string(to_string(static_cast<CompareOp>(op)));
  auto t = value_type();
  s += "." + (t ? std::string(to_string(*t)) : std::string("void"));
  if (nlocs) {
    s += "[";
    for (int i = 0; i < nlocs; ++i)
      s += (i ? "," : "") + std::string(to_string(locs[i]));
    s += "]";
  }
  s += " pt=" + std::to_string(pt);
  if (spill)
    s += " spill";
  return s;
}

uint64_t StencilKey::pack() const noexcept {
  uint64_t x = 0;
  for (auto c : bytes())
    x = (x << 7) ^ c;
  return x;
}

std::string HoleTarget::describe() const {
  switch (kind) {
  case Kind::Continuation: return "cont" + std::to_string(ordinal);
  case Kind::Value: return "val" + std::to_string(ordinal);
  case Kind::External: return "ext:" + name;
  }
  return "?";
}

uint32_t Stencil::continuation_count() const noexcept {
  uint32_t n = 0;
  for (const auto &p : patches)
    if (p.target.kind == HoleTarget::Kind::Continuation)
      n = std::max(n, p.target.ordinal + 1);
  return n;
}

uint32_t Stencil::value_count() const noexcept {
  uint32_t n = 0;
  for (const auto &p : patches)
    if (p.target.kind == HoleTarget::Kind::Value)
      n = std::max(n, p.target.ordinal + 1);
  return n;
}

void Stencil::validate() const {
  auto bad = [&](const std::string &why) {
    throw Error(ErrorCode::InvalidStencil, key.describe() + ": " + why);
  };
  std::vector<std::pair<uint32_t, uint32_t>> spans;
  std::map<std::pair<int, uint32_t>, std::pair<uint8_t, bool>> shape;
  for (const auto &p : patches) {
    if (p.width != 32 && p.width != 64)
      bad("patch width must be 32 or 64");
    if (uint64_t{p.offset} + p.width / 8 > code.size())
      bad("patch at " + std::to_string(p.offset) + " extends past code end");
    spans.emplace_back(p.offset, p.offset + p.width / 8);
    if (p.target.kind == HoleTarget::Kind::External)
      continue;
    auto id = std::make_pair(static_cast<int>(p.target.kind), p.target.ordinal);
    auto [it, fresh] = shape.emplace(id, std::make_pair(p.width, p.subtract_site));
    if (!fresh && it->second != std::make_pair(p.width, p.subtract_site))
      bad(p.target.describe() + " used with inconsistent width or relativity");
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second)
      bad("overlapping patch sites");
  for (int kind : {0, 1}) {
    uint32_t expect = 0;
    for (const auto &[id, _] : shape)
      if (id.first == kind && id.second != expect++)
        bad("hole ordinals are not dense");
  }
  if (tail) {
    if (uint64_t{tail->offset} + tail->length != code.size())
      bad("tail span does not end at code end");
    int inside = 0;
    for (const auto &p : patches)
      if (p.offset >= tail->offset) {
        if (p.target != HoleTarget::cont(0))
          bad("tail span holds a patch other than cont0");
        ++inside;
      }
    if (inside != 1)
      bad("tail span must hold exactly one cont0 patch");
  }
}

uint64_t patch_value(const PatchRecord &p, uint64_t dest, uint64_t target) noexcept {
  uint64_t v = static_cast<uint64_t>(p.addend);
  if (p.add_target)
    v += target;
  if (p.subtract_site)
    v -= dest + p.offset;
  return v;
}

void apply_patch(const PatchRecord &p, uint8_t *code, uint64_t dest, uint64_t target) {
  uint64_t v = patch_value(p, dest, target);
  if (p.width == 32) {
    auto s = static_cast<int64_t>(v);
    if (s < INT32_MIN || s > INT32_MAX)
      throw Error(ErrorCode::PatchOverflow, p.target.describe() + " value " + std::to_string(s) +
                                                " does not fit 32 bits at offset " +
                                                std::to_string(p.offset));
  }
  store_le(code + p.offset, v, p.width / 8);
}

std::optional<uint64_t> HoleValues::lookup(const HoleTarget &t) const noexcept {
  switch (t.kind) {
  case HoleTarget::Kind::Continuation:
    if (t.ordinal < continuations.size())
      return continuations[t.ordinal];
    break;
  case HoleTarget::Kind::Value:
    if (t.ordinal < values.size())
      return values[t.ordinal];
    break;
  case HoleTarget::Kind::External:
    if (externals)
      if (auto it = externals->find(t.name); it != externals->end())
        return it->second;
    break;
  }
  return std::nullopt;
}

size_t materialize(const Stencil &s, uint64_t dest, const HoleValues &holes, bool elide_tail,
                   uint8_t *out) {
  if (elide_tail && !s.tail)
    throw Error(ErrorCode::InvalidArgument, s.key.describe() + " has no elidable tail");
  size_t n = s.size(elide_tail);
  std::memcpy(out, s.code.data(), n);
  for (const auto &p : s.patches) {
    if (p.offset >= n)
      continue;
    auto v = holes.lookup(p.target);
    if (!v)
      throw Error(ErrorCode::MissingHoleValue, s.key.describe() + ": " + p.target.describe());
    apply_patch(p, out, dest, *v);
  }
  return n;
}

std::vector<uint8_t> materialize(const Stencil &s, uint64_t dest,
                                 const std::map<HoleTarget, uint64_t> &holes, bool elide_tail) {
  std::vector<uint64_t> values(s.value_count()), conts(s.continuation_count());
  std::vector<bool> have_v(values.size()), have_c(conts.size());
  std::map<std::string, uint64_t, std::less<>> ext;
  for (const auto &[t, v] : holes) {
    if (t.kind == HoleTarget::Kind::Value && t.ordinal < values.size()) {
      values[t.ordinal] = v;
      have_v[t.ordinal] = true;
    } else if (t.kind == HoleTarget::Kind::Continuation && t.ordinal < conts.size()) {
      conts[t.ordinal] = v;
      have_c[t.ordinal] = true;
    } else if (t.kind == HoleTarget::Kind::External) {
      ext[t.name] = v;
    }
  }
  size_t n = s.size(elide_tail);
  for (const auto &p : s.patches) {
    if (p.offset >= n)
      continue;
    bool ok = p.target.kind == HoleTarget::Kind::Value        ? bool(have_v[p.target.ordinal])
              : p.target.kind == HoleTarget::Kind::Continuation ? bool(have_c[p.target.ordinal])
                                                                : ext.count(p.target.name) > 0;
    if (!ok)
      throw Error(ErrorCode::MissingHoleValue, s.key.describe() + ": " + p.target.describe());
  }
  std::vector<uint8_t> out(s.code.size());
  HoleValues hv{values, conts, &ext};
  out.resize(materialize(s, dest, hv, elide_tail, out.data()));
  return out;
}

void StencilLibrary::insert(Stencil s) {
  auto key = s.key;
  stencils_.insert_or_assign(key, std::move(s));
}

const Stencil *StencilLibrary::find(const StencilKey &k) const noexcept {
  auto it = stencils_.find(k);
  return it == stencils_.end() ? nullptr : &it->second;
}

const Stencil &StencilLibrary::select(const StencilKey &k) const {
  if (auto *s = find(k))
    return *s;
  throw Error(ErrorCode::MissingVariant, k.describe());
}

std::vector<const Stencil *> StencilLibrary::sorted() const {
  std::vector<const Stencil *> out;
  out.reserve(stencils_.size());
  for (const auto &[_, s] : stencils_)
    out.push_back(&s);
  std::sort(out.begin(), out.end(), [](auto *a, auto *b) { return a->key < b->key; });
  return out;
}

size_t StencilLibrary::total_code_bytes() const noexcept {
  size_t n = 0;
  for (const auto &[_, s] : stencils_)
    n += s.code.size();
  return n;
}

bool StencilLibrary::operator==(const StencilLibrary &o) const {
  return arch_ == o.arch_ && stencils_ == o.stencils_;
}

} // namespace cpc
