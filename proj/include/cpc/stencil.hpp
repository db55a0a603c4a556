#pragma once

#include "cpc/ast.hpp"
#include "cpc/error.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cpc {

/// Stencil node kinds. VarLoad and Jump belong to the key space but the code
/// generator never selects them: local reads are absorbed as Stack operands
/// and back/join edges are continuation jumps of the preceding stencil.
enum class NodeKind : uint8_t {
  FunctionEntry,
  Literal,
  VarLoad,
  VarStore,
  Binary,
  Compare,
  Branch,
  Jump,
  Call,
  Return,
  ExternalCall,
  IfCmpVarConst,
  BinaryVarConst,
  ArrayLoad,
  ArrayStore,
};

inline constexpr int kNodeKindCount = 15;

std::string_view to_string(NodeKind k) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept;

enum class Loc : uint8_t { Reg = 0, Stack = 1, Lit = 2 };

std::string_view to_string(Loc l) noexcept;
std::optional<Loc> parse_loc(std::string_view name) noexcept;

/// Register-budget ceiling shared by the manifest and the planner default.
inline constexpr int kMaxPassThrough = 3;

struct StencilKey {
  NodeKind kind = NodeKind::Literal;
  /// BinaryOp for Binary/BinaryVarConst, CompareOp for Compare/IfCmpVarConst.
  uint8_t op = 0;
  /// 0 = none/void, otherwise ValueType + 1.
  uint8_t type = 0;
  std::array<Loc, 3> locs{};
  uint8_t nlocs = 0;
  uint8_t pt = 0;
  bool spill = false;

  static constexpr size_t kBytes = 9;

  std::optional<ValueType> value_type() const noexcept {
    if (type == 0)
      return std::nullopt;
    return static_cast<ValueType>(type - 1);
  }
  void set_type(std::optional<ValueType> t) noexcept {
    type = t ? static_cast<uint8_t>(static_cast<uint8_t>(*t) + 1) : 0;
  }

  /// Canonical byte string; also the payload of the mangled symbol name.
  std::array<uint8_t, kBytes> bytes() const noexcept;
  static StencilKey from_bytes(std::span<const uint8_t> b);
  std::string hex() const;
  std::string symbol() const { return "__cp_stencil_" + hex(); }
  /// Human-readable, e.g. `Binary.Add.i32[Reg,Stack] pt=1 spill`.
  std::string describe() const;

  uint64_t pack() const noexcept;

  auto operator<=>(const StencilKey &o) const noexcept { return bytes() <=> o.bytes(); }
  bool operator==(const StencilKey &o) const noexcept { return bytes() == o.bytes(); }
};

struct StencilKeyHash {
  size_t operator()(const StencilKey &k) const noexcept {
    uint64_t x = k.pack() * 0x9E3779B97F4A7C15ull;
    return static_cast<size_t>(x ^ (x >> 29));
  }
};

struct HoleTarget {
  enum class Kind : uint8_t { Continuation = 0, Value = 1, External = 2 };
  Kind kind = Kind::Value;
  uint32_t ordinal = 0;
  std::string name;

  static HoleTarget cont(uint32_t n) { return {Kind::Continuation, n, {}}; }
  static HoleTarget value(uint32_t n) { return {Kind::Value, n, {}}; }
  static HoleTarget external(std::string s) { return {Kind::External, 0, std::move(s)}; }

  std::string describe() const;
  auto operator<=>(const HoleTarget &) const = default;
  bool operator==(const HoleTarget &) const = default;
};

struct PatchRecord {
  uint32_t offset = 0;
  uint8_t width = 32;
  bool subtract_site = false;
  bool add_target = true;
  int64_t addend = 0;
  HoleTarget target;

  bool operator==(const PatchRecord &) const = default;
};

struct TailSpan {
  uint32_t offset = 0;
  uint32_t length = 0;
  bool operator==(const TailSpan &) const = default;
};

struct Stencil {
  StencilKey key;
  std::vector<uint8_t> code;
  std::vector<PatchRecord> patches;
  std::optional<TailSpan> tail;

  uint32_t continuation_count() const noexcept;
  uint32_t value_count() const noexcept;
  size_t size(bool elide_tail) const noexcept {
    return code.size() - (elide_tail && tail ? tail->length : 0);
  }

  /// Checks bounds, overlap, ordinal density, width consistency and the
  /// tail-span shape; throws InvalidStencil.
  void validate() const;

  bool operator==(const Stencil &) const = default;
};

/// value = addend (+ target) (- (dest + site)), computed with wrap-around.
uint64_t patch_value(const PatchRecord &p, uint64_t dest, uint64_t target) noexcept;

/// Evaluates one patch and stores it at `code + p.offset`. `dest` is the
/// runtime address corresponding to `code`. Throws PatchOverflow.
void apply_patch(const PatchRecord &p, uint8_t *code, uint64_t dest, uint64_t target);

/// Dense hole-value tables indexed by ordinal, plus named externals.
struct HoleValues {
  std::span<const uint64_t> values;
  std::span<const uint64_t> continuations;
  const std::map<std::string, uint64_t, std::less<>> *externals = nullptr;

  std::optional<uint64_t> lookup(const HoleTarget &t) const noexcept;
};

/// Copies the stencil to `out` (which will live at `dest`) and patches every
/// hole. Patches inside an elided tail are skipped. Returns bytes written.
size_t materialize(const Stencil &s, uint64_t dest, const HoleValues &holes, bool elide_tail,
                   uint8_t *out);

/// Map-based convenience form.
std::vector<uint8_t> materialize(const Stencil &s, uint64_t dest,
                                 const std::map<HoleTarget, uint64_t> &holes, bool elide_tail);

class StencilLibrary {
public:
  static constexpr uint16_t kVersion = 1;
  static constexpr uint16_t kArchX86_64 = 1;

  explicit StencilLibrary(uint16_t arch = kArchX86_64) : arch_(arch) {}

  uint16_t arch() const noexcept { return arch_; }
  size_t size() const noexcept { return stencils_.size(); }
  bool empty() const noexcept { return stencils_.empty(); }

  /// Inserts or replaces.
  void insert(Stencil s);
  const Stencil *find(const StencilKey &k) const noexcept;
  /// Throws MissingVariant.
  const Stencil &select(const StencilKey &k) const;

  /// Stencils in canonical key order.
  std::vector<const Stencil *> sorted() const;
  size_t total_code_bytes() const noexcept;

  bool operator==(const StencilLibrary &o) const;

private:
  uint16_t arch_;
  std::unordered_map<StencilKey, Stencil, StencilKeyHash> stencils_;
};

std::vector<uint8_t> serialize(const StencilLibrary &lib);
/// Throws BadMagic, VersionMismatch, ArchMismatch (when `expect_arch` is set
/// and differs), TruncatedFile.
StencilLibrary deserialize(std::span<const uint8_t> bytes,
                           std::optional<uint16_t> expect_arch = StencilLibrary::kArchX86_64);

StencilLibrary load_library(const std::string &path);
/// Writes through a temporary file and renames, so readers never observe a
/// partial library.
void save_library(const StencilLibrary &lib, const std::string &path);

} // namespace cpc
