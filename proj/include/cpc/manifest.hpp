#pragma once

#include "cpc/stencil.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cpc {

/// Drops every key whose listed fields all take one of the listed values.
/// Fields: op, type, loc0, loc1, loc2, pt, spill.
struct ExcludeFilter {
  std::vector<std::pair<std::string, std::vector<std::string>>> fields;
};

struct Generator {
  NodeKind kind = NodeKind::Literal;
  /// Without `has_ops` the kind has no operator and op is 0.
  std::vector<uint8_t> ops;
  bool has_ops = false;
  /// Entries are ValueType + 1; 0 encodes void.
  std::vector<uint8_t> types;
  /// One domain per operand position.
  std::vector<std::vector<Loc>> locations;
  int pt_lo = 0, pt_hi = 0;
  std::vector<bool> spill{false};
  std::vector<ExcludeFilter> excludes;
  /// Keeps keys with pt + max(register inputs, register outputs) <= budget.
  std::optional<int> register_budget;
  /// Extraction fails with NoTrailingJump when the stencil has no elidable tail.
  bool must_elide = false;
};

struct Manifest {
  std::vector<Generator> generators;
};

struct ExpandedKey {
  StencilKey key;
  bool must_elide = false;
  /// Preprocessor definitions (name, value) selecting the variant in the
  /// stencil sources.
  std::vector<std::pair<std::string, std::string>> defines;
  /// Source file relative to the stencil root, e.g. `stencils/binary.c`.
  std::string source;
};

/// Throws InvalidManifest.
Manifest parse_manifest(const std::string &json_text);
Manifest load_manifest(const std::string &path);

/// Sorted by key, duplicate-free. Throws EmptyExpansion when a generator
/// yields nothing or the manifest has no generators.
std::vector<ExpandedKey> expand(const Manifest &m);

/// Number of operands a key reads from registers and whether it leaves its
/// result in a register.
int register_inputs(const StencilKey &k) noexcept;
int register_outputs(const StencilKey &k) noexcept;

std::vector<std::pair<std::string, std::string>> compile_defines(const StencilKey &k);
std::string source_file_for(NodeKind k);

} // namespace cpc
