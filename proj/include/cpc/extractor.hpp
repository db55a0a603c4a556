#pragma once

#include "cpc/manifest.hpp"
#include "cpc/stencil.hpp"

#include <set>
#include <span>
#include <string>
#include <vector>

namespace cpc {

struct ObjSymbol {
  std::string name;
  uint16_t section = 0; // SHN_UNDEF (0) for external references
  uint64_t value = 0;
  uint64_t size = 0;
  uint8_t type = 0;
  uint8_t bind = 0;
};

struct ObjReloc {
  uint64_t offset = 0;
  uint32_t type = 0;
  uint32_t symbol = 0;
  int64_t addend = 0;
};

struct ObjSection {
  std::string name;
  uint32_t type = 0;
  uint64_t flags = 0;
  std::vector<uint8_t> data;
  std::vector<ObjReloc> relocs;
};

/// A parsed ELF64 little-endian x86-64 relocatable object.
class ObjectImage {
public:
  /// Throws BadObjectFile.
  static ObjectImage parse(std::span<const uint8_t> bytes);
  static ObjectImage load(const std::string &path);

  const std::vector<ObjSection> &sections() const noexcept { return sections_; }
  const std::vector<ObjSymbol> &symbols() const noexcept { return symbols_; }
  const ObjSymbol *find_symbol(std::string_view name) const noexcept;

private:
  std::vector<ObjSection> sections_;
  std::vector<ObjSymbol> symbols_;
};

struct ExtractOptions {
  bool must_elide = false;
  /// Names that may appear as relocation targets besides holes; they become
  /// ExternalSymbol patch targets bound at link time.
  std::set<std::string, std::less<>> runtime_symbols;
};

/// Throws UnknownSymbol, UnknownRelocationKind, HoleOutOfCode,
/// NonTailContinuation, NoTrailingJump, BadObjectFile.
Stencil extract(const ObjectImage &obj, const StencilKey &key, const ExtractOptions &opts = {});

struct Toolchain {
  std::string compiler = "clang";
  /// Fixed code-generation flags; deterministic output depends on them.
  static std::vector<std::string> default_flags();
};

/// Compiles `<source_root>/<entry.source>` with the key's definitions into
/// `object_path`. Throws ToolchainMissing, CompileFailed.
ObjectImage compile_stencil(const ExpandedKey &entry, const std::string &source_root,
                            const Toolchain &tc, const std::string &object_path);

struct BuildOptions {
  Toolchain toolchain;
  unsigned jobs = 1;
  /// When non-empty, object files are kept here instead of a temp dir.
  std::string keep_objects;
  std::set<std::string, std::less<>> runtime_symbols;
};

struct BuildSummary {
  size_t stencils = 0;
  size_t code_bytes = 0;
  size_t elidable = 0;
};

/// Builds the library in memory; nothing is written on failure.
StencilLibrary build_library(const Manifest &manifest, const std::string &source_root,
                             const BuildOptions &opts, BuildSummary *summary = nullptr);

/// Builds and atomically writes `out_path`.
BuildSummary build_library_file(const Manifest &manifest, const std::string &source_root,
                                const std::string &out_path, const BuildOptions &opts);

} // namespace cpc
