#pragma once

#include "cpc/codegen.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpc {

/// An mmap'd code region: writable until seal(), then read+execute.
class ExecRegion {
public:
  /// Throws OutOfMemory (mmap failed) or InvalidArgument (zero size).
  explicit ExecRegion(size_t capacity);
  ExecRegion(ExecRegion &&o) noexcept;
  ExecRegion &operator=(ExecRegion &&o) noexcept;
  ExecRegion(const ExecRegion &) = delete;
  ExecRegion &operator=(const ExecRegion &) = delete;
  ~ExecRegion();

  size_t capacity() const noexcept { return capacity_; }
  uint64_t address() const noexcept { return reinterpret_cast<uint64_t>(base_); }
  bool sealed() const noexcept { return sealed_; }
  const uint8_t *data() const noexcept { return base_; }

  /// Throws RegionSealed after seal().
  uint8_t *writable();
  EmitTarget target();
  /// Flips the pages to read+execute. Throws PlatformDenied.
  void seal();

private:
  uint8_t *base_ = nullptr;
  size_t capacity_ = 0;
  bool sealed_ = false;
};

/// Frame memory for generated code, aligned to its own (power-of-two) size
/// so the entry stencils can check for overflow with a single mask.
class FramePool {
public:
  /// Throws InvalidArgument unless `bytes` is a power of two >= 64.
  explicit FramePool(uint64_t bytes);
  FramePool(FramePool &&o) noexcept;
  FramePool &operator=(FramePool &&o) noexcept;
  FramePool(const FramePool &) = delete;
  FramePool &operator=(const FramePool &) = delete;
  ~FramePool();

  uint8_t *data() const noexcept { return data_; }
  uint64_t size() const noexcept { return size_; }

private:
  uint8_t *data_ = nullptr;
  uint64_t size_ = 0;
};

/// Host functions reachable from ExternalCall. Arguments arrive as 64-bit
/// slots; the result is written to slot 0. Returning false reports an error.
using HostFn = bool (*)(uint64_t *args);

class ExternalRegistry {
public:
  /// Throws DuplicateSymbol.
  void add(const std::string &name, HostFn fn);
  HostFn find(std::string_view name) const noexcept;
  std::map<std::string, uint64_t, std::less<>> addresses() const;
  size_t size() const noexcept { return fns_.size(); }

private:
  std::map<std::string, HostFn, std::less<>> fns_;
};

struct RunResult {
  Status status = Status::Ok;
  /// Set when status is Ok and the function returns a value.
  std::optional<Literal> value;

  bool operator==(const RunResult &) const = default;
};

std::string to_string(const RunResult &r);

/// Brings a raw 64-bit register value into the canonical form used by
/// Literal (sign-extended I32, Bool as 0/1).
Literal canonical_value(ValueType t, uint64_t raw) noexcept;

/// Throws UndefinedFunction or SignatureMismatch.
const Function &check_call(const Module &m, std::string_view name, std::span<const Literal> args);

class JitModule {
public:
  struct Options {
    CodegenOptions codegen;
    size_t initial_region_bytes = 4096;
  };

  /// Compiles every function, growing the region until the module fits,
  /// then links and seals it. Throws MissingVariant, UnresolvedExternal.
  static JitModule compile(const TypedModule &tm, const StencilLibrary &lib,
                           const ExternalRegistry &externals, const Options &opts);
  static JitModule compile(const TypedModule &tm, const StencilLibrary &lib,
                           const ExternalRegistry &externals) {
    return compile(tm, lib, externals, Options{});
  }

  RunResult invoke(std::string_view name, std::span<const Literal> args);

  const std::vector<CompiledFunction> &functions() const noexcept { return fns_; }
  const CompiledFunction &function(std::string_view name) const;
  size_t code_bytes() const noexcept { return code_bytes_; }
  const ExecRegion &region() const noexcept { return region_; }
  const FramePool &frames() const noexcept { return pool_; }

private:
  JitModule(Module m, ExecRegion r, FramePool p)
      : module_(std::move(m)), region_(std::move(r)), pool_(std::move(p)) {}

  Module module_;
  ExecRegion region_;
  FramePool pool_;
  std::vector<CompiledFunction> fns_;
  size_t code_bytes_ = 0;
};

} // namespace cpc
