#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cpc {

enum class ErrorCode : uint8_t {
  // lang-ast / frontend
  SyntaxError,
  TypeMismatch,
  UndefinedLocal,
  UndefinedFunction,
  MissingReturn,
  // stencil-model
  MissingVariant,
  PatchOverflow,
  MissingHoleValue,
  BadMagic,
  VersionMismatch,
  ArchMismatch,
  TruncatedFile,
  InvalidStencil,
  // stencil-extractor
  InvalidManifest,
  EmptyExpansion,
  ToolchainMissing,
  CompileFailed,
  BadObjectFile,
  UnknownRelocationKind,
  UnknownSymbol,
  HoleOutOfCode,
  NoTrailingJump,
  NonTailContinuation,
  // codegen / exec-runtime
  EmitOverflow,
  UnresolvedExternal,
  DuplicateSymbol,
  OutOfMemory,
  PlatformDenied,
  RegionSealed,
  SignatureMismatch,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library surfaces as a cpc::Error carrying a code so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Thrown by emit() when the target region is too small; carries the byte
/// count the caller must provide before retrying.
class EmitOverflowError : public Error {
public:
  explicit EmitOverflowError(size_t needed)
      : Error(ErrorCode::EmitOverflow,
              "region needs " + std::to_string(needed) + " bytes"),
        needed_(needed) {}

  size_t needed() const noexcept { return needed_; }

private:
  size_t needed_;
};

} // namespace cpc
