#include "cpc/ast.hpp"
#include "cpc/error.hpp"

#include <bit>

namespace cpc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::SyntaxError: return "SyntaxError";
  case ErrorCode::TypeMismatch: return "TypeMismatch";
  case ErrorCode::UndefinedLocal: return "UndefinedLocal";
  case ErrorCode::UndefinedFunction: return "UndefinedFunction";
  case ErrorCode::MissingReturn: return "MissingReturn";
  case ErrorCode::MissingVariant: return "MissingVariant";
  case ErrorCode::PatchOverflow: return "PatchOverflow";
  case ErrorCode::MissingHoleValue: return "MissingHoleValue";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::VersionMismatch: return "VersionMismatch";
  case ErrorCode::ArchMismatch: return "ArchMismatch";
  case ErrorCode::TruncatedFile: return "TruncatedFile";
  case ErrorCode::InvalidStencil: return "InvalidStencil";
  case ErrorCode::InvalidManifest: return "InvalidManifest";
  case ErrorCode::EmptyExpansion: return "EmptyExpansion";
  case ErrorCode::ToolchainMissing: return "ToolchainMissing";
  case ErrorCode::CompileFailed: return "CompileFailed";
  case ErrorCode::BadObjectFile: return "BadObjectFile";
  case ErrorCode::UnknownRelocationKind: return "UnknownRelocationKind";
  case ErrorCode::UnknownSymbol: return "UnknownSymbol";
  case ErrorCode::HoleOutOfCode: return "HoleOutOfCode";
  case ErrorCode::NoTrailingJump: return "NoTrailingJump";
  case ErrorCode::NonTailContinuation: return "NonTailContinuation";
  case ErrorCode::EmitOverflow: return "EmitOverflow";
  case ErrorCode::UnresolvedExternal: return "UnresolvedExternal";
  case ErrorCode::DuplicateSymbol: return "DuplicateSymbol";
  case ErrorCode::OutOfMemory: return "OutOfMemory";
  case ErrorCode::PlatformDenied: return "PlatformDenied";
  case ErrorCode::RegionSealed: return "RegionSealed";
  case ErrorCode::SignatureMismatch: return "SignatureMismatch";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(ValueType t) noexcept {
  switch (t) {
  case ValueType::I32: return "i32";
  case ValueType::I64: return "i64";
  case ValueType::F64: return "f64";
  case ValueType::Bool: return "bool";
  case ValueType::Ptr: return "ptr";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) noexcept {
  switch (op) {
  case BinaryOp::Add: return "Add";
  case BinaryOp::Sub: return "Sub";
  case BinaryOp::Mul: return "Mul";
  case BinaryOp::Div: return "Div";
  case BinaryOp::Mod: return "Mod";
  }
  return "?";
}

std::string_view to_string(CompareOp op) noexcept {
  switch (op) {
  case CompareOp::Eq: return "Eq";
  case CompareOp::Ne: return "Ne";
  case CompareOp::Lt: return "Lt";
  case CompareOp::Le: return "Le";
  case CompareOp::Gt: return "Gt";
  case CompareOp::Ge: return "Ge";
  }
  return "?";
}

std::optional<ValueType> parse_value_type(std::string_view name) noexcept {
  for (int i = 0; i < kValueTypeCount; ++i) {
    auto t = static_cast<ValueType>(i);
    if (to_string(t) == name)
      return t;
  }
  return std::nullopt;
}

size_t storage_size(ValueType t) noexcept {
  switch (t) {
  case ValueType::I32: return 4;
  case ValueType::Bool: return 1;
  default: return 8;
  }
}

const Function *Module::find_function(std::string_view name) const noexcept {
  for (const auto &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

const ExternDecl *Module::find_extern(std::string_view name) const noexcept {
  for (const auto &e : externs)
    if (e.name == name)
      return &e;
  return nullptr;
}

std::optional<uint32_t> Module::function_index(std::string_view name) const noexcept {
  for (size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name)
      return static_cast<uint32_t>(i);
  return std::nullopt;
}

Literal lit_i32(int32_t v) noexcept {
  return {ValueType::I32, static_cast<uint64_t>(static_cast<int64_t>(v))};
}
Literal lit_i64(int64_t v) noexcept { return {ValueType::I64, static_cast<uint64_t>(v)}; }
Literal lit_f64(double v) noexcept { return {ValueType::F64, std::bit_cast<uint64_t>(v)}; }
Literal lit_bool(bool v) noexcept { return {ValueType::Bool, v ? 1u : 0u}; }

double literal_as_f64(const Literal &l) noexcept { return std::bit_cast<double>(l.bits); }

namespace {

// Structural comparison runs on copies with annotations and names erased.
void strip(Expr &e);

void strip(StmtList &body);

void strip(Expr &e) {
  e.type.reset();
  std::visit(
      [](auto &n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Binary> || std::is_same_v<N, Compare> ||
                      std::is_same_v<N, Logical>) {
          strip(*n.lhs);
          strip(*n.rhs);
        } else if constexpr (std::is_same_v<N, Not>) {
          strip(*n.operand);
        } else if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, ExternalCall>) {
          for (auto &a : n.args)
            strip(a);
        } else if constexpr (std::is_same_v<N, ArrayIndex>) {
          strip(*n.base);
          strip(*n.index);
        }
      },
      e.node);
}

void strip(StmtList &body) {
  for (auto &s : body) {
    std::visit(
        [](auto &n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Declare>) {
            if (n.init)
              strip(*n.init);
          } else if constexpr (std::is_same_v<N, Assign>) {
            strip(n.target);
            strip(n.value);
          } else if constexpr (std::is_same_v<N, If>) {
            strip(n.cond);
            strip(n.then_body);
            strip(n.else_body);
          } else if constexpr (std::is_same_v<N, While>) {
            strip(n.cond);
            strip(n.body);
          } else if constexpr (std::is_same_v<N, Return>) {
            if (n.value)
              strip(*n.value);
          } else if constexpr (std::is_same_v<N, ExprStmt>) {
            strip(n.expr);
          } else if constexpr (std::is_same_v<N, Block>) {
            strip(n.body);
          }
        },
        s.node);
  }
}

Module stripped(Module m) {
  for (auto &f : m.functions) {
    for (auto &l : f.locals)
      l.name.clear();
    strip(f.body);
  }
  return m;
}

} // namespace

bool structurally_equal(const Module &a, const Module &b) {
  return stripped(a) == stripped(b);
}

} // namespace cpc
