#pragma once

#include "cpc/ast.hpp"
#include "cpc/error.hpp"

namespace cpc {

/// Type error with the path of the offending node, e.g. `fib/body[1]/return/lhs`.
class TypeError : public Error {
public:
  TypeError(ErrorCode code, std::string path, const std::string &message)
      : Error(code, path + ": " + message), path_(std::move(path)) {}

  const std::string &path() const noexcept { return path_; }

private:
  std::string path_;
};

/// A module that passed typecheck. Every value-producing Expr carries its
/// resolved type, `&&`/`||`/`!` are lowered away, and locals are numbered in
/// declaration order (params first).
class TypedModule {
public:
  const Module &module() const noexcept { return module_; }
  const Function &function(uint32_t i) const { return module_.functions.at(i); }

private:
  friend TypedModule typecheck(const Module &);
  explicit TypedModule(Module m) : module_(std::move(m)) {}
  Module module_;
};

TypedModule typecheck(const Module &module);

/// True when every control path through `body` ends in a Return.
bool always_returns(const StmtList &body);

} // namespace cpc
