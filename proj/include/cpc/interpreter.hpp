#pragma once

#include "cpc/exec.hpp"

#include <functional>

namespace cpc {

/// Reference tree-walking evaluator. It reports the same statuses as
/// generated code, including frame overflow: frames are accounted with the
/// extents the code generator would compute under the same options.
class Interpreter {
public:
  Interpreter(const TypedModule &tm, const ExternalRegistry &externals,
              const CodegenOptions &opts = {});

  /// Throws UndefinedFunction, SignatureMismatch.
  RunResult run(std::string_view name, std::span<const Literal> args) const;

  uint32_t frame_size(uint32_t fn) const { return sizes_.at(fn); }
  uint32_t frame_extent(uint32_t fn) const { return extents_.at(fn); }

private:
  friend class InterpRun;
  Module module_;
  const ExternalRegistry &externals_;
  uint64_t pool_bytes_;
  std::vector<uint32_t> sizes_;
  std::vector<uint32_t> extents_;
};

/// Runs `fn` on a thread with a stack of `bytes`; deep recursion in the
/// interpreter or in generated code would exhaust a default thread stack.
void run_with_stack(size_t bytes, const std::function<void()> &fn);

} // namespace cpc
