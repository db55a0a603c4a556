#pragma once

#include "cpc/ast.hpp"
#include "cpc/error.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace cpc {

struct SourceSpan {
  size_t start = 0;
  size_t end = 0;
  uint32_t line = 1;
  uint32_t column = 1;
};

class SyntaxError : public Error {
public:
  SyntaxError(SourceSpan span, std::vector<std::string> expected, const std::string &found);

  const SourceSpan &span() const noexcept { return span_; }
  const std::vector<std::string> &expected() const noexcept { return expected_; }

private:
  SourceSpan span_;
  std::vector<std::string> expected_;
};

/// Parses `.cpl` source. Locals are numbered params first, then in textual
/// order of their `let`.
Module parse(std::string_view text);

/// Pretty-prints a module so that parse(print(m)) is structurally equal to m.
/// Throws InvalidArgument for literals with no textual form (non-finite F64,
/// Ptr constants).
std::string print(const Module &module);

} // namespace cpc
