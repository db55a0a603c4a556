#pragma once

#include "cpc/codegen.hpp"
#include "cpc/manifest.hpp"

namespace cpc {

/// A synthetic stencil with the hole layout the code generator expects for
/// `key`: one instruction per value hole, a `jcc` per continuation beyond
/// the first, and a trailing elidable `jmp` to continuation 0 (Return ends
/// in `ret`). The bytes are never meant to run.
Stencil mock_stencil(const StencilKey &key);

/// Mock stencils for every key of an expanded manifest.
StencilLibrary mock_library(const std::vector<ExpandedKey> &keys);

/// Mock stencils for exactly the keys `fn` selects under `opts`.
void add_mock_stencils(const Function &fn, const CodegenOptions &opts, StencilLibrary &lib);

} // namespace cpc
