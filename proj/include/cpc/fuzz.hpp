#pragma once

#include "cpc/exec.hpp"

#include <functional>

namespace cpc {

/// Random well-typed, terminating programs. Functions only call functions
/// defined before them and every loop runs a literal number of times, so
/// evaluation always ends. The last function is the entry point.
///
/// `size_budget` bounds the number of statements; the result is a pure
/// function of (seed, size_budget).
Module gen_program(uint64_t seed, int size_budget);

/// Small deterministic arguments for `fn`'s parameters.
std::vector<Literal> gen_args(const Function &fn, uint64_t seed);

/// Outcome equality for differential testing; any two NaNs are equal.
bool same_outcome(const RunResult &a, const RunResult &b);

/// Host functions used by generated programs and the benchmarks:
/// `alloc(i64) -> ptr` (zeroed bytes) and `release(ptr)`.
void register_standard_externals(ExternalRegistry &reg);

/// Greedy reduction: repeatedly deletes single statements
/// while `still_fails` holds for the typechecked candidate.
Module minimize(const Module &m, const std::function<bool(const Module &)> &still_fails);

} // namespace cpc
