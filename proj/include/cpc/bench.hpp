#pragma once

#include "cpc/exec.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cpc {

struct Sample {
  size_t reps = 0;
  double mean_us = 0;
  double ci95_us = 0; // half-width of the 95% confidence interval
  double min_us = 0;
};

/// Times `fn` `reps` times after one warm-up call, using a monotonic clock.
Sample measure(const std::function<void()> &fn, int reps);

struct MicroBenchmark {
  std::string name;
  std::string file; // relative to the benchmark directory
  std::string entry;
  std::vector<Literal> args;
};

/// Fibonacci, Euler's sieve and quicksort, sized for a desktop.
std::vector<MicroBenchmark> micro_suite();

struct BenchOptions {
  int reps = 30;
  CodegenOptions codegen;
  std::string bench_dir = "bench";
};

struct BenchReport {
  std::string name;
  std::string result;
  bool results_agree = false;
  double ast_build_us = 0; // parse + typecheck
  Sample compile;          // JIT compile of the typed module
  Sample interp;
  Sample jit;
  uint32_t retained_jumps = 0;
  uint32_t spills = 0;
  size_t emitted_bytes = 0;
  double speedup() const { return jit.mean_us > 0 ? interp.mean_us / jit.mean_us : 0; }
};

BenchReport run_benchmark(const MicroBenchmark &b, const StencilLibrary &lib,
                          const BenchOptions &opts);

/// One JSON object (schema 1).
std::string to_json(const BenchReport &r, const BenchOptions &opts);

/// `fn scale() -> i64` with n statements `a = a + b;`.
Function scaling_function(int n);

struct ScalingPoint {
  int statements = 0;
  Sample compile;
  double per_statement_ns = 0;
};

/// Compile time of scaling_function(n) for each n, emitted with mock
/// stencils (library construction is not timed).
std::vector<ScalingPoint> run_scaling(const std::vector<int> &sizes, int reps,
                                      const CodegenOptions &opts = {});

} // namespace cpc
