#include "cpc/bench.hpp"

#include "cpc/frontend.hpp"
#include "cpc/fuzz.hpp"
#include "cpc/interpreter.hpp"
#include "cpc/mock.hpp"

#include <json.hpp>

#include <malloc.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cpc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json sample_json(const Sample &s) {
  return {{"reps", s.reps}, {"mean_us", s.mean_us}, {"ci95_us", s.ci95_us}, {"min_us", s.min_us}};
}

// The benchmarks allocate megabytes per run. By default glibc maps and
// unmaps those blocks every time, so each repetition pays fresh page faults
// and the timings scatter. Keep them on the heap instead.
void keep_large_blocks_on_heap() {
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)done;
}

} // namespace

Sample measure(const std::function<void()> &fn, int reps) {
  fn();
  std::vector<double> t;
  t.reserve(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    auto a = Clock::now();
    fn();
    t.push_back(elapsed_us(a, Clock::now()));
  }
  Sample s;
  s.reps = t.size();
  if (t.empty())
    return s;
  s.mean_us = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  s.min_us = *std::min_element(t.begin(), t.end());
  if (t.size() > 1) {
    double var = 0;
    for (double x : t)
      var += (x - s.mean_us) * (x - s.mean_us);
    var /= static_cast<double>(t.size() - 1);
    s.ci95_us = 1.96 * std::sqrt(var / static_cast<double>(t.size()));
  }
  return s;
}

std::vector<MicroBenchmark> micro_suite() {
  return {
      {"fib", "fib.cpl", "fib", {lit_i32(30)}},
      {"sieve", "sieve.cpl", "sieve", {lit_i64(2000000)}},
      {"quicksort", "quicksort.cpl", "quicksort", {lit_i64(300000)}},
  };
}

BenchReport run_benchmark(const MicroBenchmark &b, const StencilLibrary &lib,
                          const BenchOptions &opts) {
  keep_large_blocks_on_heap();
  BenchReport r;
  r.name = b.name;
  std::string src = read_file((std::filesystem::path(opts.bench_dir) / b.file).string());

  auto t0 = Clock::now();
  TypedModule tm = typecheck(parse(src));
  r.ast_build_us = elapsed_us(t0, Clock::now());

  ExternalRegistry ext;
  register_standard_externals(ext);
  JitModule::Options jo;
  jo.codegen = opts.codegen;
  r.compile = measure([&] { (void)JitModule::compile(tm, lib, ext, jo); }, opts.reps);

  JitModule jm = JitModule::compile(tm, lib, ext, jo);
  for (const auto &f : jm.functions()) {
    r.retained_jumps += f.retained_jumps;
    r.spills += f.spills;
  }
  r.emitted_bytes = jm.code_bytes();

  Interpreter interp(tm, ext, opts.codegen);
  RunResult ir, jr;
  r.interp = measure([&] { ir = interp.run(b.entry, b.args); }, opts.reps);
  r.jit = measure([&] { jr = jm.invoke(b.entry, b.args); }, opts.reps);
  r.result = to_string(jr);
  r.results_agree = ir == jr;
  return r;
}

std::string to_json(const BenchReport &r, const BenchOptions &opts) {
  nlohmann::json j = {
      {"schema", 1},
      {"benchmark", r.name},
      {"result", r.result},
      {"results_agree", r.results_agree},
      {"register_budget", opts.codegen.register_budget},
      {"supernodes", opts.codegen.enable_supernodes},
      {"jump_elision", opts.codegen.enable_jump_elision},
      {"ast_build_us", r.ast_build_us},
      {"compile", sample_json(r.compile)},
      {"interpret", sample_json(r.interp)},
      {"jit", sample_json(r.jit)},
      {"speedup", r.speedup()},
      {"retained_jumps", r.retained_jumps},
      {"spills", r.spills},
      {"emitted_bytes", r.emitted_bytes},
  };
  return j.dump();
}

Function scaling_function(int n) {
  std::string src = "fn scale() -> i64 {\n  let a: i64 = 0;\n  let b: i64 = 1;\n";
  for (int i = 0; i < n; ++i)
    src += "  a = a + b;\n";
  src += "  return a;\n}\n";
  return typecheck(parse(src)).function(0);
}

std::vector<ScalingPoint> run_scaling(const std::vector<int> &sizes, int reps,
                                      const CodegenOptions &opts) {
  std::vector<ScalingPoint> out;
  for (int n : sizes) {
    Function f = scaling_function(n);
    StencilLibrary lib;
    add_mock_stencils(f, opts, lib);
    std::vector<uint8_t> buf(64 + static_cast<size_t>(n) * 256);
    ScalingPoint p;
    p.statements = n;
    p.compile = measure(
        [&] {
          EmitTarget t{buf.data(), 0x10000000, buf.size(), 0};
          (void)compile_function(f, lib, t, opts);
        },
        reps);
    p.per_statement_ns = p.compile.mean_us * 1000.0 / n;
    out.push_back(p);
  }
  return out;
}

} // namespace cpc
