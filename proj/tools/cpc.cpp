#include "cpc/bench.hpp"
#include "cpc/frontend.hpp"
#include "cpc/fuzz.hpp"
#include "cpc/interpreter.hpp"
#include "cpc/mock.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef CPC_SOURCE_DIR
#define CPC_SOURCE_DIR "."
#endif

namespace {

using namespace cpc;

struct Common {
  std::string lib_path;
  bool mock = false;
  int budget = kMaxPassThrough;
  bool no_supernodes = false;
  bool no_elision = false;

  CodegenOptions codegen() const {
    CodegenOptions o;
    o.register_budget = budget;
    o.enable_supernodes = !no_supernodes;
    o.enable_jump_elision = !no_elision;
    return o;
  }

  std::string resolved_lib() const {
    if (!lib_path.empty())
      return lib_path;
    if (const char *env = std::getenv("CP_STENCIL_LIB"))
      return env;
    return {};
  }
};

void add_common(CLI::App *sub, Common &c) {
  sub->add_option("--lib", c.lib_path, "stencil library (default: $CP_STENCIL_LIB)");
  sub->add_option("-K,--register-budget", c.budget, "register budget")
      ->check(CLI::Range(0, kMaxPassThrough));
  sub->add_flag("--no-supernodes", c.no_supernodes, "disable supernode matching");
  sub->add_flag("--no-elision", c.no_elision, "keep every continuation jump");
}

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

StencilLibrary require_library(const Common &c) {
  std::string p = c.resolved_lib();
  if (p.empty())
    throw Error(ErrorCode::InvalidArgument, "no stencil library: pass --lib or set CP_STENCIL_LIB");
  return load_library(p);
}

// Compiling never calls host functions, so undeclared ones get a stub.
bool stub_host(uint64_t *) { return false; }

ExternalRegistry externals_for(const Module &m, bool stub_missing) {
  ExternalRegistry reg;
  register_standard_externals(reg);
  if (stub_missing)
    for (const auto &e : m.externs)
      if (!reg.find(e.name))
        reg.add(e.name, stub_host);
  return reg;
}

Literal parse_arg(ValueType t, const std::string &s) {
  try {
    switch (t) {
    case ValueType::I32: return lit_i32(static_cast<int32_t>(std::stol(s)));
    case ValueType::I64: return lit_i64(std::stoll(s));
    case ValueType::F64: return lit_f64(std::stod(s));
    case ValueType::Bool:
      if (s == "true" || s == "false")
        return lit_bool(s == "true");
      break;
    case ValueType::Ptr: break;
    }
  } catch (const std::exception &) {
  }
  throw Error(ErrorCode::InvalidArgument,
              "cannot pass '" + s + "' as " + std::string(to_string(t)));
}

void print_hex(const uint8_t *p, size_t n) {
  for (size_t i = 0; i < n; i += 16) {
    std::printf("  %06zx ", i);
    for (size_t j = i; j < std::min(n, i + 16); ++j)
      std::printf(" %02x", p[j]);
    std::printf("\n");
  }
}

int cmd_compile(const Common &c, const std::string &file, const std::string &emit) {
  TypedModule tm = typecheck(parse(read_file(file)));
  const Module &m = tm.module();
  CodegenOptions opts = c.codegen();

  StencilLibrary lib;
  if (c.mock) {
    for (const auto &f : m.functions)
      add_mock_stencils(f, opts, lib);
  } else if (emit != "graph" || !c.resolved_lib().empty()) {
    lib = require_library(c);
  }

  if (emit == "graph") {
    const StencilLibrary *check = (c.mock || !c.resolved_lib().empty()) ? &lib : nullptr;
    for (const auto &f : m.functions) {
      LoweredFunction lf = lower_function(f, opts);
      RegPlan plan = plan_registers(lf, opts.register_budget);
      FrameLayout layout = layout_frame(f, lf, plan);
      std::cout << "fn " << f.name << "\n" << build_cps_graph(lf, plan, layout, check, opts).describe();
    }
    return 0;
  }

  JitModule::Options jo;
  jo.codegen = opts;
  JitModule jm = JitModule::compile(tm, lib, externals_for(m, c.mock), jo);
  if (emit == "hex") {
    for (const auto &f : jm.functions()) {
      std::printf("%s: %u bytes, entry +%u\n", f.name.c_str(), f.length, f.entry_offset);
      print_hex(jm.region().data() + (f.base - jm.region().address()), f.length);
    }
    return 0;
  }
  nlohmann::json fns = nlohmann::json::array();
  for (const auto &f : jm.functions())
    fns.push_back({{"name", f.name},
                   {"bytes", f.length},
                   {"stencils", f.spans.size()},
                   {"retained_jumps", f.retained_jumps},
                   {"spills", f.spills},
                   {"frame_extent", f.frame_extent}});
  nlohmann::json report = {{"code_bytes", jm.code_bytes()},
                           {"register_budget", opts.register_budget},
                           {"supernodes", opts.enable_supernodes},
                           {"jump_elision", opts.enable_jump_elision},
                           {"functions", fns}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_run(const Common &c, const std::string &file, const std::string &fn,
            const std::vector<std::string> &raw, const std::string &tier) {
  TypedModule tm = typecheck(parse(read_file(file)));
  const Module &m = tm.module();
  const Function *f = m.find_function(fn);
  if (!f)
    throw Error(ErrorCode::UndefinedFunction, "no function '" + fn + "'");
  if (raw.size() != f->param_count)
    throw Error(ErrorCode::SignatureMismatch, fn + " takes " + std::to_string(f->param_count) +
                                                  " arguments, got " + std::to_string(raw.size()));
  std::vector<Literal> args;
  for (size_t i = 0; i < raw.size(); ++i)
    args.push_back(parse_arg(f->param_type(static_cast<uint32_t>(i)), raw[i]));

  ExternalRegistry ext = externals_for(m, false);
  RunResult r;
  if (tier == "interp") {
    Interpreter interp(tm, ext, c.codegen());
    run_with_stack(size_t{256} << 20, [&] { r = interp.run(fn, args); });
  } else {
    JitModule::Options jo;
    jo.codegen = c.codegen();
    JitModule jm = JitModule::compile(tm, require_library(c), ext, jo);
    r = jm.invoke(fn, args);
  }
  std::cout << to_string(r) << "\n";
  return r.status == Status::Ok ? 0 : 2;
}

// Either a run result or the error a tier raised, rendered for comparison.
std::string outcome(const std::function<RunResult()> &f, RunResult &out) {
  try {
    out = f();
    return {};
  } catch (const Error &e) {
    return std::string(to_string(e.code())) + ": " + e.what();
  }
}

bool tiers_disagree(const Module &m, const StencilLibrary &lib, const CodegenOptions &opts,
                    uint64_t seed, std::string *detail) {
  TypedModule tm = typecheck(m);
  ExternalRegistry ext = externals_for(m, false);
  const Function &entry = tm.module().functions.back();
  std::vector<Literal> args = gen_args(entry, seed);
  RunResult ir, jr;
  std::string ie, je;
  Interpreter interp(tm, ext, opts);
  run_with_stack(size_t{64} << 20,
                 [&] { ie = outcome([&] { return interp.run(entry.name, args); }, ir); });
  je = outcome(
      [&] {
        JitModule::Options jo;
        jo.codegen = opts;
        return JitModule::compile(tm, lib, ext, jo).invoke(entry.name, args);
      },
      jr);
  bool differ = !ie.empty() || !je.empty() ? ie != je : !same_outcome(ir, jr);
  if (differ && detail)
    *detail = "interp: " + (ie.empty() ? to_string(ir) : ie) +
              "\njit:    " + (je.empty() ? to_string(jr) : je);
  return differ;
}

int cmd_fuzz(const Common &c, uint64_t seed, int count, int max_stmts) {
  StencilLibrary lib = require_library(c);
  CodegenOptions opts = c.codegen();
  int failures = 0;
  for (int i = 0; i < count; ++i) {
    uint64_t s = seed + static_cast<uint64_t>(i);
    Module m = gen_program(s, max_stmts);
    std::string detail;
    if (!tiers_disagree(m, lib, opts, s, &detail))
      continue;
    ++failures;
    Module small = minimize(m, [&](const Module &cand) {
      return tiers_disagree(cand, lib, opts, s, nullptr);
    });
    tiers_disagree(small, lib, opts, s, &detail);
    std::string shown;
    for (const auto &a : gen_args(small.functions.back(), s))
      shown += " " + to_string(RunResult{Status::Ok, a});
    std::cout << "seed " << s << ": tiers disagree\n"
              << detail << "\nreproducer, run " << small.functions.back().name << shown
              << ":\n" << print(small) << "\n";
  }
  std::cout << count << " programs, " << failures << " disagreements\n";
  return failures ? 1 : 0;
}

int cmd_bench(const Common &c, const std::string &suite, const std::string &out_path,
              int reps, const std::string &bench_dir) {
  std::vector<std::string> lines;
  if (suite == "micro") {
    StencilLibrary lib = require_library(c);
    BenchOptions bo;
    bo.reps = reps;
    bo.codegen = c.codegen();
    bo.bench_dir = bench_dir;
    for (const auto &b : micro_suite()) {
      BenchReport r = run_benchmark(b, lib, bo);
      lines.push_back(to_json(r, bo));
      std::cout << lines.back() << "\n" << std::flush;
    }
  } else {
    for (const auto &p : run_scaling({100, 1000, 5000, 10000}, reps, c.codegen())) {
      nlohmann::json j = {{"schema", 1},
                          {"suite", "scaling"},
                          {"statements", p.statements},
                          {"compile_mean_us", p.compile.mean_us},
                          {"compile_ci95_us", p.compile.ci95_us},
                          {"reps", p.compile.reps},
                          {"per_statement_ns", p.per_statement_ns}};
      lines.push_back(j.dump());
      std::cout << lines.back() << "\n";
    }
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out)
      throw Error(ErrorCode::IoError, "cannot write " + out_path);
    for (const auto &l : lines)
      out << l << "\n";
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Copy-and-patch compiler for .cpl programs"};
  app.require_subcommand(1);
  Common common;

  std::string file, emit = "report";
  auto *compile = app.add_subcommand("compile", "compile a module and print its code");
  compile->add_option("file", file)->required();
  compile->add_option("--emit", emit)->check(CLI::IsMember({"graph", "hex", "report"}));
  compile->add_flag("--mock", common.mock, "use synthetic stencils (code is not runnable)");
  add_common(compile, common);

  std::string fn, tier = "jit";
  std::vector<std::string> args;
  auto *run = app.add_subcommand("run", "run a function");
  run->add_option("file", file)->required();
  run->add_option("function", fn)->required();
  run->add_option("args", args);
  run->add_option("--tier", tier)->check(CLI::IsMember({"jit", "interp"}));
  add_common(run, common);

  uint64_t seed = 1;
  int count = 100, max_stmts = 40;
  auto *fuzz = app.add_subcommand("fuzz", "differential test of interpreter and compiled code");
  fuzz->add_option("--seed", seed);
  fuzz->add_option("--count", count);
  fuzz->add_option("--max-stmts", max_stmts);
  add_common(fuzz, common);

  std::string suite = "micro", out_path, bench_dir = CPC_SOURCE_DIR "/bench";
  int reps = 30;
  auto *bench = app.add_subcommand("bench", "run a benchmark suite");
  bench->add_option("--suite", suite)->check(CLI::IsMember({"micro", "scaling"}));
  bench->add_option("--out", out_path, "also write JSON lines here");
  bench->add_option("--reps", reps)->check(CLI::PositiveNumber);
  bench->add_option("--bench-dir", bench_dir);
  add_common(bench, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile)
      return cmd_compile(common, file, emit);
    if (*run)
      return cmd_run(common, file, fn, args, tier);
    if (*fuzz)
      return cmd_fuzz(common, seed, count, max_stmts);
    return cmd_bench(common, suite, out_path, reps, bench_dir);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
