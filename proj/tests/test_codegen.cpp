#include "doctest.h"

#include "oracles.hpp"

using namespace cpc;

namespace {

TypedModule typed(const std::string &src) { return typecheck(parse(src)); }

size_t count_kind(const CPSGraph &g, NodeKind k) {
  size_t n = 0;
  for (int i : g.order)
    n += g.nodes[static_cast<size_t>(i)].key.kind == k;
  return n;
}

CPSGraph graph_of(const Function &f, const CodegenOptions &opts = {}) {
  LoweredFunction lf = lower_function(f, opts);
  RegPlan plan = plan_registers(lf, opts.register_budget);
  FrameLayout fl = layout_frame(f, lf, plan);
  return build_cps_graph(lf, plan, fl, nullptr, opts);
}

} // namespace

TEST_CASE("planner matches the brute-force simulator on small trees") {
  auto r = oracle::planner_vs_brute_force(7);
  CAPTURE(r.detail);
  CHECK(r.ok);
  CHECK(r.cases > 1000);
}

TEST_CASE("planner matches the simulator on larger random trees") {
  auto r = oracle::planner_random(2000, 5);
  CAPTURE(r.detail);
  CHECK(r.ok);
}

TEST_CASE("fib spills only the first call's result") {
  auto [spilled, first_call] = oracle::fib_spills();
  REQUIRE(first_call != UINT32_MAX);
  REQUIRE(spilled.size() == 1);
  CHECK(spilled[0] == first_call);
}

TEST_CASE("left-deep add chain with K=2") {
  auto tm = typed("fn f(a: i64, b: i64) -> i64 { return g(a) + (b + (a + (b + (a + (b + a))))); }\n"
                  "fn g(x: i64) -> i64 { return x; }");
  // Right-nested adds keep one temp per level: with K=2 the deeper levels
  // push the outer ones out of registers.
  LoweredFunction lf = lower_function(tm.function(0));
  RegPlan k2 = plan_registers(lf, 2);
  RegPlan k3 = plan_registers(lf, 3);
  CHECK(k2.spill_count() >= k3.spill_count());
  for (auto pt : k2.pass_through)
    CHECK(pt <= 2);
  for (auto pt : k3.pass_through)
    CHECK(pt <= 3);
}

TEST_CASE("single literal never spills") {
  auto tm = typed("fn f() -> i64 { return 7i64; }");
  for (int k = 0; k <= 3; ++k)
    CHECK(plan_registers(tm.function(0), k).spill_count() == (k == 0 ? 1u : 0u));
}

TEST_CASE("frame reuse has no overlapping live slots") {
  auto r = oracle::frame_reuse(1000, 1);
  CAPTURE(r.detail);
  CHECK(r.ok);
  CHECK(r.cases == 1000);
}

TEST_CASE("frame layout examples") {
  auto fib = typed(oracle::kFibSource);
  const Function &f = fib.function(0);
  FrameLayout fl = layout_frame(f, plan_registers(f, 3));
  CHECK(fl.size == 16);
  CHECK(fl.spill_slots == 1);
  CHECK(fl.local_offset[0] != fl.spill_offset[*std::find_if(
                                  fl.spill_offset.begin(), fl.spill_offset.end(),
                                  [](uint32_t o) { return o != UINT32_MAX; })]);

  auto empty = typed("fn f() { return; }");
  CHECK(layout_frame(empty.function(0), plan_registers(empty.function(0), 3)).size == 0);

  // Two calls in separate statements: their spilled results never overlap.
  auto two = typed("fn g() -> i64 { return 1i64; }\n"
                   "fn f() -> i64 { let a: i64 = 1i64 + g() + g(); let b: i64 = 2i64 + g() + g(); "
                   "return a + b; }");
  LoweredFunction lf = lower_function(two.function(1));
  RegPlan plan = plan_registers(lf, 3);
  FrameLayout tl = layout_frame(two.function(1), lf, plan);
  CHECK(plan.spill_count() >= 2);
  CHECK(tl.spill_slots == 1);
}

TEST_CASE("supernode matching") {
  auto tm = typed(R"(
fn g(x: i32) -> i32 { return x; }
fn f(n: i32, d: f64) -> i32 {
  if (n <= 2) { n = n - 1; }
  if (g(n) <= 2) { n = n + n; }
  if (d < 1.5) { n = 0; }
  return n;
}
)");
  const auto &body = tm.function(1).body;
  CHECK(match_supernode(body[0]) == Supernode::IfCmpVarConst);
  CHECK(match_supernode(body[0].as<If>().then_body[0]) == Supernode::BinaryVarConst);
  CHECK(match_supernode(body[1]) == Supernode::None);
  CHECK(match_supernode(body[1].as<If>().then_body[0]) == Supernode::None);
  // No if-supernode for floating point; the comparison is still var-const.
  CHECK(match_supernode(body[2]) == Supernode::CompareVarConst);
  CHECK(match_supernode(body[2].as<If>().cond) == Supernode::CompareVarConst);
}

TEST_CASE("graph census") {
  auto fib = typed(oracle::kFibSource);
  CPSGraph g = graph_of(fib.function(0));
  size_t calls = 0, branches = 0;
  for (int i : g.order) {
    const auto &n = g.nodes[static_cast<size_t>(i)];
    calls += n.is_call;
    branches += n.conts.size() == 2;
  }
  CHECK(calls == 2);
  CHECK(branches == 1);
  CHECK(g.order.front() == g.entry);
  CHECK(g.nodes[static_cast<size_t>(g.entry)].key.kind == NodeKind::FunctionEntry);

  auto one = typed("fn f() -> i64 { return 1i64; }");
  CPSGraph og = graph_of(one.function(0));
  CHECK(og.order.size() == 3); // entry, Literal, Return
  CHECK(count_kind(og, NodeKind::Literal) == 1);
  CHECK(count_kind(og, NodeKind::Return) == 1);

  auto empty = typed("fn f() { }");
  CPSGraph eg = graph_of(empty.function(0));
  CHECK(eg.order.size() == 2);
  CHECK(count_kind(eg, NodeKind::Return) == 1);
}

TEST_CASE("pass-through counts equal live register temps") {
  auto tm = typed("fn f(a: i64, b: i64) -> i64 { return a * (b + (a - (b * 3i64))); }");
  for (int k = 1; k <= 3; ++k) {
    CodegenOptions o;
    o.register_budget = k;
    CPSGraph g = graph_of(tm.function(0), o);
    int peak = 0;
    for (int i : g.order)
      peak = std::max(peak, int{g.nodes[static_cast<size_t>(i)].key.pt});
    CHECK(peak <= k);
  }
}

TEST_CASE("jump retention law on generated functions") {
  auto r = oracle::jump_law(1000, 11, 200);
  CAPTURE(r.detail);
  CHECK(r.ok);
  CHECK(r.cases == 1200);
}

TEST_CASE("fib under mock stencils") {
  auto fib = typed(oracle::kFibSource);
  CodegenOptions opts;
  auto e = oracle::emit_with_mocks(fib.function(0), opts, 0x10000);
  CHECK(oracle::check_jump_law(e, opts).empty());
  // The false edge of the condition is the only redirection.
  CHECK(e.cf.retained_jumps == 1);
  CHECK(e.cf.spills == 1);
}

TEST_CASE("literal 2 in a condition is patched into the code") {
  auto tm = typed("fn f(n: i32) -> i32 { if (n <= 2) { return 1; } return 0; }");
  CodegenOptions opts;
  auto e = oracle::emit_with_mocks(tm.function(0), opts, 0x10000);
  const CPSNode *cmp = nullptr;
  uint32_t at = 0;
  for (const auto &s : e.cf.spans)
    if (e.graph.nodes[static_cast<size_t>(s.node)].key.kind == NodeKind::IfCmpVarConst) {
      cmp = &e.graph.nodes[static_cast<size_t>(s.node)];
      at = s.offset;
    }
  REQUIRE(cmp);
  const Stencil &st = *e.lib.find(cmp->key);
  // Value ordinal 1 of IfCmpVarConst is the literal.
  auto it = std::find_if(st.patches.begin(), st.patches.end(),
                         [](const PatchRecord &p) { return p.target == HoleTarget::value(1); });
  REQUIRE(it != st.patches.end());
  CHECK(e.bytes[at + it->offset] == 0x02);
  CHECK(e.bytes[at + it->offset + 1] == 0x00);
}

TEST_CASE("emission overflow leaves the target untouched") {
  auto fib = typed(oracle::kFibSource);
  StencilLibrary lib;
  add_mock_stencils(fib.function(0), {}, lib);
  std::vector<uint8_t> buf(16, 0xAB);
  EmitTarget t{buf.data(), 0x1000, buf.size(), 0};
  try {
    compile_function(fib.function(0), lib, t, {});
    FAIL("expected EmitOverflow");
  } catch (const EmitOverflowError &e) {
    CHECK(e.code() == ErrorCode::EmitOverflow);
    CHECK(e.needed() > buf.size());
  }
  CHECK(t.used == 0);
  CHECK(std::all_of(buf.begin(), buf.end(), [](uint8_t b) { return b == 0xAB; }));
}

TEST_CASE("missing variants are reported at graph construction") {
  auto fib = typed(oracle::kFibSource);
  const Function &f = fib.function(0);
  LoweredFunction lf = lower_function(f);
  RegPlan plan = plan_registers(lf, 3);
  FrameLayout fl = layout_frame(f, lf, plan);
  StencilLibrary empty;
  try {
    build_cps_graph(lf, plan, fl, &empty);
    FAIL("expected MissingVariant");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::MissingVariant);
  }
}

TEST_CASE("link patches calls across functions") {
  auto tm = typed(R"(
fn even(n: i64) -> bool { if (n == 0i64) { return true; } return odd(n - 1i64); }
fn odd(n: i64) -> bool { if (n == 0i64) { return false; } return even(n - 1i64); }
)");
  StencilLibrary lib;
  for (const auto &f : tm.module().functions)
    add_mock_stencils(f, {}, lib);
  std::vector<uint8_t> buf(4096);
  const uint64_t base = 0x200000;
  EmitTarget t{buf.data(), base, buf.size(), 0};
  std::vector<CompiledFunction> fns;
  for (const auto &f : tm.module().functions) {
    auto cf = compile_function(f, lib, t, {});
    t.used = cf.base - base + cf.length;
    fns.push_back(std::move(cf));
  }
  link_module(fns, buf.data(), base, {});
  // Each function's single call site must point at the other's entry.
  for (size_t i = 0; i < 2; ++i) {
    REQUIRE(fns[i].deferred.size() == 1);
    const auto &d = fns[i].deferred[0];
    size_t site = fns[i].base - base + d.offset + d.patch.offset;
    uint64_t target = base + site + 4 + static_cast<int64_t>(oracle::read32(buf, site));
    CHECK(target == fns[1 - i].entry());
  }
}

TEST_CASE("emission is deterministic modulo base address") {
  auto tm = typecheck(gen_program(5, 60));
  for (const auto &f : tm.module().functions) {
    auto a = oracle::emit_with_mocks(f, {}, 0x10000);
    auto b = oracle::emit_with_mocks(f, {}, 0x10000);
    CHECK(a.bytes == b.bytes);
    auto c = oracle::emit_with_mocks(f, {}, 0x90000);
    CHECK(c.bytes.size() == a.bytes.size());
    CHECK(c.cf.retained_jumps == a.cf.retained_jumps);
  }
}
