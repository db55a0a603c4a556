#pragma once
// Independent checks shared by the unit tests and the acceptance runner.
// Each returns the number of cases examined and the first mismatch found.

#include "cpc/bench.hpp"
#include "cpc/codegen.hpp"
#include "cpc/frontend.hpp"
#include "cpc/fuzz.hpp"
#include "cpc/manifest.hpp"
#include "cpc/mock.hpp"
#include "cpc/typecheck.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using namespace cpc;

struct Result {
  size_t cases = 0;
  bool ok = true;
  std::string detail;

  void fail(const std::string &d) {
    if (ok) {
      ok = false;
      detail = d;
    }
  }
};

// ---- patch algebra -----------------------------------------------------------

// Exact arithmetic in 128 bits, then the 64-bit wrap the patch rule defines.
inline Result patch_algebra(size_t n, uint64_t seed) {
  Result r;
  std::mt19937_64 rng(seed);
  auto pick = [&](uint64_t k) { return rng() % k; };
  for (size_t i = 0; i < n && r.ok; ++i, ++r.cases) {
    const int combo = static_cast<int>(i % 8);
    const uint8_t width = combo & 1 ? 64 : 32;
    const bool sub = combo & 2;
    const bool add = combo & 4;

    Stencil s;
    s.code.resize(16 + pick(48));
    for (auto &b : s.code)
      b = static_cast<uint8_t>(rng());
    // Non-overlapping sites, walking forward through the code.
    uint32_t at = static_cast<uint32_t>(pick(4));
    std::map<HoleTarget, uint64_t> holes;
    uint64_t dest = (rng() >> pick(40)) & ~uint64_t{0xF};
    uint32_t ordinal = 0;
    while (at + width / 8 <= s.code.size() && ordinal < 3) {
      PatchRecord p;
      p.offset = at;
      p.width = width;
      p.subtract_site = sub;
      p.add_target = add;
      p.target = HoleTarget::value(ordinal);
      // Mostly in-range values, with regular overflow probes.
      switch (pick(4)) {
      case 0: p.addend = static_cast<int64_t>(rng()); break;
      case 1: p.addend = -static_cast<int64_t>(pick(16)); break;
      default: p.addend = static_cast<int64_t>(pick(1 << 20)) - (1 << 19); break;
      }
      uint64_t target;
      switch (pick(4)) {
      case 0: target = rng(); break;
      case 1: target = pick(uint64_t{1} << 31); break;
      default: target = dest + at + pick(uint64_t{1} << 32) - (uint64_t{1} << 31); break;
      }
      holes[p.target] = target;
      s.patches.push_back(p);
      at += width / 8 + static_cast<uint32_t>(pick(6));
      ++ordinal;
    }

    std::vector<uint8_t> expect = s.code;
    bool expect_overflow = false;
    for (const auto &p : s.patches) {
      __int128 v = p.addend;
      if (p.add_target)
        v += static_cast<__int128>(holes.at(p.target));
      if (p.subtract_site)
        v -= static_cast<__int128>(dest) + p.offset;
      // Reduce modulo 2^64 into the signed range.
      __int128 m = __int128{1} << 64;
      __int128 w = ((v % m) + m) % m;
      if (w >= m / 2)
        w -= m;
      if (p.width == 32 && (w < -(__int128{1} << 31) || w >= (__int128{1} << 31)))
        expect_overflow = true;
      for (int k = 0; k < p.width / 8; ++k)
        expect[p.offset + static_cast<uint32_t>(k)] = static_cast<uint8_t>(static_cast<uint64_t>(w) >> (8 * k));
    }

    try {
      auto got = materialize(s, dest, holes, false);
      if (expect_overflow)
        r.fail("case " + std::to_string(i) + ": expected PatchOverflow");
      else if (got != expect)
        r.fail("case " + std::to_string(i) + ": bytes differ");
    } catch (const Error &e) {
      if (!expect_overflow || e.code() != ErrorCode::PatchOverflow)
        r.fail("case " + std::to_string(i) + ": unexpected " + e.what());
    }
  }
  return r;
}

// ---- library serialization -----------------------------------------------------

inline Stencil random_stencil(const StencilKey &key, std::mt19937_64 &rng) {
  Stencil s;
  s.key = key;
  s.code.resize(8 + rng() % 120);
  for (auto &b : s.code)
    b = static_cast<uint8_t>(rng());
  // The elidable tail, when present, is the jump to continuation 0.
  const bool tail = rng() % 2 && s.code.size() >= 18;
  const size_t body = tail ? s.code.size() - 5 : s.code.size();
  uint32_t at = 0, ordinal = 0, cont = tail ? 1 : 0;
  while (at + 8 <= body) {
    PatchRecord p;
    p.offset = at;
    p.width = rng() % 2 ? 32 : 64;
    p.subtract_site = rng() % 2;
    p.add_target = rng() % 4 != 0;
    p.addend = static_cast<int64_t>(rng() % 4096) - 2048;
    switch (rng() % 3) {
    case 0: p.target = HoleTarget::value(ordinal++); break;
    case 1:
      p.width = 32;
      p.target = HoleTarget::cont(cont++);
      break;
    default: p.target = HoleTarget::external("ext_" + std::to_string(rng() % 5)); break;
    }
    s.patches.push_back(p);
    at += p.width / 8 + static_cast<uint32_t>(rng() % 8);
  }
  if (tail) {
    auto off = static_cast<uint32_t>(body);
    s.code[off] = 0xE9;
    s.patches.push_back({off + 1, 32, true, true, -4, HoleTarget::cont(0)});
    s.tail = TailSpan{off, 5};
  }
  return s;
}

inline std::vector<StencilKey> distinct_keys(size_t n) {
  std::vector<StencilKey> out;
  std::set<StencilKey> seen;
  for (uint32_t i = 0; out.size() < n; ++i) {
    StencilKey k;
    k.kind = static_cast<NodeKind>(i % kNodeKindCount);
    k.op = static_cast<uint8_t>((i / 12) % 6);
    k.type = static_cast<uint8_t>((i / 72) % 6);
    k.nlocs = static_cast<uint8_t>((i / 432) % 4);
    for (uint8_t j = 0; j < k.nlocs; ++j)
      k.locs[j] = static_cast<Loc>((i / (1728 * (j + 1))) % 3);
    k.pt = static_cast<uint8_t>(i % 4);
    k.spill = (i / 7) % 2;
    if (seen.insert(k).second)
      out.push_back(k);
  }
  return out;
}

inline Result library_roundtrip(size_t n, uint64_t seed) {
  Result r;
  std::mt19937_64 rng(seed);
  StencilLibrary lib;
  for (const auto &k : distinct_keys(n))
    lib.insert(random_stencil(k, rng));
  r.cases = lib.size();
  if (lib.size() != n)
    r.fail("library holds " + std::to_string(lib.size()) + " stencils");
  auto bytes = serialize(lib);
  StencilLibrary back = deserialize(bytes);
  if (!(back == lib))
    r.fail("deserialized library differs");
  if (serialize(back) != bytes)
    r.fail("reserialized bytes differ");
  return r;
}

// ---- register planning -----------------------------------------------------------

// Expression trees over: literal, the parameter `a`, `h()`, `g(child)` and
// `lhs + rhs`.
struct Tree {
  enum Kind { Lit, Var, H, G, Add } kind;
  std::shared_ptr<Tree> l, r;
};
using TreeP = std::shared_ptr<Tree>;

inline std::vector<TreeP> trees_of_size(int n) {
  std::vector<TreeP> out;
  if (n == 1) {
    for (auto k : {Tree::Lit, Tree::Var, Tree::H})
      out.push_back(std::make_shared<Tree>(Tree{k, nullptr, nullptr}));
    return out;
  }
  for (auto &c : trees_of_size(n - 1))
    out.push_back(std::make_shared<Tree>(Tree{Tree::G, c, nullptr}));
  for (int a = 1; a < n - 1; ++a)
    for (auto &x : trees_of_size(a))
      for (auto &y : trees_of_size(n - 1 - a))
        out.push_back(std::make_shared<Tree>(Tree{Tree::Add, x, y}));
  return out;
}

inline std::string tree_source(const Tree &t) {
  switch (t.kind) {
  case Tree::Lit: return "2i64";
  case Tree::Var: return "a";
  case Tree::H: return "h()";
  case Tree::G: return "g(" + tree_source(*t.l) + ")";
  case Tree::Add: return "(" + tree_source(*t.l) + " + " + tree_source(*t.r) + ")";
  }
  return {};
}

// Events of the left-to-right post-order evaluation of `return tree;`.
struct Event {
  enum Kind { Push, Pop, Call } kind;
  int temp = -1;
};

struct Simulator {
  std::vector<Event> ev;
  int next = 0;

  // Returns the temp holding the value, or -1 when the parent reads the
  // operand directly (local or literal).
  int eval(const Tree &t, bool allow_lit) {
    switch (t.kind) {
    case Tree::Var: return -1;
    case Tree::Lit:
      if (allow_lit)
        return -1;
      return push();
    case Tree::H:
      ev.push_back({Event::Call});
      return push();
    case Tree::G: {
      int a = eval(*t.l, true);
      if (a >= 0)
        ev.push_back({Event::Pop, a});
      ev.push_back({Event::Call});
      return push();
    }
    case Tree::Add: {
      bool both_lit = t.l->kind == Tree::Lit && t.r->kind == Tree::Lit;
      int x = eval(*t.l, !both_lit);
      int y = eval(*t.r, true);
      if (y >= 0)
        ev.push_back({Event::Pop, y});
      if (x >= 0)
        ev.push_back({Event::Pop, x});
      return push();
    }
    }
    return -1;
  }

  int push() {
    ev.push_back({Event::Push, next});
    return next++;
  }
};

// A temp lives in the frame iff a call happens while it is live, or at some
// moment more than K live temps sit at or above it on the evaluation stack.
inline std::vector<bool> brute_force_spills(const std::vector<Event> &ev, int temps, int k) {
  std::vector<bool> spilled(static_cast<size_t>(temps), false);
  std::vector<int> live;
  for (const auto &e : ev) {
    if (e.kind == Event::Push) {
      live.push_back(e.temp);
      for (size_t i = 0; i < live.size(); ++i)
        if (static_cast<int>(live.size() - i) > k)
          spilled[static_cast<size_t>(live[i])] = true;
    } else if (e.kind == Event::Pop) {
      live.erase(std::find(live.begin(), live.end(), e.temp));
    } else {
      for (int t : live)
        spilled[static_cast<size_t>(t)] = true;
    }
  }
  return spilled;
}

inline void check_tree(const Tree &t, Result &r) {
  std::string src = "fn h() -> i64 { return 1i64; }\n"
                    "fn g(x: i64) -> i64 { return x; }\n"
                    "fn f(a: i64) -> i64 { return " +
                    tree_source(t) + "; }\n";
  TypedModule tm = typecheck(parse(src));
  LoweredFunction lf = lower_function(tm.function(2));
  Simulator sim;
  if (sim.eval(t, false) >= 0)
    sim.ev.push_back({Event::Pop, sim.next - 1});
  for (int k = 1; k <= 3 && r.ok; ++k, ++r.cases) {
    RegPlan plan = plan_registers(lf, k);
    if (plan.spilled != brute_force_spills(sim.ev, sim.next, k))
      r.fail("K=" + std::to_string(k) + " differs on " + tree_source(t));
  }
}

/// Every tree of at most `max_nodes` nodes, each under K = 1, 2, 3.
inline Result planner_vs_brute_force(int max_nodes) {
  Result r;
  for (int n = 1; n <= max_nodes && r.ok; ++n)
    for (const auto &t : trees_of_size(n))
      if (r.ok)
        check_tree(*t, r);
  return r;
}

// Larger random trees, dominated by literal pairs so register pressure
// (rather than calls) drives the spills.
inline TreeP random_tree(std::mt19937_64 &rng, int budget) {
  if (budget <= 1 || rng() % 8 == 0) {
    static const Tree::Kind leaves[] = {Tree::Lit, Tree::Lit, Tree::Lit, Tree::Var, Tree::H};
    return std::make_shared<Tree>(Tree{leaves[rng() % 5], nullptr, nullptr});
  }
  if (rng() % 10 == 0)
    return std::make_shared<Tree>(Tree{Tree::G, random_tree(rng, budget - 1), nullptr});
  int left = 1 + static_cast<int>(rng() % static_cast<uint64_t>(budget - 1));
  return std::make_shared<Tree>(
      Tree{Tree::Add, random_tree(rng, left), random_tree(rng, std::max(1, budget - 1 - left))});
}

inline Result planner_random(size_t n, uint64_t seed) {
  Result r;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < n && r.ok; ++i)
    check_tree(*random_tree(rng, 5 + static_cast<int>(rng() % 30)), r);
  return r;
}

inline const char *kFibSource = R"(
fn fib(n: i32) -> i32 {
  if (n < 2) {
    return n;
  }
  return fib(n - 1) + fib(n - 2);
}
)";

/// Temps spilled in fib with K=3, and the temp produced by the first call.
inline std::pair<std::vector<uint32_t>, uint32_t> fib_spills() {
  TypedModule tm = typecheck(parse(kFibSource));
  LoweredFunction lf = lower_function(tm.function(0));
  RegPlan plan = plan_registers(lf, 3);
  std::vector<uint32_t> spilled;
  for (uint32_t t = 0; t < plan.spilled.size(); ++t)
    if (plan.spilled[t])
      spilled.push_back(t);
  uint32_t first_call = UINT32_MAX;
  for (const auto &n : lf.nodes)
    if (n.is_call && n.produces) {
      first_call = *n.produces;
      break;
    }
  return {spilled, first_call};
}

// ---- frame reuse ---------------------------------------------------------------

// Visits typechecked functions from generated programs until `n` were seen.
inline void for_generated_functions(size_t n, uint64_t seed, int budget,
                                    const std::function<void(const Function &, uint64_t)> &fn) {
  size_t seen = 0;
  for (uint64_t s = seed; seen < n; ++s) {
    TypedModule tm = typecheck(gen_program(s, budget));
    for (const auto &f : tm.module().functions) {
      if (seen++ == n)
        return;
      fn(f, s);
    }
  }
}

inline Result frame_reuse(size_t n, uint64_t seed) {
  Result r;
  for_generated_functions(n, seed, 40, [&](const Function &f, uint64_t s) {
    ++r.cases;
    if (!r.ok)
      return;
    int k = static_cast<int>(s % 4);
    LoweredFunction lf = lower_function(f);
    RegPlan plan = plan_registers(lf, k);
    FrameLayout fl = layout_frame(f, lf, plan);
    std::string where = f.name + " (seed " + std::to_string(s) + ", K=" + std::to_string(k) + ")";

    // Live interval of each spilled temp in half-steps: a node consumes its
    // operands (2i) before it produces (2i + 1).
    struct Interval {
      uint32_t temp, lo, hi;
    };
    std::map<uint32_t, Interval> iv;
    for (uint32_t i = 0; i < lf.nodes.size(); ++i) {
      const auto &nd = lf.nodes[i];
      for (auto t : nd.consumes)
        if (plan.spilled[t])
          iv.at(t).hi = 2 * i;
      if (nd.produces && plan.spilled[*nd.produces])
        iv[*nd.produces] = {*nd.produces, 2 * i + 1, nd.discard ? 2 * i + 2 : UINT32_MAX};
    }

    std::set<uint32_t> local_offs(fl.local_offset.begin(), fl.local_offset.end());
    if (local_offs.size() != fl.local_offset.size())
      r.fail(where + ": two locals share a slot");
    uint32_t naive = 8 * static_cast<uint32_t>(f.locals.size() + fl.extern_slots + iv.size());
    if (fl.size > naive)
      r.fail(where + ": frame " + std::to_string(fl.size) + " > naive " + std::to_string(naive));

    std::vector<Interval> all;
    for (auto &[t, v] : iv) {
      uint32_t off = fl.spill_offset[t];
      if (off % 8 || off + 8 > fl.size || local_offs.count(off) ||
          (off >= fl.extern_block && off < fl.extern_block + 8 * fl.extern_slots))
        r.fail(where + ": bad spill offset " + std::to_string(off));
      if (v.hi == UINT32_MAX)
        r.fail(where + ": spilled temp never consumed");
      all.push_back(v);
    }
    size_t peak = 0;
    for (size_t a = 0; a < all.size(); ++a) {
      size_t overlapping = 1;
      for (size_t b = 0; b < all.size(); ++b) {
        if (a == b)
          continue;
        bool overlap = all[a].lo < all[b].hi && all[b].lo < all[a].hi;
        if (overlap && fl.spill_offset[all[a].temp] == fl.spill_offset[all[b].temp])
          r.fail(where + ": live temps share slot " + std::to_string(fl.spill_offset[all[a].temp]));
        // Count intervals live at a's start.
        if (all[b].lo <= all[a].lo && all[a].lo < all[b].hi)
          ++overlapping;
      }
      peak = std::max(peak, overlapping);
    }
    if (fl.spill_slots != peak)
      r.fail(where + ": " + std::to_string(fl.spill_slots) + " spill slots for peak " +
             std::to_string(peak));
  });
  return r;
}

// ---- jump retention ------------------------------------------------------------

struct Emitted {
  CPSGraph graph;
  CompiledFunction cf;
  std::vector<uint8_t> bytes;
  StencilLibrary lib;
};

inline Emitted emit_with_mocks(const Function &f, const CodegenOptions &opts, uint64_t base) {
  Emitted e;
  LoweredFunction lf = lower_function(f, opts);
  RegPlan plan = plan_registers(lf, opts.register_budget);
  FrameLayout fl = layout_frame(f, lf, plan);
  e.graph = build_cps_graph(lf, plan, fl, nullptr, opts);
  add_mock_stencils(f, opts, e.lib);
  e.bytes.resize(64 + 64 * e.graph.nodes.size());
  EmitTarget t{e.bytes.data(), base, e.bytes.size(), 0};
  e.cf = compile_function(f, e.lib, t, opts);
  e.bytes.resize(e.cf.length);
  return e;
}

inline int32_t read32(const std::vector<uint8_t> &b, size_t at) {
  uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= uint32_t{b[at + static_cast<size_t>(k)]} << (8 * k);
  return static_cast<int32_t>(v);
}

// Redirections counted from the graph and the emission order alone; every
// surviving jump is also decoded from the mock bytes to check its target.
inline std::string check_jump_law(const Emitted &e, const CodegenOptions &opts) {
  const auto &spans = e.cf.spans;
  std::map<int, uint32_t> start;
  for (const auto &s : spans)
    start[s.node] = s.offset;
  uint32_t expect = 0;
  for (size_t i = 0; i < spans.size(); ++i) {
    const CPSNode &n = e.graph.nodes[static_cast<size_t>(spans[i].node)];
    if (n.conts.empty())
      continue;
    expect += static_cast<uint32_t>(n.conts.size() - 1);
    int next = i + 1 < spans.size() ? spans[i + 1].node : -1;
    bool adjacent = n.conts[0] == next && opts.enable_jump_elision;
    expect += !adjacent;
    if (spans[i].tail_elided == !adjacent)
      return "node " + std::to_string(spans[i].node) + ": elision does not match adjacency";

    // Every jump site in the mock encodes `op rel32` ending the span or
    // preceding the tail; decode each and compare with the edge target.
    const Stencil &st = *e.lib.find(n.key);
    for (const auto &p : st.patches) {
      if (p.target.kind != HoleTarget::Kind::Continuation)
        continue;
      if (p.target.ordinal == 0 && spans[i].tail_elided)
        continue;
      size_t site = spans[i].offset + p.offset;
      uint32_t want = start.at(n.conts[p.target.ordinal]);
      int64_t got = static_cast<int64_t>(site) + 4 + read32(e.bytes, site);
      if (got != want)
        return "node " + std::to_string(spans[i].node) + " jumps to " + std::to_string(got) +
               ", expected " + std::to_string(want);
    }
  }
  if (e.cf.retained_jumps != expect)
    return "retained " + std::to_string(e.cf.retained_jumps) + ", redirections " +
           std::to_string(expect);
  return {};
}

// Straight-line bodies: a chain of lets over earlier values and calls.
inline Module straight_line_program(uint64_t seed, int statements) {
  std::mt19937_64 rng(seed);
  std::ostringstream src;
  src << "fn g(x: i64, y: i64) -> i64 { return x - y; }\n";
  src << "fn f(a: i64, b: i64) -> i64 {\n";
  std::vector<std::string> names{"a", "b"};
  auto atom = [&] {
    if (rng() % 4 == 0)
      return std::to_string(rng() % 100) + "i64";
    return names[rng() % names.size()];
  };
  std::function<std::string(int)> expr = [&](int depth) -> std::string {
    if (depth == 0 || rng() % 3 == 0)
      return atom();
    switch (rng() % 4) {
    case 0: return "g(" + expr(depth - 1) + ", " + expr(depth - 1) + ")";
    case 1: return "(" + expr(depth - 1) + " * " + expr(depth - 1) + ")";
    default: return "(" + expr(depth - 1) + " + " + expr(depth - 1) + ")";
    }
  };
  for (int i = 0; i < statements; ++i) {
    std::string v = "v" + std::to_string(i);
    if (rng() % 4 == 0 && names.size() > 2)
      src << "  " << names[2 + rng() % (names.size() - 2)] << " = " << expr(3) << ";\n";
    else
      src << "  let " << v << ": i64 = " << expr(3) << ";\n", names.push_back(v);
  }
  src << "  return " << expr(2) << ";\n}\n";
  return parse(src.str());
}

inline Result jump_law(size_t n, uint64_t seed, size_t straight_n) {
  Result r;
  for_generated_functions(n, seed, 40, [&](const Function &f, uint64_t s) {
    ++r.cases;
    if (!r.ok)
      return;
    CodegenOptions opts;
    opts.register_budget = static_cast<int>(s % 4);
    opts.enable_supernodes = s % 3 != 0;
    opts.enable_jump_elision = s % 5 != 0;
    Emitted e = emit_with_mocks(f, opts, 0x40000000);
    if (auto why = check_jump_law(e, opts); !why.empty())
      r.fail(f.name + " (seed " + std::to_string(s) + "): " + why);
  });
  for (size_t i = 0; i < straight_n && r.ok; ++i, ++r.cases) {
    TypedModule tm = typecheck(straight_line_program(seed + i, 1 + static_cast<int>(i % 25)));
    CodegenOptions opts;
    opts.register_budget = static_cast<int>(i % 4);
    Emitted e = emit_with_mocks(tm.function(1), opts, 0x40000000);
    if (auto why = check_jump_law(e, opts); !why.empty())
      r.fail("straight-line " + std::to_string(i) + ": " + why);
    else if (e.cf.retained_jumps != 0)
      r.fail("straight-line " + std::to_string(i) + " retains " +
             std::to_string(e.cf.retained_jumps) + " jumps");
  }
  return r;
}

// ---- frontend --------------------------------------------------------------------

inline Result print_parse_roundtrip(size_t n, uint64_t seed) {
  Result r;
  for (size_t i = 0; i < n && r.ok; ++i, ++r.cases) {
    Module m = gen_program(seed + i, 1 + static_cast<int>(i % 60));
    std::string text = print(m);
    if (!structurally_equal(parse(text), m))
      r.fail("seed " + std::to_string(seed + i) + " does not round-trip");
  }
  return r;
}

} // namespace oracle
