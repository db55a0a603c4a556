#include "cpc/fuzz.hpp"

#include "cpc/exec.hpp"
#include "cpc/typecheck.hpp"

#include <climits>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <random>

namespace cpc {

namespace {

constexpr double kCostLimit = 2e5;
constexpr int kMaxDepth = 3;

const ValueType kScalar[] = {ValueType::I32, ValueType::I64, ValueType::F64, ValueType::Bool};

struct Var {
  uint32_t local;
  ValueType type;
  bool assignable;
};

struct FnInfo {
  std::optional<ValueType> ret;
  std::vector<ValueType> params;
  double cost = 1;
};

class Generator {
public:
  Generator(uint64_t seed, int budget) : rng_(seed), budget_(std::max(1, budget)) {}

  Module run() {
    int nf = std::min<int>(1 + static_cast<int>(pick(3)), std::max(1, budget_ / 4));
    int remaining = budget_;
    for (int i = 0; i < nf; ++i) {
      int share = i + 1 == nf ? remaining : std::max(1, remaining / (nf - i));
      remaining -= share;
      function(i, share, i + 1 == nf);
    }
    if (uses_heap_) {
      m_.externs.push_back({"alloc", {ValueType::I64}, ValueType::Ptr});
      m_.externs.push_back({"release", {ValueType::Ptr}, std::nullopt});
    }
    return std::move(m_);
  }

private:
  uint64_t pick(uint64_t n) { return n ? rng_() % n : 0; }
  bool chance(int percent) { return static_cast<int>(pick(100)) < percent; }
  ValueType scalar() { return kScalar[pick(4)]; }

  void function(int index, int budget, bool entry) {
    Function fn;
    fn.name = entry ? "main" : "f" + std::to_string(index);
    FnInfo info;
    int nparams = static_cast<int>(pick(4));
    for (int i = 0; i < nparams; ++i) {
      ValueType t = scalar();
      fn.locals.push_back({"p" + std::to_string(i), t});
      info.params.push_back(t);
    }
    fn.param_count = static_cast<uint32_t>(nparams);
    if (entry || chance(80))
      info.ret = scalar();
    fn.ret = info.ret;
    fn_ = &fn;
    index_ = index;
    cost_ = 0;
    mult_ = 1;
    scope_.clear();
    for (uint32_t i = 0; i < fn.param_count; ++i)
      scope_.push_back({i, fn.locals[i].type, true});

    stmts_left_ = budget - 1;
    if (stmts_left_ > 1 && chance(20)) {
      uses_heap_ = true;
      uint32_t buf = declare_local("buf", ValueType::Ptr);
      fn.body.push_back(Declare{buf, ValueType::Ptr,
                                Expr(ExternalCall{"alloc", {Expr(lit_i64(64))}})});
      scope_.push_back({buf, ValueType::Ptr, false});
      --stmts_left_;
    }
    while (stmts_left_ > 0)
      fn.body.push_back(stmt(0));
    fn.body.push_back(Return{info.ret ? std::optional<Expr>(expr(*info.ret, kMaxDepth))
                                      : std::nullopt});
    info.cost = cost_ + 1;
    fns_.push_back(info);
    m_.functions.push_back(std::move(fn));
  }

  uint32_t declare_local(const std::string &prefix, ValueType t) {
    auto id = static_cast<uint32_t>(fn_->locals.size());
    fn_->locals.push_back({prefix + std::to_string(id), t});
    return id;
  }

  std::vector<const Var *> vars(ValueType t, bool need_assignable) const {
    std::vector<const Var *> out;
    for (const auto &v : scope_)
      if (v.type == t && (!need_assignable || v.assignable))
        out.push_back(&v);
    return out;
  }

  StmtList block(int depth, int max_len) {
    size_t mark = scope_.size();
    StmtList out;
    int n = 1 + static_cast<int>(pick(static_cast<uint64_t>(max_len)));
    for (int i = 0; i < n && stmts_left_ > 0; ++i)
      out.push_back(stmt(depth));
    scope_.resize(mark);
    return out;
  }

  Stmt stmt(int depth) {
    --stmts_left_;
    cost_ += mult_;
    int r = static_cast<int>(pick(100));
    if (r < 30 || scope_.empty()) {
      ValueType t = scalar();
      auto init = expr(t, kMaxDepth);
      uint32_t id = declare_local("v", t);
      scope_.push_back({id, t, true});
      if (chance(10))
        return Declare{id, t, std::nullopt};
      return Declare{id, t, std::move(init)};
    }
    if (r < 55) {
      ValueType t = scalar();
      auto targets = vars(t, true);
      if (!targets.empty()) {
        uint32_t local = targets[pick(targets.size())]->local;
        return Assign{Expr(VarRef{local}), expr(t, kMaxDepth)};
      }
    }
    if (r < 70 && depth < 3) {
      If s;
      s.cond = expr(ValueType::Bool, kMaxDepth);
      s.then_body = block(depth + 1, 3);
      if (chance(50))
        s.else_body = block(depth + 1, 3);
      return s;
    }
    if (r < 80 && depth < 2) {
      // { let c = 0; while (c < N) { ...; c = c + 1; } }
      int trips = static_cast<int>(depth == 0 ? pick(40) : pick(8));
      if (chance(3))
        trips = 1000;
      if (mult_ * (trips + 1) * 4 + cost_ < kCostLimit) {
        size_t mark = scope_.size();
        uint32_t c = declare_local("c", ValueType::I32);
        scope_.push_back({c, ValueType::I32, false});
        double saved = mult_;
        mult_ *= std::max(1, trips);
        While w;
        w.cond = Compare{CompareOp::Lt, Expr(VarRef{c}), Expr(lit_i32(trips))};
        w.body = block(depth + 1, 3);
        w.body.push_back(Assign{Expr(VarRef{c}),
                                Expr(Binary{BinaryOp::Add, Expr(VarRef{c}), Expr(lit_i32(1))})});
        mult_ = saved;
        scope_.resize(mark);
        Block b;
        b.body.push_back(Declare{c, ValueType::I32, Expr(lit_i32(0))});
        b.body.push_back(std::move(w));
        return b;
      }
    }
    if (r < 88) {
      if (auto call = any_call(std::nullopt))
        return ExprStmt{std::move(*call)};
    }
    if (r < 95) {
      auto bufs = vars(ValueType::Ptr, false);
      if (!bufs.empty()) {
        ValueType t = scalar();
        return Assign{array_ref(bufs[pick(bufs.size())]->local, t), expr(t, kMaxDepth)};
      }
    }
    if (fn_->ret && depth > 0 && chance(30))
      return Return{expr(*fn_->ret, kMaxDepth)};
    ValueType t = scalar();
    auto init = expr(t, kMaxDepth);
    uint32_t id = declare_local("v", t);
    scope_.push_back({id, t, true});
    return Declare{id, t, std::move(init)};
  }

  // buf[((i % 8) + 8) % 8 : t]; the buffer holds 64 bytes.
  Expr array_ref(uint32_t buf, ValueType t) {
    auto i = expr(ValueType::I64, 1);
    Expr m1 = Binary{BinaryOp::Mod, std::move(i), Expr(lit_i64(8))};
    Expr a = Binary{BinaryOp::Add, std::move(m1), Expr(lit_i64(8))};
    Expr idx = Binary{BinaryOp::Mod, std::move(a), Expr(lit_i64(8))};
    return ArrayIndex{Expr(VarRef{buf}), std::move(idx), t};
  }

  // A call to an earlier function returning `ret` (any type when ret is
  // nullopt and the result is discarded), subject to the cost budget.
  std::optional<Expr> any_call(std::optional<ValueType> ret) {
    std::vector<int> ok;
    for (int i = 0; i < index_; ++i) {
      const auto &f = fns_[i];
      if (ret && f.ret != ret)
        continue;
      if (cost_ + mult_ * f.cost > kCostLimit)
        continue;
      ok.push_back(i);
    }
    if (ok.empty())
      return std::nullopt;
    int callee = ok[pick(ok.size())];
    cost_ += mult_ * fns_[callee].cost;
    Call c;
    c.callee = static_cast<uint32_t>(callee);
    for (ValueType t : fns_[callee].params)
      c.args.push_back(expr(t, 1));
    return Expr(std::move(c));
  }

  Expr literal(ValueType t) {
    switch (t) {
    case ValueType::I32: {
      static const int32_t special[] = {0, 1, -1, 2, 7, INT32_MIN, INT32_MAX};
      if (chance(30))
        return lit_i32(special[pick(7)]);
      return lit_i32(static_cast<int32_t>(pick(41)) - 20);
    }
    case ValueType::I64: {
      static const int64_t special[] = {0, 1, -1, 3, INT64_MIN, INT64_MAX, 5000000000};
      if (chance(30))
        return lit_i64(special[pick(7)]);
      return lit_i64(static_cast<int64_t>(pick(201)) - 100);
    }
    case ValueType::F64:
      return lit_f64((static_cast<double>(pick(4001)) - 2000.0) / 8.0);
    case ValueType::Bool:
      return lit_bool(chance(50));
    case ValueType::Ptr:
      break;
    }
    return lit_i64(0);
  }

  Expr leaf(ValueType t) {
    auto vs = vars(t, false);
    if (!vs.empty() && chance(60))
      return VarRef{vs[pick(vs.size())]->local};
    return literal(t);
  }

  Expr expr(ValueType t, int depth) {
    if (depth <= 0 || chance(35))
      return leaf(t);
    int r = static_cast<int>(pick(100));
    if (r < 10) {
      if (auto c = any_call(t))
        return std::move(*c);
    }
    if (r < 18) {
      auto bufs = vars(ValueType::Ptr, false);
      if (!bufs.empty())
        return array_ref(bufs[pick(bufs.size())]->local, t);
    }
    if (t == ValueType::Bool) {
      if (r < 35)
        return Logical{chance(50) ? LogicalOp::And : LogicalOp::Or, expr(t, depth - 1),
                       expr(t, depth - 1)};
      if (r < 42)
        return Not{expr(t, depth - 1)};
      ValueType ot = scalar();
      auto op = static_cast<CompareOp>(pick(6));
      if (ot == ValueType::Bool)
        op = chance(50) ? CompareOp::Eq : CompareOp::Ne;
      return Compare{op, expr(ot, depth - 1), expr(ot, depth - 1)};
    }
    int nops = t == ValueType::F64 ? 3 : 5;
    auto op = static_cast<BinaryOp>(pick(static_cast<uint64_t>(nops)));
    Expr lhs = expr(t, depth - 1);
    Expr rhs = (op == BinaryOp::Div || op == BinaryOp::Mod) && chance(70)
                   ? nonzero_literal(t)
                   : expr(t, depth - 1);
    return Binary{op, std::move(lhs), std::move(rhs)};
  }

  Expr nonzero_literal(ValueType t) {
    auto v = static_cast<int64_t>(pick(9)) + 1;
    if (chance(40))
      v = -v;
    return t == ValueType::I32 ? Expr(lit_i32(static_cast<int32_t>(v))) : Expr(lit_i64(v));
  }

  std::mt19937_64 rng_;
  int budget_;
  Module m_;
  std::vector<FnInfo> fns_;
  Function *fn_ = nullptr;
  int index_ = 0;
  int stmts_left_ = 0;
  double cost_ = 0, mult_ = 1;
  std::vector<Var> scope_;
  bool uses_heap_ = false;
};

bool fuzz_alloc(uint64_t *a) {
  auto n = static_cast<int64_t>(a[0]);
  if (n < 0 || n > (int64_t{1} << 30))
    return false;
  void *p = std::calloc(1, static_cast<size_t>(std::max<int64_t>(n, 1)));
  if (!p)
    return false;
  a[0] = reinterpret_cast<uint64_t>(p);
  return true;
}

bool fuzz_release(uint64_t *a) {
  std::free(reinterpret_cast<void *>(a[0]));
  return true;
}

// Each removable statement is addressed by (function, path of indices).
struct StmtRef {
  StmtList *list;
  size_t index;
};

bool mentions(const Expr &e, uint32_t local) {
  return std::visit(
      [&](const auto &n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, VarRef>)
          return n.local == local;
        else if constexpr (std::is_same_v<N, Binary> || std::is_same_v<N, Compare> ||
                           std::is_same_v<N, Logical>)
          return mentions(*n.lhs, local) || mentions(*n.rhs, local);
        else if constexpr (std::is_same_v<N, Not>)
          return mentions(*n.operand, local);
        else
          return false;
      },
      e.node);
}

// Deleting the update of a loop's condition variable could make the loop
// run forever, so those statements are never offered for removal.
void collect(StmtList &body, std::vector<StmtRef> &out, const Expr *loop_cond = nullptr) {
  for (size_t i = 0; i < body.size(); ++i) {
    auto *a = std::get_if<Assign>(&body[i].node);
    bool guards_loop = loop_cond && a && a->target.is<VarRef>() &&
                       mentions(*loop_cond, a->target.as<VarRef>().local);
    if (!guards_loop)
      out.push_back({&body, i});
    auto &n = body[i].node;
    if (auto *s = std::get_if<If>(&n)) {
      collect(s->then_body, out);
      collect(s->else_body, out);
    } else if (auto *w = std::get_if<While>(&n)) {
      collect(w->body, out, &w->cond);
    } else if (auto *b = std::get_if<Block>(&n)) {
      collect(b->body, out);
    }
  }
}

} // namespace

Module gen_program(uint64_t seed, int size_budget) { return Generator(seed, size_budget).run(); }

std::vector<Literal> gen_args(const Function &fn, uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Literal> out;
  for (uint32_t i = 0; i < fn.param_count; ++i) {
    int64_t v = static_cast<int64_t>(rng() % 201) - 100;
    switch (fn.param_type(i)) {
    case ValueType::I32: out.push_back(lit_i32(static_cast<int32_t>(v))); break;
    case ValueType::I64: out.push_back(lit_i64(v)); break;
    case ValueType::F64: out.push_back(lit_f64(static_cast<double>(v) / 8)); break;
    case ValueType::Bool: out.push_back(lit_bool(v & 1)); break;
    case ValueType::Ptr: out.push_back(Literal{ValueType::Ptr, 0}); break;
    }
  }
  return out;
}

bool same_outcome(const RunResult &a, const RunResult &b) {
  if (a == b)
    return true;
  if (a.status != b.status || !a.value || !b.value || a.value->type != ValueType::F64 ||
      b.value->type != ValueType::F64)
    return false;
  return std::isnan(literal_as_f64(*a.value)) && std::isnan(literal_as_f64(*b.value));
}

void register_standard_externals(ExternalRegistry &reg) {
  reg.add("alloc", fuzz_alloc);
  reg.add("release", fuzz_release);
}

Module minimize(const Module &m, const std::function<bool(const Module &)> &still_fails) {
  Module best = m;
  bool progress = true;
  while (progress) {
    progress = false;
    Module probe = best;
    std::vector<StmtRef> refs;
    for (auto &f : probe.functions)
      collect(f.body, refs);
    // Later statements first so earlier references stay valid.
    for (size_t k = refs.size(); k-- > 0;) {
      Module cand = best;
      std::vector<StmtRef> crefs;
      for (auto &f : cand.functions)
        collect(f.body, crefs);
      crefs[k].list->erase(crefs[k].list->begin() + static_cast<long>(crefs[k].index));
      try {
        (void)typecheck(cand);
      } catch (const Error &) {
        continue;
      }
      if (still_fails(cand)) {
        best = std::move(cand);
        progress = true;
        break;
      }
    }
  }
  return best;
}

} // namespace cpc
