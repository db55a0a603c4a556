#include "cpc/typecheck.hpp"

#include <algorithm>
#include <set>

namespace cpc {

namespace {

bool is_i32_literal(const Expr &e) {
  return e.is<Literal>() && e.as<Literal>().type == ValueType::I32;
}

// Unsuffixed integer literals take the type their context asks for.
void adopt(Expr &e, std::optional<ValueType> want) {
  if (!want || !is_i32_literal(e))
    return;
  auto &lit = e.as<Literal>();
  auto v = static_cast<int64_t>(lit.bits);
  if (*want == ValueType::I64)
    lit = lit_i64(v);
  else if (*want == ValueType::F64)
    lit = lit_f64(static_cast<double>(v));
}

class Checker {
public:
  Checker(const Module &m, const Function &f, std::string fpath)
      : module_(m), fn_(f), path_{std::move(fpath)},
        declared_(f.locals.size(), false), in_scope_(f.locals.size(), false) {
    for (uint32_t i = 0; i < f.param_count && i < f.locals.size(); ++i)
      declared_[i] = in_scope_[i] = true;
  }

  void run(StmtList &body) {
    if (fn_.param_count > fn_.locals.size())
      fail(ErrorCode::UndefinedLocal, "param_count exceeds local count");
    body_list(body, "body");
    for (size_t i = fn_.param_count; i < fn_.locals.size(); ++i)
      if (!declared_[i])
        fail(ErrorCode::UndefinedLocal,
             "local " + std::to_string(i) + " has no declaration");
    if (fn_.ret && !always_returns(body))
      fail(ErrorCode::MissingReturn, "not every path returns a value");
  }

private:
  struct Seg {
    Checker &c;
    Seg(Checker &c, std::string s) : c(c) { c.path_.push_back(std::move(s)); }
    ~Seg() { c.path_.pop_back(); }
  };

  [[noreturn]] void fail(ErrorCode code, const std::string &msg) {
    std::string p;
    for (size_t i = 0; i < path_.size(); ++i) {
      if (i)
        p += '/';
      p += path_[i];
    }
    throw TypeError(code, p, msg);
  }

  void body_list(StmtList &body, const std::string &name) {
    std::vector<uint32_t> scoped;
    for (size_t i = 0; i < body.size(); ++i) {
      Seg s(*this, name + "[" + std::to_string(i) + "]");
      stmt(body[i], scoped);
    }
    for (auto l : scoped)
      in_scope_[l] = false;
  }

  void stmt(Stmt &s, std::vector<uint32_t> &scoped) {
    std::visit([&](auto &n) { this->visit(n, scoped); }, s.node);
  }

  void visit(Declare &d, std::vector<uint32_t> &scoped) {
    Seg s(*this, "let");
    if (d.local >= fn_.locals.size())
      fail(ErrorCode::UndefinedLocal, "local index out of range");
    if (d.local < fn_.param_count)
      fail(ErrorCode::TypeMismatch, "cannot redeclare a parameter");
    if (declared_[d.local])
      fail(ErrorCode::TypeMismatch, "local declared twice");
    if (d.type != fn_.locals[d.local].type)
      fail(ErrorCode::TypeMismatch, "declared type differs from local table");
    if (d.init) {
      Seg i(*this, "init");
      expect(*d.init, d.type);
    }
    declared_[d.local] = in_scope_[d.local] = true;
    scoped.push_back(d.local);
  }

  void visit(Assign &a, std::vector<uint32_t> &) {
    Seg s(*this, "assign");
    if (!a.target.is<VarRef>() && !a.target.is<ArrayIndex>())
      fail(ErrorCode::TypeMismatch, "assignment target must be a local or array element");
    ValueType t;
    {
      Seg tg(*this, "target");
      t = value(a.target, std::nullopt);
    }
    Seg v(*this, "value");
    expect(a.value, t);
  }

  void visit(If &i, std::vector<uint32_t> &) {
    Seg s(*this, "if");
    {
      Seg c(*this, "cond");
      expect(i.cond, ValueType::Bool);
    }
    body_list(i.then_body, "then");
    body_list(i.else_body, "else");
  }

  void visit(While &w, std::vector<uint32_t> &) {
    Seg s(*this, "while");
    {
      Seg c(*this, "cond");
      expect(w.cond, ValueType::Bool);
    }
    body_list(w.body, "body");
  }

  void visit(Return &r, std::vector<uint32_t> &) {
    Seg s(*this, "return");
    if (!fn_.ret) {
      if (r.value)
        fail(ErrorCode::TypeMismatch, "void function returns a value");
      return;
    }
    if (!r.value)
      fail(ErrorCode::TypeMismatch, "missing return value");
    expect(*r.value, *fn_.ret);
  }

  void visit(ExprStmt &e, std::vector<uint32_t> &) {
    Seg s(*this, "expr");
    check(e.expr, std::nullopt);
  }

  void visit(Block &b, std::vector<uint32_t> &) { body_list(b.body, "block"); }

  void expect(Expr &e, ValueType want) {
    adopt(e, want);
    auto got = value(e, want);
    if (got != want)
      fail(ErrorCode::TypeMismatch, "expected " + std::string(to_string(want)) +
                                        ", found " + std::string(to_string(got)));
  }

  ValueType value(Expr &e, std::optional<ValueType> hint) {
    auto t = check(e, hint);
    if (!t)
      fail(ErrorCode::TypeMismatch, "void call used as a value");
    return *t;
  }

  // Infers both operand types, letting an unsuffixed literal on either side
  // follow the other side (or the outer hint when both are literals).
  ValueType operands(Expr &lhs, Expr &rhs, std::optional<ValueType> hint) {
    ValueType tl, tr;
    if (is_i32_literal(lhs) && !is_i32_literal(rhs)) {
      {
        Seg r(*this, "rhs");
        tr = value(rhs, hint);
      }
      adopt(lhs, tr);
      Seg l(*this, "lhs");
      tl = value(lhs, tr);
    } else {
      {
        Seg l(*this, "lhs");
        adopt(lhs, hint);
        tl = value(lhs, hint);
      }
      Seg r(*this, "rhs");
      adopt(rhs, tl);
      tr = value(rhs, tl);
    }
    if (tl != tr)
      fail(ErrorCode::TypeMismatch, "operand types differ: " + std::string(to_string(tl)) +
                                        " vs " + std::string(to_string(tr)));
    return tl;
  }

  std::optional<ValueType> check(Expr &e, std::optional<ValueType> hint) {
    std::optional<ValueType> t;
    if (e.is<Not>()) {
      // !x  ==>  x == false
      Expr operand = std::move(*e.as<Not>().operand);
      e.node = Compare{CompareOp::Eq, Box<Expr>(std::move(operand)), Box<Expr>(Expr(lit_bool(false)))};
    }
    std::visit([&](auto &n) { t = this->infer(n, hint); }, e.node);
    e.type = t;
    return t;
  }

  std::optional<ValueType> infer(Literal &l, std::optional<ValueType>) { return l.type; }

  std::optional<ValueType> infer(VarRef &v, std::optional<ValueType>) {
    if (v.local >= fn_.locals.size())
      fail(ErrorCode::UndefinedLocal, "local index out of range");
    if (!in_scope_[v.local])
      fail(ErrorCode::UndefinedLocal, "local '" + fn_.locals[v.local].name + "' is not in scope");
    return fn_.locals[v.local].type;
  }

  std::optional<ValueType> infer(Binary &b, std::optional<ValueType> hint) {
    Seg s(*this, "binary");
    auto t = operands(*b.lhs, *b.rhs, hint);
    if (t != ValueType::I32 && t != ValueType::I64 && t != ValueType::F64)
      fail(ErrorCode::TypeMismatch, "arithmetic on " + std::string(to_string(t)));
    if ((b.op == BinaryOp::Div || b.op == BinaryOp::Mod) && !is_integer(t))
      fail(ErrorCode::TypeMismatch, "Div/Mod require integer operands");
    return t;
  }

  std::optional<ValueType> infer(Compare &c, std::optional<ValueType>) {
    Seg s(*this, "compare");
    auto t = operands(*c.lhs, *c.rhs, std::nullopt);
    if (t == ValueType::Ptr)
      fail(ErrorCode::TypeMismatch, "pointers are not comparable");
    if (t == ValueType::Bool && c.op != CompareOp::Eq && c.op != CompareOp::Ne)
      fail(ErrorCode::TypeMismatch, "bool supports only == and !=");
    return ValueType::Bool;
  }

  std::optional<ValueType> infer(Logical &l, std::optional<ValueType>) {
    Seg s(*this, l.op == LogicalOp::And ? "and" : "or");
    {
      Seg a(*this, "lhs");
      expect(*l.lhs, ValueType::Bool);
    }
    Seg b(*this, "rhs");
    expect(*l.rhs, ValueType::Bool);
    return ValueType::Bool;
  }

  std::optional<ValueType> infer(Not &, std::optional<ValueType>) { return ValueType::Bool; }

  void args(std::vector<Expr> &actual, const std::vector<ValueType> &params) {
    if (actual.size() != params.size())
      fail(ErrorCode::TypeMismatch, "expected " + std::to_string(params.size()) +
                                        " arguments, got " + std::to_string(actual.size()));
    for (size_t i = 0; i < actual.size(); ++i) {
      Seg a(*this, "arg[" + std::to_string(i) + "]");
      expect(actual[i], params[i]);
    }
  }

  std::optional<ValueType> infer(Call &c, std::optional<ValueType>) {
    Seg s(*this, "call");
    if (c.callee >= module_.functions.size())
      fail(ErrorCode::UndefinedFunction, "function index " + std::to_string(c.callee));
    const auto &callee = module_.functions[c.callee];
    std::vector<ValueType> params;
    for (uint32_t i = 0; i < callee.param_count; ++i)
      params.push_back(callee.param_type(i));
    args(c.args, params);
    return callee.ret;
  }

  std::optional<ValueType> infer(ExternalCall &c, std::optional<ValueType>) {
    Seg s(*this, "extern");
    const auto *decl = module_.find_extern(c.symbol);
    if (!decl)
      fail(ErrorCode::UndefinedFunction, "unknown external '" + c.symbol + "'");
    args(c.args, decl->params);
    return decl->ret;
  }

  std::optional<ValueType> infer(ArrayIndex &a, std::optional<ValueType>) {
    Seg s(*this, "index");
    {
      Seg b(*this, "base");
      expect(*a.base, ValueType::Ptr);
    }
    Seg i(*this, "index");
    expect(*a.index, ValueType::I64);
    return a.elem;
  }

  const Module &module_;
  const Function &fn_;
  std::vector<std::string> path_;
  std::vector<bool> declared_;
  std::vector<bool> in_scope_;
};

// ---- short-circuit lowering --------------------------------------------

bool contains_logical(const Expr &e) {
  return std::visit(
      [](const auto &n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Logical>)
          return true;
        else if constexpr (std::is_same_v<N, Binary> || std::is_same_v<N, Compare>)
          return contains_logical(*n.lhs) || contains_logical(*n.rhs);
        else if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, ExternalCall>)
          return std::any_of(n.args.begin(), n.args.end(), contains_logical);
        else if constexpr (std::is_same_v<N, ArrayIndex>)
          return contains_logical(*n.base) || contains_logical(*n.index);
        else
          return false;
      },
      e.node);
}

// Side-effect free and cannot trap: safe to evaluate after a hoisted sibling.
bool is_pure(const Expr &e) {
  return std::visit(
      [](const auto &n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Literal> || std::is_same_v<N, VarRef>)
          return true;
        else if constexpr (std::is_same_v<N, Binary>)
          return n.op != BinaryOp::Div && n.op != BinaryOp::Mod && is_pure(*n.lhs) &&
                 is_pure(*n.rhs);
        else if constexpr (std::is_same_v<N, Compare>)
          return is_pure(*n.lhs) && is_pure(*n.rhs);
        else
          return false;
      },
      e.node);
}

class Lowerer {
public:
  explicit Lowerer(Function &f) : fn_(f) {}

  void run() { fn_.body = list(std::move(fn_.body)); }

private:
  uint32_t fresh(ValueType t) {
    auto idx = static_cast<uint32_t>(fn_.locals.size());
    fn_.locals.push_back({"sc" + std::to_string(idx), t});
    return idx;
  }

  static Expr ref(uint32_t local, ValueType t) {
    Expr e{VarRef{local}};
    e.type = t;
    return e;
  }

  StmtList list(StmtList in) {
    StmtList out;
    for (auto &s : in)
      stmt(std::move(s), out);
    return out;
  }

  void stmt(Stmt s, StmtList &out) {
    if (auto *d = std::get_if<Declare>(&s.node)) {
      if (d->init)
        *d->init = lower(std::move(*d->init), out);
    } else if (auto *a = std::get_if<Assign>(&s.node)) {
      std::vector<Expr *> kids;
      if (a->target.is<ArrayIndex>()) {
        auto &ai = a->target.as<ArrayIndex>();
        kids = {&*ai.base, &*ai.index, &a->value};
      } else {
        kids = {&a->value};
      }
      lower_children(kids, out);
    } else if (auto *i = std::get_if<If>(&s.node)) {
      i->cond = lower(std::move(i->cond), out);
      i->then_body = list(std::move(i->then_body));
      i->else_body = list(std::move(i->else_body));
    } else if (auto *w = std::get_if<While>(&s.node)) {
      w->body = list(std::move(w->body));
      if (contains_logical(w->cond)) {
        // c = cond; while (c) { body; c = cond; }
        uint32_t c = fresh(ValueType::Bool);
        Expr first = w->cond;
        first = lower(std::move(first), out);
        out.push_back(Declare{c, ValueType::Bool, std::move(first)});
        Expr again = lower(std::move(w->cond), w->body);
        w->body.push_back(Assign{ref(c, ValueType::Bool), std::move(again)});
        w->cond = ref(c, ValueType::Bool);
      }
    } else if (auto *r = std::get_if<Return>(&s.node)) {
      if (r->value)
        *r->value = lower(std::move(*r->value), out);
    } else if (auto *e = std::get_if<ExprStmt>(&s.node)) {
      e->expr = lower(std::move(e->expr), out);
    } else if (auto *b = std::get_if<Block>(&s.node)) {
      b->body = list(std::move(b->body));
    }
    out.push_back(std::move(s));
  }

  // Children are evaluated left to right. Everything before the last child
  // that needs hoisting is hoisted too unless it is pure, so evaluation
  // order (and which trap or external failure happens first) is preserved.
  void lower_children(const std::vector<Expr *> &kids, StmtList &out) {
    int last = -1;
    for (size_t i = 0; i < kids.size(); ++i)
      if (contains_logical(*kids[i]))
        last = static_cast<int>(i);
    for (int i = 0; i < last; ++i) {
      Expr &k = *kids[i];
      if (contains_logical(k))
        k = lower(std::move(k), out);
      if (is_pure(k))
        continue;
      auto t = *k.type;
      uint32_t tmp = fresh(t);
      out.push_back(Declare{tmp, t, std::move(k)});
      k = ref(tmp, t);
    }
    if (last >= 0)
      *kids[last] = lower(std::move(*kids[last]), out);
  }

  Expr lower(Expr e, StmtList &out) {
    if (!contains_logical(e))
      return e;
    if (auto *l = std::get_if<Logical>(&e.node)) {
      Expr a = lower(std::move(*l->lhs), out);
      uint32_t t = fresh(ValueType::Bool);
      out.push_back(Declare{t, ValueType::Bool, std::move(a)});
      StmtList inner;
      Expr b = lower(std::move(*l->rhs), inner);
      inner.push_back(Assign{ref(t, ValueType::Bool), std::move(b)});
      If branch{ref(t, ValueType::Bool), {}, {}};
      if (l->op == LogicalOp::And)
        branch.then_body = std::move(inner);
      else
        branch.else_body = std::move(inner);
      out.push_back(std::move(branch));
      return ref(t, ValueType::Bool);
    }
    std::vector<Expr *> kids;
    std::visit(
        [&](auto &n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Binary> || std::is_same_v<N, Compare>)
            kids = {&*n.lhs, &*n.rhs};
          else if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, ExternalCall>)
            for (auto &a : n.args)
              kids.push_back(&a);
          else if constexpr (std::is_same_v<N, ArrayIndex>)
            kids = {&*n.base, &*n.index};
        },
        e.node);
    lower_children(kids, out);
    return e;
  }

  Function &fn_;
};

// ---- canonical local numbering -----------------------------------------

void collect_decls(const StmtList &body, std::vector<uint32_t> &order) {
  for (const auto &s : body) {
    if (auto *d = std::get_if<Declare>(&s.node)) {
      order.push_back(d->local);
    } else if (auto *i = std::get_if<If>(&s.node)) {
      collect_decls(i->then_body, order);
      collect_decls(i->else_body, order);
    } else if (auto *w = std::get_if<While>(&s.node)) {
      collect_decls(w->body, order);
    } else if (auto *b = std::get_if<Block>(&s.node)) {
      collect_decls(b->body, order);
    }
  }
}

void remap(Expr &e, const std::vector<uint32_t> &m);

void remap(StmtList &body, const std::vector<uint32_t> &m) {
  for (auto &s : body) {
    std::visit(
        [&](auto &n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Declare>) {
            n.local = m[n.local];
            if (n.init)
              remap(*n.init, m);
          } else if constexpr (std::is_same_v<N, Assign>) {
            remap(n.target, m);
            remap(n.value, m);
          } else if constexpr (std::is_same_v<N, If>) {
            remap(n.cond, m);
            remap(n.then_body, m);
            remap(n.else_body, m);
          } else if constexpr (std::is_same_v<N, While>) {
            remap(n.cond, m);
            remap(n.body, m);
          } else if constexpr (std::is_same_v<N, Return>) {
            if (n.value)
              remap(*n.value, m);
          } else if constexpr (std::is_same_v<N, ExprStmt>) {
            remap(n.expr, m);
          } else if constexpr (std::is_same_v<N, Block>) {
            remap(n.body, m);
          }
        },
        s.node);
  }
}

void remap(Expr &e, const std::vector<uint32_t> &m) {
  std::visit(
      [&](auto &n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, VarRef>) {
          n.local = m[n.local];
        } else if constexpr (std::is_same_v<N, Binary> || std::is_same_v<N, Compare> ||
                             std::is_same_v<N, Logical>) {
          remap(*n.lhs, m);
          remap(*n.rhs, m);
        } else if constexpr (std::is_same_v<N, Not>) {
          remap(*n.operand, m);
        } else if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, ExternalCall>) {
          for (auto &a : n.args)
            remap(a, m);
        } else if constexpr (std::is_same_v<N, ArrayIndex>) {
          remap(*n.base, m);
          remap(*n.index, m);
        }
      },
      e.node);
}

void renumber(Function &f) {
  std::vector<uint32_t> order;
  for (uint32_t i = 0; i < f.param_count; ++i)
    order.push_back(i);
  collect_decls(f.body, order);
  std::vector<uint32_t> m(f.locals.size());
  std::vector<Local> locals;
  for (size_t i = 0; i < order.size(); ++i) {
    m[order[i]] = static_cast<uint32_t>(i);
    locals.push_back(f.locals[order[i]]);
  }
  f.locals = std::move(locals);
  remap(f.body, m);
}

} // namespace

bool always_returns(const StmtList &body) {
  for (const auto &s : body) {
    if (s.is<Return>())
      return true;
    if (auto *i = std::get_if<If>(&s.node))
      if (always_returns(i->then_body) && always_returns(i->else_body))
        return true;
    if (auto *b = std::get_if<Block>(&s.node))
      if (always_returns(b->body))
        return true;
  }
  return false;
}

TypedModule typecheck(const Module &module) {
  Module m = module;
  std::set<std::string> names;
  for (const auto &f : m.functions)
    if (!names.insert(f.name).second)
      throw TypeError(ErrorCode::TypeMismatch, f.name, "function defined twice");
  std::set<std::string> ext;
  for (const auto &e : m.externs) {
    if (!ext.insert(e.name).second || names.count(e.name))
      throw TypeError(ErrorCode::TypeMismatch, e.name, "external declared twice");
  }

  for (auto &f : m.functions) {
    Checker(m, f, f.name).run(f.body);
    Lowerer(f).run();
    renumber(f);
    // Lowering introduced new nodes; a second pass re-annotates and
    // re-validates the final shape.
    Checker(m, f, f.name).run(f.body);
  }
  return TypedModule(std::move(m));
}

} // namespace cpc
