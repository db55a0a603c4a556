#include "cpc/interpreter.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <pthread.h>

namespace cpc {

namespace {

struct Trap {
  Status status;
};

template <class S> uint64_t int_binary(BinaryOp op, uint64_t a, uint64_t b) {
  using U = std::make_unsigned_t<S>;
  const U x = static_cast<U>(a), y = static_cast<U>(b);
  const S sy = static_cast<S>(y);
  U r = 0;
  switch (op) {
  case BinaryOp::Add: r = static_cast<U>(x + y); break;
  case BinaryOp::Sub: r = static_cast<U>(x - y); break;
  case BinaryOp::Mul: r = static_cast<U>(x * y); break;
  case BinaryOp::Div:
  case BinaryOp::Mod:
    if (sy == 0)
      throw Trap{Status::DivByZero};
    if (sy == -1)
      r = op == BinaryOp::Div ? static_cast<U>(U{0} - x) : U{0};
    else if (op == BinaryOp::Div)
      r = static_cast<U>(static_cast<S>(x) / sy);
    else
      r = static_cast<U>(static_cast<S>(x) % sy);
    break;
  }
  return static_cast<uint64_t>(static_cast<int64_t>(static_cast<S>(r)));
}

template <class T> bool compare(CompareOp op, T a, T b) {
  switch (op) {
  case CompareOp::Eq: return a == b;
  case CompareOp::Ne: return a != b;
  case CompareOp::Lt: return a < b;
  case CompareOp::Le: return a <= b;
  case CompareOp::Gt: return a > b;
  case CompareOp::Ge: return a >= b;
  }
  return false;
}

} // namespace

Interpreter::Interpreter(const TypedModule &tm, const ExternalRegistry &externals,
                         const CodegenOptions &opts)
    : module_(tm.module()), externals_(externals), pool_bytes_(opts.frame_pool_bytes) {
  for (const auto &fn : module_.functions) {
    auto lf = lower_function(fn, opts);
    auto plan = plan_registers(lf, opts.register_budget);
    auto layout = layout_frame(fn, lf, plan);
    sizes_.push_back(layout.size);
    extents_.push_back(layout.extent());
  }
}

class InterpRun {
public:
  explicit InterpRun(const Interpreter &in) : in_(in) {}

  uint64_t call(uint32_t fi, std::vector<uint64_t> args, uint64_t frame_off) {
    if (frame_off + in_.extents_[fi] > in_.pool_bytes_)
      throw Trap{Status::FrameOverflow};
    const Function &fn = in_.module_.functions[fi];
    Activation a{fn, std::vector<uint64_t>(fn.locals.size(), 0), frame_off, 0};
    for (size_t i = 0; i < args.size(); ++i)
      a.locals[i] = args[i];
    frames_.push_back(&a);
    exec(fn.body);
    frames_.pop_back();
    return a.result;
  }

private:
  struct Activation {
    const Function &fn;
    std::vector<uint64_t> locals;
    uint64_t frame_off;
    uint64_t result;
  };

  enum class Flow { Next, Returned };

  Activation &top() { return *frames_.back(); }

  Flow exec(const StmtList &body) {
    for (const auto &s : body)
      if (exec(s) == Flow::Returned)
        return Flow::Returned;
    return Flow::Next;
  }

  Flow exec(const Stmt &s) {
    if (auto *d = std::get_if<Declare>(&s.node)) {
      top().locals[d->local] = d->init ? eval(*d->init) : 0;
    } else if (auto *a = std::get_if<Assign>(&s.node)) {
      if (auto *v = std::get_if<VarRef>(&a->target.node)) {
        top().locals[v->local] = eval(a->value);
      } else {
        const auto &ai = a->target.as<ArrayIndex>();
        uint64_t base = eval(*ai.base);
        uint64_t idx = eval(*ai.index);
        uint64_t val = eval(a->value);
        store(element(base, idx, ai.elem), ai.elem, val);
      }
    } else if (auto *i = std::get_if<If>(&s.node)) {
      return exec(eval(i->cond) ? i->then_body : i->else_body);
    } else if (auto *w = std::get_if<While>(&s.node)) {
      while (eval(w->cond))
        if (exec(w->body) == Flow::Returned)
          return Flow::Returned;
    } else if (auto *r = std::get_if<Return>(&s.node)) {
      top().result = r->value ? eval(*r->value) : 0;
      return Flow::Returned;
    } else if (auto *e = std::get_if<ExprStmt>(&s.node)) {
      eval(e->expr);
    } else if (auto *b = std::get_if<Block>(&s.node)) {
      return exec(b->body);
    }
    return Flow::Next;
  }

  static uint8_t *element(uint64_t base, uint64_t idx, ValueType t) {
    return reinterpret_cast<uint8_t *>(base + idx * storage_size(t));
  }

  static uint64_t load(const uint8_t *p, ValueType t) {
    switch (t) {
    case ValueType::I32: {
      int32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<uint64_t>(static_cast<int64_t>(v));
    }
    case ValueType::Bool:
      return *p != 0;
    default: {
      uint64_t v;
      std::memcpy(&v, p, 8);
      return v;
    }
    }
  }

  static void store(uint8_t *p, ValueType t, uint64_t v) {
    switch (t) {
    case ValueType::I32: {
      auto x = static_cast<uint32_t>(v);
      std::memcpy(p, &x, 4);
      break;
    }
    case ValueType::Bool:
      *p = v != 0;
      break;
    default:
      std::memcpy(p, &v, 8);
      break;
    }
  }

  uint64_t eval(const Expr &e) {
    if (auto *l = std::get_if<Literal>(&e.node))
      return l->bits;
    if (auto *v = std::get_if<VarRef>(&e.node))
      return top().locals[v->local];
    if (auto *b = std::get_if<Binary>(&e.node)) {
      uint64_t x = eval(*b->lhs);
      uint64_t y = eval(*b->rhs);
      switch (*e.type) {
      case ValueType::I32: return int_binary<int32_t>(b->op, x, y);
      case ValueType::I64: return int_binary<int64_t>(b->op, x, y);
      case ValueType::F64: {
        double p = std::bit_cast<double>(x), q = std::bit_cast<double>(y), r = 0;
        switch (b->op) {
        case BinaryOp::Add: r = p + q; break;
        case BinaryOp::Sub: r = p - q; break;
        case BinaryOp::Mul: r = p * q; break;
        case BinaryOp::Div: r = p / q; break;
        case BinaryOp::Mod: break;
        }
        return std::bit_cast<uint64_t>(r);
      }
      default:
        throw Error(ErrorCode::TypeMismatch, "binary on non-numeric type");
      }
    }
    if (auto *c = std::get_if<Compare>(&e.node)) {
      uint64_t x = eval(*c->lhs);
      uint64_t y = eval(*c->rhs);
      switch (*c->lhs->type) {
      case ValueType::I32:
        return compare(c->op, static_cast<int32_t>(x), static_cast<int32_t>(y));
      case ValueType::F64:
        return compare(c->op, std::bit_cast<double>(x), std::bit_cast<double>(y));
      default:
        return compare(c->op, static_cast<int64_t>(x), static_cast<int64_t>(y));
      }
    }
    if (auto *a = std::get_if<ArrayIndex>(&e.node)) {
      uint64_t base = eval(*a->base);
      uint64_t idx = eval(*a->index);
      return load(element(base, idx, a->elem), a->elem);
    }
    if (auto *c = std::get_if<Call>(&e.node)) {
      std::vector<uint64_t> args;
      for (const auto &x : c->args)
        args.push_back(eval(x));
      uint64_t r = call(c->callee, std::move(args), top().frame_off + in_.sizes_[fi()]);
      return e.type ? canonical_value(*e.type, r).bits : 0;
    }
    if (auto *x = std::get_if<ExternalCall>(&e.node)) {
      std::vector<uint64_t> block(std::max<size_t>(1, x->args.size()), 0);
      for (size_t i = 0; i < x->args.size(); ++i)
        block[i] = eval(x->args[i]);
      HostFn f = in_.externals_.find(x->symbol);
      if (!f)
        throw Error(ErrorCode::UnresolvedExternal, x->symbol);
      if (!f(block.data()))
        throw Trap{Status::ExternalError};
      return e.type ? canonical_value(*e.type, block[0]).bits : 0;
    }
    throw Error(ErrorCode::TypeMismatch, "expression was not lowered by typecheck");
  }

  uint32_t fi() {
    return static_cast<uint32_t>(&top().fn - in_.module_.functions.data());
  }

  const Interpreter &in_;
  std::vector<Activation *> frames_;
};

RunResult Interpreter::run(std::string_view name, std::span<const Literal> args) const {
  const Function &fn = check_call(module_, name, args);
  std::vector<uint64_t> a;
  for (const auto &x : args)
    a.push_back(canonical_value(x.type, x.bits).bits);
  RunResult out;
  try {
    InterpRun r(*this);
    uint64_t v = r.call(*module_.function_index(name), std::move(a), 0);
    if (fn.ret)
      out.value = canonical_value(*fn.ret, v);
  } catch (const Trap &t) {
    out.status = t.status;
  }
  return out;
}

namespace {
struct StackTask {
  const std::function<void()> *fn;
  std::exception_ptr error;
};

void *stack_entry(void *p) {
  auto *t = static_cast<StackTask *>(p);
  try {
    (*t->fn)();
  } catch (...) {
    t->error = std::current_exception();
  }
  return nullptr;
}
} // namespace

void run_with_stack(size_t bytes, const std::function<void()> &fn) {
  pthread_attr_t attr;
  pthread_attr_init(&attr);
  pthread_attr_setstacksize(&attr, bytes);
  StackTask task{&fn, nullptr};
  pthread_t th;
  int rc = pthread_create(&th, &attr, stack_entry, &task);
  pthread_attr_destroy(&attr);
  if (rc != 0)
    throw Error(ErrorCode::OutOfMemory, "cannot create a thread with a " +
                                            std::to_string(bytes) + "-byte stack");
  pthread_join(th, nullptr);
  if (task.error)
    std::rethrow_exception(task.error);
}

} // namespace cpc
