#include "cpc/codegen.hpp"

#include <algorithm>
#include <climits>
#include <sstream>

namespace cpc {

namespace {

[[noreturn]] void internal(const std::string &what) {
  throw Error(ErrorCode::InvalidArgument, "codegen: " + what);
}

bool is_int_literal_of(const Expr &e, ValueType t) {
  return e.is<Literal>() && e.as<Literal>().type == t;
}

// ---- lowering ---------------------------------------------------------------

class Lowering {
public:
  Lowering(const Function &fn, const CodegenOptions &opts) : fn_(fn), opts_(opts) {}

  LoweredFunction run() {
    ProtoNode entry;
    entry.kind = NodeKind::FunctionEntry;
    add(std::move(entry), 1);
    for (size_t i = 0; i < fn_.body.size(); ++i) {
      stmt_ = static_cast<int>(i);
      stmt(fn_.body[i]);
    }
    if (!open_.empty()) {
      if (fn_.ret)
        internal("function '" + fn_.name + "' falls off its end");
      ProtoNode r;
      r.kind = NodeKind::Return;
      add(std::move(r), 0);
    }
    return std::move(out_);
  }

private:
  // Appends a node, attaching every dangling edge to it.
  int add(ProtoNode n, uint32_t nconts) {
    int idx = static_cast<int>(out_.nodes.size());
    n.conts.assign(nconts, -1);
    n.stmt = stmt_;
    for (auto [p, k] : open_)
      out_.nodes[p].conts[k] = idx;
    open_.clear();
    // Operands that are temps are the top of the temp stack, in order.
    for (const auto &o : n.operands)
      if (o.kind == ProtoOperand::Kind::Temp)
        n.consumes.push_back(o.id);
    if (n.consumes.size() > temps_.size())
      internal("temp stack underflow");
    for (size_t i = 0; i < n.consumes.size(); ++i)
      if (temps_[temps_.size() - n.consumes.size() + i] != n.consumes[i])
        internal("operands are not the top of the temp stack");
    temps_.resize(temps_.size() - n.consumes.size());
    if (n.produces && !n.discard)
      temps_.push_back(*n.produces);
    out_.nodes.push_back(std::move(n));
    if (nconts == 1)
      open_ = {{idx, 0}};
    return idx;
  }

  uint32_t fresh_temp() { return out_.temp_count++; }

  ProtoOperand operand(const Expr &e, bool allow_lit) {
    if (auto *v = std::get_if<VarRef>(&e.node))
      return {ProtoOperand::Kind::Local, v->local, 0};
    if (allow_lit)
      if (auto *l = std::get_if<Literal>(&e.node))
        return {ProtoOperand::Kind::Lit, 0, l->bits};
    return {ProtoOperand::Kind::Temp, eval(e), 0};
  }

  // Evaluates `e` into a fresh temp and returns its id.
  uint32_t eval(const Expr &e, bool discard = false) {
    ProtoNode n;
    if (auto *l = std::get_if<Literal>(&e.node)) {
      n.kind = NodeKind::Literal;
      n.type = l->type;
      n.lit = l->bits;
    } else if (auto *b = std::get_if<Binary>(&e.node)) {
      n.kind = NodeKind::Binary;
      n.op = static_cast<uint8_t>(b->op);
      n.type = e.type;
      binary_operands(*b->lhs, *b->rhs, n);
    } else if (auto *c = std::get_if<Compare>(&e.node)) {
      n.kind = NodeKind::Compare;
      n.op = static_cast<uint8_t>(c->op);
      n.type = c->lhs->type;
      binary_operands(*c->lhs, *c->rhs, n);
    } else if (auto *a = std::get_if<ArrayIndex>(&e.node)) {
      n.kind = NodeKind::ArrayLoad;
      n.type = a->elem;
      n.operands.push_back(operand(*a->base, false));
      n.operands.push_back(operand(*a->index, false));
    } else if (e.is<Call>() || e.is<ExternalCall>()) {
      return call(e, discard);
    } else {
      internal("unexpected expression in lowering");
    }
    uint32_t t = fresh_temp();
    n.produces = t;
    n.discard = discard;
    add(std::move(n), 1);
    return t;
  }

  void binary_operands(const Expr &lhs, const Expr &rhs, ProtoNode &n) {
    // (Lit, Lit) has no stencil: the left literal is materialized.
    bool both_lit = lhs.is<Literal>() && rhs.is<Literal>();
    n.operands.push_back(operand(lhs, !both_lit));
    n.operands.push_back(operand(rhs, true));
  }

  // Arguments are evaluated left to right, then stored right to left into
  // the callee's parameter slots (or the external argument block).
  uint32_t call(const Expr &e, bool discard) {
    const std::vector<Expr> &args =
        e.is<Call>() ? e.as<Call>().args : e.as<ExternalCall>().args;
    bool external = e.is<ExternalCall>();
    std::vector<ProtoOperand> ops;
    for (const auto &a : args)
      ops.push_back(operand(a, true));
    for (size_t i = args.size(); i-- > 0;) {
      ProtoNode st;
      st.kind = NodeKind::VarStore;
      st.type = args[i].type;
      st.operands = {ops[i]};
      st.dest = {external ? StoreDest::Kind::ExternSlot : StoreDest::Kind::OutArg,
                 static_cast<uint32_t>(i)};
      add(std::move(st), 1);
    }
    ProtoNode n;
    n.is_call = true;
    n.type = e.type;
    if (external) {
      n.kind = NodeKind::ExternalCall;
      n.symbol = e.as<ExternalCall>().symbol;
      out_.extern_slots = std::max<uint32_t>(out_.extern_slots, std::max<size_t>(1, args.size()));
    } else {
      n.kind = NodeKind::Call;
      n.callee = e.as<Call>().callee;
      // At least one slot so a parameterless callee's frame starts inside the
      // caller's checked extent.
      out_.max_outgoing =
          std::max<uint32_t>(out_.max_outgoing, std::max<uint32_t>(1, static_cast<uint32_t>(args.size())));
    }
    uint32_t t = UINT32_MAX;
    if (e.type) {
      t = fresh_temp();
      n.produces = t;
      n.discard = discard;
    }
    add(std::move(n), 1);
    return t;
  }

  void store_local(uint32_t local, const Expr &value) {
    if (opts_.enable_supernodes && match_binary_var_const(value)) {
      const auto &b = value.as<Binary>();
      ProtoNode n;
      n.kind = NodeKind::BinaryVarConst;
      n.op = static_cast<uint8_t>(b.op);
      n.type = value.type;
      n.local = local;
      n.src_local = b.lhs->as<VarRef>().local;
      n.lit = b.rhs->as<Literal>().bits;
      add(std::move(n), 1);
      return;
    }
    ProtoNode n;
    n.kind = NodeKind::VarStore;
    n.type = value.type;
    n.dest = {StoreDest::Kind::Local, local};
    n.operands = {operand(value, true)};
    add(std::move(n), 1);
  }

  static bool match_binary_var_const(const Expr &e) {
    auto *b = std::get_if<Binary>(&e.node);
    if (!b || !e.type || !is_integer(*e.type))
      return false;
    return b->lhs->is<VarRef>() && is_int_literal_of(*b->rhs, *e.type);
  }

  int branch(const Expr &cond) {
    if (opts_.enable_supernodes && match_supernode(cond) == Supernode::CompareVarConst) {
      const auto &c = cond.as<Compare>();
      if (c.lhs->type && is_integer(*c.lhs->type)) {
        ProtoNode n;
        n.kind = NodeKind::IfCmpVarConst;
        n.op = static_cast<uint8_t>(c.op);
        n.type = c.lhs->type;
        n.local = c.lhs->as<VarRef>().local;
        n.lit = c.rhs->as<Literal>().bits;
        return add(std::move(n), 2);
      }
    }
    ProtoNode n;
    n.kind = NodeKind::Branch;
    n.operands = {operand(cond, false)};
    return add(std::move(n), 2);
  }

  void stmts(const StmtList &body) {
    for (const auto &s : body)
      stmt(s);
  }

  void stmt(const Stmt &s) {
    if (auto *d = std::get_if<Declare>(&s.node)) {
      if (d->init) {
        store_local(d->local, *d->init);
      } else {
        ProtoNode n;
        n.kind = NodeKind::VarStore;
        n.type = d->type;
        n.dest = {StoreDest::Kind::Local, d->local};
        n.operands = {{ProtoOperand::Kind::Lit, 0, 0}};
        add(std::move(n), 1);
      }
    } else if (auto *a = std::get_if<Assign>(&s.node)) {
      if (auto *v = std::get_if<VarRef>(&a->target.node)) {
        store_local(v->local, a->value);
      } else {
        const auto &ai = a->target.as<ArrayIndex>();
        ProtoNode n;
        n.kind = NodeKind::ArrayStore;
        n.type = ai.elem;
        n.operands.push_back(operand(*ai.base, false));
        n.operands.push_back(operand(*ai.index, false));
        n.operands.push_back(operand(a->value, false));
        add(std::move(n), 1);
      }
    } else if (auto *i = std::get_if<If>(&s.node)) {
      int b = branch(i->cond);
      open_ = {{b, 0}};
      stmts(i->then_body);
      auto then_exits = std::move(open_);
      open_ = {{b, 1}};
      stmts(i->else_body);
      open_.insert(open_.end(), then_exits.begin(), then_exits.end());
    } else if (auto *w = std::get_if<While>(&s.node)) {
      int head = static_cast<int>(out_.nodes.size());
      int b = branch(w->cond);
      open_ = {{b, 0}};
      stmts(w->body);
      for (auto [p, k] : open_)
        out_.nodes[p].conts[k] = head;
      open_ = {{b, 1}};
    } else if (auto *r = std::get_if<Return>(&s.node)) {
      ProtoNode n;
      n.kind = NodeKind::Return;
      if (r->value) {
        n.type = r->value->type;
        n.operands = {operand(*r->value, false)};
      }
      add(std::move(n), 0);
    } else if (auto *e = std::get_if<ExprStmt>(&s.node)) {
      if (!e->expr.is<VarRef>() && !e->expr.is<Literal>())
        eval(e->expr, true);
    } else if (auto *b = std::get_if<Block>(&s.node)) {
      stmts(b->body);
    }
  }

  const Function &fn_;
  const CodegenOptions &opts_;
  LoweredFunction out_;
  std::vector<std::pair<int, int>> open_;
  std::vector<uint32_t> temps_;
  int stmt_ = -1;
};

uint8_t width_of(ValueType t) {
  return t == ValueType::I32 || t == ValueType::Bool ? 32 : 64;
}

} // namespace

LoweredFunction lower_function(const Function &fn, const CodegenOptions &opts) {
  return Lowering(fn, opts).run();
}

// ---- register planning ------------------------------------------------------

uint32_t RegPlan::spill_count() const noexcept {
  return static_cast<uint32_t>(std::count(spilled.begin(), spilled.end(), true));
}

RegPlan plan_registers(const LoweredFunction &lf, int budget) {
  RegPlan plan;
  plan.budget = budget;
  plan.spilled.assign(lf.temp_count, false);
  plan.pass_through.assign(lf.nodes.size(), 0);
  auto k = static_cast<size_t>(std::max(0, budget));

  // Pass 1: abstract evaluation of the temp stack. Spilled temps always
  // form a prefix of the stack; `lo` is the first register-resident entry.
  std::vector<uint32_t> st;
  size_t lo = 0;
  for (const auto &n : lf.nodes) {
    st.resize(st.size() - n.consumes.size());
    lo = std::min(lo, st.size());
    if (n.is_call) {
      for (auto t : st)
        plan.spilled[t] = true;
      lo = st.size();
    }
    if (n.produces) {
      st.push_back(*n.produces);
      if (st.size() - lo > k)
        plan.spilled[st[lo++]] = true;
      if (n.discard) {
        st.pop_back();
        lo = std::min(lo, st.size());
      }
    }
  }

  // Pass 2: replay with final decisions to count pass-through registers.
  st.clear();
  for (size_t i = 0; i < lf.nodes.size(); ++i) {
    const auto &n = lf.nodes[i];
    st.resize(st.size() - n.consumes.size());
    size_t live = 0;
    for (auto t : st)
      live += !plan.spilled[t];
    plan.pass_through[i] = static_cast<uint8_t>(live);
    if (n.produces && !n.discard)
      st.push_back(*n.produces);
  }
  return plan;
}

RegPlan plan_registers(const Function &fn, int budget) {
  return plan_registers(lower_function(fn), budget);
}

// ---- frame layout -----------------------------------------------------------

FrameLayout layout_frame(const Function &fn, const LoweredFunction &lf, const RegPlan &plan) {
  FrameLayout fl;
  uint32_t slot = 0;
  fl.local_offset.resize(fn.locals.size());
  for (size_t i = 0; i < fn.locals.size(); ++i)
    fl.local_offset[i] = 8 * slot++;
  fl.extern_slots = lf.extern_slots;
  fl.extern_block = 8 * slot;
  slot += lf.extern_slots;
  const uint32_t spill_base = 8 * slot;

  fl.spill_offset.assign(lf.temp_count, UINT32_MAX);
  std::vector<uint32_t> free_list;
  uint32_t next = 0;
  auto release = [&](uint32_t t) {
    if (plan.spilled[t])
      free_list.push_back(fl.spill_offset[t]);
  };
  for (const auto &n : lf.nodes) {
    for (auto t : n.consumes)
      release(t);
    if (n.produces && plan.spilled[*n.produces]) {
      uint32_t off;
      if (free_list.empty()) {
        off = spill_base + 8 * next++;
      } else {
        off = free_list.back();
        free_list.pop_back();
      }
      fl.spill_offset[*n.produces] = off;
      fl.allocation_order.push_back(off);
      if (n.discard)
        release(*n.produces);
    }
  }
  fl.spill_slots = next;
  fl.size = spill_base + 8 * next;
  fl.outgoing_slots = lf.max_outgoing;
  return fl;
}

FrameLayout layout_frame(const Function &fn, const RegPlan &plan) {
  auto lf = lower_function(fn);
  return layout_frame(fn, lf, plan);
}

// ---- supernodes ---------------------------------------------------------------

std::string_view to_string(Supernode s) noexcept {
  switch (s) {
  case Supernode::None: return "none";
  case Supernode::IfCmpVarConst: return "IfCmpVarConst";
  case Supernode::BinaryVarConst: return "BinaryVarConst";
  case Supernode::CompareVarConst: return "CompareVarConst";
  }
  return "?";
}

Supernode match_supernode(const Expr &e) noexcept {
  if (auto *c = std::get_if<Compare>(&e.node))
    if (c->lhs->is<VarRef>() && c->rhs->is<Literal>())
      return Supernode::CompareVarConst;
  return Supernode::None;
}

Supernode match_supernode(const Stmt &s) noexcept {
  if (auto *i = std::get_if<If>(&s.node)) {
    if (match_supernode(i->cond) == Supernode::CompareVarConst) {
      auto t = i->cond.as<Compare>().lhs->type;
      if (!t || is_integer(*t))
        return Supernode::IfCmpVarConst;
    }
    return match_supernode(i->cond);
  }
  const Expr *value = nullptr;
  if (auto *a = std::get_if<Assign>(&s.node); a && a->target.is<VarRef>())
    value = &a->value;
  if (auto *d = std::get_if<Declare>(&s.node); d && d->init)
    value = &*d->init;
  if (value) {
    if (auto *b = std::get_if<Binary>(&value->node)) {
      bool int_typed = !value->type || is_integer(*value->type);
      if (int_typed && b->lhs->is<VarRef>() && b->rhs->is<Literal>())
        return Supernode::BinaryVarConst;
    }
    return match_supernode(*value);
  }
  if (auto *r = std::get_if<Return>(&s.node); r && r->value)
    return match_supernode(*r->value);
  return Supernode::None;
}

// ---- key shapes ---------------------------------------------------------------

uint32_t continuation_count(NodeKind kind) noexcept {
  switch (kind) {
  case NodeKind::Return: return 0;
  case NodeKind::Branch:
  case NodeKind::IfCmpVarConst: return 2;
  default: return 1;
  }
}

std::vector<uint8_t> value_hole_widths(const StencilKey &key) {
  std::vector<uint8_t> w;
  auto t = key.value_type();
  auto lit_w = t ? width_of(*t) : uint8_t{64};
  auto operands = [&] {
    for (int i = 0; i < key.nlocs; ++i) {
      if (key.locs[i] == Loc::Stack)
        w.push_back(32);
      else if (key.locs[i] == Loc::Lit)
        w.push_back(lit_w);
    }
  };
  switch (key.kind) {
  case NodeKind::FunctionEntry:
    w = {32, 64};
    break;
  case NodeKind::Literal:
    w = {lit_w};
    break;
  case NodeKind::VarStore:
    w = {32};
    operands();
    break;
  case NodeKind::VarLoad:
    w = {32};
    break;
  case NodeKind::Binary:
  case NodeKind::Compare:
  case NodeKind::ArrayLoad:
  case NodeKind::ArrayStore:
  case NodeKind::Branch:
  case NodeKind::Return:
    operands();
    break;
  case NodeKind::IfCmpVarConst:
    w = {32, lit_w};
    break;
  case NodeKind::BinaryVarConst:
    w = {32, 32, lit_w};
    break;
  case NodeKind::Call:
    w = {32, 32};
    break;
  case NodeKind::ExternalCall:
    w = {32, 64};
    break;
  case NodeKind::Jump:
    break;
  }
  if (key.spill)
    w.push_back(32);
  return w;
}

std::vector<bool> value_hole_pcrel(const StencilKey &key) {
  std::vector<bool> r(value_hole_widths(key).size(), false);
  if (key.kind == NodeKind::Call)
    r[0] = true;
  return r;
}

// ---- CPS graph -----------------------------------------------------------------

std::vector<int> dfs_order(const std::vector<CPSNode> &nodes, int entry) {
  std::vector<int> order;
  if (nodes.empty())
    return order;
  std::vector<bool> seen(nodes.size(), false);
  std::vector<int> stack{entry};
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (n < 0 || seen[n])
      continue;
    seen[n] = true;
    order.push_back(n);
    const auto &c = nodes[n].conts;
    for (size_t k = c.size(); k-- > 0;)
      if (c[k] >= 0 && !seen[c[k]])
        stack.push_back(c[k]);
  }
  return order;
}

CPSGraph build_cps_graph(const LoweredFunction &lf, const RegPlan &plan,
                         const FrameLayout &layout, const StencilLibrary *lib,
                         const CodegenOptions &opts) {
  CPSGraph g;
  g.nodes.reserve(lf.nodes.size());
  const uint64_t mask = ~(opts.frame_pool_bytes - 1);
  for (size_t i = 0; i < lf.nodes.size(); ++i) {
    const ProtoNode &p = lf.nodes[i];
    CPSNode n;
    n.conts = p.conts;
    n.is_call = p.is_call;
    n.stmt = p.stmt;
    StencilKey &k = n.key;
    k.kind = p.kind;
    k.op = p.op;
    k.set_type(p.type);
    k.nlocs = static_cast<uint8_t>(p.operands.size());
    k.pt = plan.pass_through[i];
    k.spill = p.produces && plan.spilled[*p.produces];

    std::vector<uint64_t> operand_values;
    for (size_t j = 0; j < p.operands.size(); ++j) {
      const auto &o = p.operands[j];
      switch (o.kind) {
      case ProtoOperand::Kind::Temp:
        if (plan.spilled[o.id]) {
          k.locs[j] = Loc::Stack;
          operand_values.push_back(layout.spill_offset[o.id]);
        } else {
          k.locs[j] = Loc::Reg;
        }
        break;
      case ProtoOperand::Kind::Local:
        k.locs[j] = Loc::Stack;
        operand_values.push_back(layout.local_offset[o.id]);
        break;
      case ProtoOperand::Kind::Lit:
        k.locs[j] = Loc::Lit;
        operand_values.push_back(o.bits);
        break;
      }
    }

    auto &v = n.values;
    switch (p.kind) {
    case NodeKind::FunctionEntry:
      v = {layout.extent(), mask};
      break;
    case NodeKind::Literal:
      v = {p.lit};
      break;
    case NodeKind::VarStore: {
      uint64_t dst = 0;
      switch (p.dest.kind) {
      case StoreDest::Kind::Local: dst = layout.local_offset[p.dest.index]; break;
      case StoreDest::Kind::OutArg: dst = layout.size + 8 * p.dest.index; break;
      case StoreDest::Kind::ExternSlot: dst = layout.extern_block + 8 * p.dest.index; break;
      }
      v = {dst};
      v.insert(v.end(), operand_values.begin(), operand_values.end());
      break;
    }
    case NodeKind::IfCmpVarConst:
      v = {layout.local_offset[p.local], p.lit};
      break;
    case NodeKind::BinaryVarConst:
      v = {layout.local_offset[p.local], layout.local_offset[p.src_local], p.lit};
      break;
    case NodeKind::Call:
      v = {0, layout.size};
      n.deferred.push_back({DeferredBinding::Kind::CalleeEntry, 0, p.callee, {}});
      break;
    case NodeKind::ExternalCall:
      v = {layout.extern_block, 0};
      n.deferred.push_back({DeferredBinding::Kind::ExternalFunction, 1, 0, p.symbol});
      break;
    default:
      v = operand_values;
      break;
    }
    if (k.spill)
      v.push_back(layout.spill_offset[*p.produces]);
    if (lib)
      lib->select(k);
    g.nodes.push_back(std::move(n));
  }
  g.entry = 0;
  g.order = dfs_order(g.nodes, g.entry);
  return g;
}

std::string CPSGraph::describe() const {
  std::ostringstream os;
  std::vector<int> pos(nodes.size(), -1);
  for (size_t i = 0; i < order.size(); ++i)
    pos[order[i]] = static_cast<int>(i);
  for (int n : order) {
    const auto &node = nodes[n];
    os << "n" << n << "  " << node.key.describe();
    if (!node.values.empty()) {
      os << "  holes{";
      for (size_t i = 0; i < node.values.size(); ++i) {
        bool deferred = std::any_of(node.deferred.begin(), node.deferred.end(),
                                    [&](const auto &d) { return d.ordinal == i; });
        os << (i ? ", " : "");
        if (deferred)
          os << "link";
        else
          os << static_cast<int64_t>(node.values[i]);
      }
      os << "}";
    }
    for (size_t k = 0; k < node.conts.size(); ++k)
      os << "  c" << k << "->n" << node.conts[k];
    if (node.is_call)
      os << "  [call]";
    os << "\n";
  }
  return os.str();
}

// ---- emission ------------------------------------------------------------------

std::string_view to_string(Status s) noexcept {
  switch (s) {
  case Status::Ok: return "ok";
  case Status::ExternalError: return "external-error";
  case Status::DivByZero: return "trap:div-by-zero";
  case Status::FrameOverflow: return "trap:frame-overflow";
  }
  return "?";
}

CompiledFunction emit(const CPSGraph &graph, const StencilLibrary &lib, EmitTarget &target,
                      const CodegenOptions &opts) {
  const auto &order = graph.order;
  const size_t n = order.size();
  std::vector<const Stencil *> st(n);
  std::vector<bool> elide(n, false);
  std::vector<uint32_t> offset(graph.nodes.size(), 0);
  uint32_t total = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto &node = graph.nodes[order[i]];
    st[i] = &lib.select(node.key);
    elide[i] = opts.enable_jump_elision && st[i]->tail && !node.conts.empty() && i + 1 < n &&
               node.conts[0] == order[i + 1];
    offset[order[i]] = total;
    total += static_cast<uint32_t>(st[i]->size(elide[i]));
  }
  if (target.capacity - target.used < total)
    throw EmitOverflowError(target.used + total);

  CompiledFunction cf;
  cf.base = target.address + target.used;
  cf.length = total;
  cf.entry_offset = offset[graph.entry];
  cf.spans.reserve(n);
  uint8_t *out = target.data + target.used;
  std::vector<uint64_t> conts;
  for (size_t i = 0; i < n; ++i) {
    const auto &node = graph.nodes[order[i]];
    const Stencil &s = *st[i];
    uint32_t off = offset[order[i]];
    conts.assign(node.conts.size(), 0);
    for (size_t k = 0; k < node.conts.size(); ++k)
      conts[k] = cf.base + offset[node.conts[k]];
    // Link-time holes get an in-range placeholder until link_module runs.
    std::vector<uint64_t> values = node.values;
    for (const auto &d : node.deferred)
      values[d.ordinal] = cf.base;
    HoleValues hv{values, conts, nullptr};
    size_t len = materialize(s, cf.base + off, hv, elide[i], out + off);
    cf.spans.push_back({order[i], off, static_cast<uint32_t>(len), static_cast<bool>(elide[i])});
    for (const auto &p : s.patches) {
      if (p.offset >= len)
        continue;
      if (p.target.kind == HoleTarget::Kind::Continuation)
        ++cf.retained_jumps;
      for (const auto &d : node.deferred)
        if (p.target == HoleTarget::value(d.ordinal))
          cf.deferred.push_back({off, p, d});
    }
  }
  target.used += total;
  return cf;
}

void link_module(std::vector<CompiledFunction> &fns, uint8_t *region_data, uint64_t region_address,
                 const std::map<std::string, uint64_t, std::less<>> &externals) {
  for (auto &f : fns) {
    uint8_t *base = region_data + (f.base - region_address);
    for (const auto &d : f.deferred) {
      uint64_t target = 0;
      if (d.binding.kind == DeferredBinding::Kind::CalleeEntry) {
        if (d.binding.callee >= fns.size())
          throw Error(ErrorCode::UnresolvedExternal,
                      "call to function index " + std::to_string(d.binding.callee));
        target = fns[d.binding.callee].entry();
      } else {
        auto it = externals.find(d.binding.symbol);
        if (it == externals.end())
          throw Error(ErrorCode::UnresolvedExternal, d.binding.symbol);
        target = it->second;
      }
      apply_patch(d.patch, base + d.offset, f.base + d.offset, target);
    }
  }
}

CompiledFunction compile_function(const Function &fn, const StencilLibrary &lib, EmitTarget &target,
                                  const CodegenOptions &opts) {
  auto lf = lower_function(fn, opts);
  auto plan = plan_registers(lf, opts.register_budget);
  auto layout = layout_frame(fn, lf, plan);
  auto graph = build_cps_graph(lf, plan, layout, nullptr, opts);
  auto cf = emit(graph, lib, target, opts);
  cf.name = fn.name;
  cf.frame_extent = layout.extent();
  cf.spills = plan.spill_count();
  return cf;
}

} // namespace cpc
