#pragma once

#include "cpc/stencil.hpp"
#include "cpc/typecheck.hpp"

#include <map>
#include <string>
#include <vector>

namespace cpc {

struct CodegenOptions {
  /// Register budget K. 0 forces every temporary into a frame slot.
  int register_budget = kMaxPassThrough;
  bool enable_supernodes = true;
  bool enable_jump_elision = true;
  /// Size of the frame pool generated code runs on (power of two); the
  /// entry stencil's overflow check is patched with the matching mask.
  uint64_t frame_pool_bytes = uint64_t{1} << 20;
};

// ---- lowering -------------------------------------------------------------

/// Operand of a lowered node before register decisions are applied.
struct ProtoOperand {
  enum class Kind : uint8_t { Temp, Local, Lit };
  Kind kind = Kind::Temp;
  uint32_t id = 0;   // temp id or local index
  uint64_t bits = 0; // literal payload
};

/// Where a VarStore writes.
struct StoreDest {
  enum class Kind : uint8_t { Local, OutArg, ExternSlot };
  Kind kind = Kind::Local;
  uint32_t index = 0;
};

/// One stencil instance in evaluation order, with continuation edges but
/// without register/frame decisions.
struct ProtoNode {
  NodeKind kind = NodeKind::Literal;
  uint8_t op = 0;
  std::optional<ValueType> type;
  std::vector<ProtoOperand> operands;
  /// Temp ids consumed from the top of the temp stack, bottom first.
  std::vector<uint32_t> consumes;
  std::optional<uint32_t> produces;
  /// The produced value is unused (expression statement).
  bool discard = false;
  bool is_call = false;
  StoreDest dest;           // VarStore
  uint32_t local = 0;       // IfCmpVarConst var / BinaryVarConst dst
  uint32_t src_local = 0;   // BinaryVarConst src
  uint64_t lit = 0;         // Literal / IfCmpVarConst / BinaryVarConst constant
  uint32_t callee = 0;      // Call
  std::string symbol;       // ExternalCall
  std::vector<int> conts;   // node index per continuation ordinal, -1 if unset
  int stmt = -1;            // top-level statement index, for reports
};

struct LoweredFunction {
  std::vector<ProtoNode> nodes;
  uint32_t temp_count = 0;
  uint32_t max_outgoing = 0;    // largest callee parameter count
  uint32_t extern_slots = 0;    // argument-block slots, 0 when no external calls
};

LoweredFunction lower_function(const Function &fn, const CodegenOptions &opts = {});

// ---- register planning and frame layout ------------------------------------

struct RegPlan {
  int budget = kMaxPassThrough;
  /// Indexed by temp id (production order).
  std::vector<bool> spilled;
  /// Per lowered node: live register temporaries passed through it.
  std::vector<uint8_t> pass_through;
  uint32_t spill_count() const noexcept;
};

RegPlan plan_registers(const LoweredFunction &lf, int budget);
RegPlan plan_registers(const Function &fn, int budget);

struct FrameLayout {
  /// Frame bytes owned by the function (params, locals, spill slots,
  /// external-call block), 8-byte slots.
  uint32_t size = 0;
  std::vector<uint32_t> local_offset;
  /// Per temp id; UINT32_MAX when the temp lives in a register.
  std::vector<uint32_t> spill_offset;
  uint32_t spill_slots = 0;
  uint32_t extern_block = 0;
  uint32_t extern_slots = 0;
  uint32_t outgoing_slots = 0;
  /// Spill-slot offsets in allocation order (shows LIFO reuse).
  std::vector<uint32_t> allocation_order;

  /// Bytes the function needs from the frame pool: own frame plus the
  /// callee parameter area that starts at `size`.
  uint32_t extent() const noexcept { return std::max<uint32_t>(8, size + 8 * outgoing_slots); }
};

FrameLayout layout_frame(const Function &fn, const LoweredFunction &lf, const RegPlan &plan);
FrameLayout layout_frame(const Function &fn, const RegPlan &plan);

// ---- supernodes -----------------------------------------------------------

enum class Supernode : uint8_t { None, IfCmpVarConst, BinaryVarConst, CompareVarConst };

std::string_view to_string(Supernode s) noexcept;
/// Priority IfCmpVarConst > BinaryVarConst > CompareVarConst.
Supernode match_supernode(const Stmt &s) noexcept;
Supernode match_supernode(const Expr &e) noexcept;

// ---- CPS graph -------------------------------------------------------------

/// A hole value resolved only at link time.
struct DeferredBinding {
  enum class Kind : uint8_t { CalleeEntry, ExternalFunction };
  Kind kind = Kind::CalleeEntry;
  uint32_t ordinal = 0; // value ordinal
  uint32_t callee = 0;
  std::string symbol;
};

struct CPSNode {
  StencilKey key;
  std::vector<uint64_t> values;
  std::vector<int> conts;
  std::vector<DeferredBinding> deferred;
  bool is_call = false;
  int stmt = -1;
};

struct CPSGraph {
  std::vector<CPSNode> nodes;
  int entry = 0;
  /// Depth-first order from the entry following ordinal 0 first; nodes
  /// unreachable from the entry are not emitted.
  std::vector<int> order;

  std::string describe() const;
};

/// Throws MissingVariant when `lib` lacks a selected key (pass nullptr to
/// skip the check).
CPSGraph build_cps_graph(const LoweredFunction &lf, const RegPlan &plan,
                         const FrameLayout &layout, const StencilLibrary *lib,
                         const CodegenOptions &opts = {});

std::vector<int> dfs_order(const std::vector<CPSNode> &nodes, int entry);

// ---- emission ---------------------------------------------------------------

/// A writable byte range that will be executed at `address`.
struct EmitTarget {
  uint8_t *data = nullptr;
  uint64_t address = 0;
  size_t capacity = 0;
  size_t used = 0;
};

struct NodeSpan {
  int node = 0;
  uint32_t offset = 0;
  uint32_t length = 0;
  bool tail_elided = false;
};

struct DeferredPatch {
  uint32_t offset; // function-relative patch site base (stencil start)
  PatchRecord patch;
  DeferredBinding binding;
};

struct CompiledFunction {
  std::string name;
  uint64_t base = 0;
  uint32_t length = 0;
  uint32_t entry_offset = 0;
  uint32_t retained_jumps = 0;
  uint32_t frame_extent = 0;
  uint32_t spills = 0;
  std::vector<NodeSpan> spans;
  std::vector<DeferredPatch> deferred;

  uint64_t entry() const noexcept { return base + entry_offset; }
};

/// Copies stencils in graph order into `target` and patches all holes that
/// are known now. Throws EmitOverflowError (nothing written) when the
/// remaining capacity is too small.
CompiledFunction emit(const CPSGraph &graph, const StencilLibrary &lib, EmitTarget &target,
                      const CodegenOptions &opts = {});

/// Resolves call targets and external functions across a module. All
/// functions live in one region whose bytes start at `region_data`.
void link_module(std::vector<CompiledFunction> &fns, uint8_t *region_data, uint64_t region_address,
                 const std::map<std::string, uint64_t, std::less<>> &externals);

/// lower + plan + layout + graph + emit for one function.
CompiledFunction compile_function(const Function &fn, const StencilLibrary &lib, EmitTarget &target,
                                  const CodegenOptions &opts = {});

/// Value-hole widths (in bits) for a key, in ordinal order; shared by the
/// mock stencil builder and validation.
std::vector<uint8_t> value_hole_widths(const StencilKey &key);
/// Value holes patched pc-relative (call targets).
std::vector<bool> value_hole_pcrel(const StencilKey &key);
uint32_t continuation_count(NodeKind kind) noexcept;

/// Status codes carried in the second return register of every stencil.
enum class Status : uint64_t { Ok = 0, ExternalError = 1, DivByZero = 2, FrameOverflow = 3 };
std::string_view to_string(Status s) noexcept;

} // namespace cpc
