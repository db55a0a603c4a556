#include "cpc/exec.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <sys/mman.h>
#include <unistd.h>

namespace cpc {

ExecRegion::ExecRegion(size_t capacity) {
  if (capacity == 0)
    throw Error(ErrorCode::InvalidArgument, "empty code region");
  size_t page = static_cast<size_t>(::sysconf(_SC_PAGESIZE));
  capacity_ = (capacity + page - 1) / page * page;
  void *p = ::mmap(nullptr, capacity_, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (p == MAP_FAILED)
    throw Error(ErrorCode::OutOfMemory, "mmap of " + std::to_string(capacity_) + " bytes");
  base_ = static_cast<uint8_t *>(p);
}

ExecRegion::ExecRegion(ExecRegion &&o) noexcept
    : base_(std::exchange(o.base_, nullptr)), capacity_(std::exchange(o.capacity_, 0)),
      sealed_(o.sealed_) {}

ExecRegion &ExecRegion::operator=(ExecRegion &&o) noexcept {
  if (this != &o) {
    if (base_)
      ::munmap(base_, capacity_);
    base_ = std::exchange(o.base_, nullptr);
    capacity_ = std::exchange(o.capacity_, 0);
    sealed_ = o.sealed_;
  }
  return *this;
}

ExecRegion::~ExecRegion() {
  if (base_)
    ::munmap(base_, capacity_);
}

uint8_t *ExecRegion::writable() {
  if (sealed_)
    throw Error(ErrorCode::RegionSealed, "code region is already executable");
  return base_;
}

EmitTarget ExecRegion::target() { return EmitTarget{writable(), address(), capacity_, 0}; }

void ExecRegion::seal() {
  if (sealed_)
    return;
  if (::mprotect(base_, capacity_, PROT_READ | PROT_EXEC) != 0)
    throw Error(ErrorCode::PlatformDenied, std::string("mprotect: ") + std::strerror(errno));
  sealed_ = true;
}

FramePool::FramePool(uint64_t bytes) {
  if (bytes < 64 || !std::has_single_bit(bytes))
    throw Error(ErrorCode::InvalidArgument,
                "frame pool size must be a power of two >= 64, got " + std::to_string(bytes));
  data_ = static_cast<uint8_t *>(std::aligned_alloc(bytes, bytes));
  if (!data_)
    throw Error(ErrorCode::OutOfMemory, "frame pool of " + std::to_string(bytes) + " bytes");
  // Not cleared: every slot is written before generated code reads it, and
  // touching the whole pool here would dominate compile time.
  size_ = bytes;
}

FramePool::FramePool(FramePool &&o) noexcept
    : data_(std::exchange(o.data_, nullptr)), size_(std::exchange(o.size_, 0)) {}

FramePool &FramePool::operator=(FramePool &&o) noexcept {
  if (this != &o) {
    std::free(data_);
    data_ = std::exchange(o.data_, nullptr);
    size_ = std::exchange(o.size_, 0);
  }
  return *this;
}

FramePool::~FramePool() { std::free(data_); }

void ExternalRegistry::add(const std::string &name, HostFn fn) {
  if (!fns_.emplace(name, fn).second)
    throw Error(ErrorCode::DuplicateSymbol, name);
}

HostFn ExternalRegistry::find(std::string_view name) const noexcept {
  auto it = fns_.find(name);
  return it == fns_.end() ? nullptr : it->second;
}

std::map<std::string, uint64_t, std::less<>> ExternalRegistry::addresses() const {
  std::map<std::string, uint64_t, std::less<>> m;
  for (const auto &[n, f] : fns_)
    m.emplace(n, reinterpret_cast<uint64_t>(f));
  return m;
}

std::string to_string(const RunResult &r) {
  if (r.status != Status::Ok)
    return std::string(to_string(r.status));
  if (!r.value)
    return "void";
  const Literal &v = *r.value;
  switch (v.type) {
  case ValueType::I32:
  case ValueType::I64:
    return std::to_string(static_cast<int64_t>(v.bits));
  case ValueType::Bool:
    return v.bits ? "true" : "false";
  case ValueType::F64: {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", std::bit_cast<double>(v.bits));
    return buf;
  }
  case ValueType::Ptr:
    return "ptr:" + std::to_string(v.bits);
  }
  return "?";
}

Literal canonical_value(ValueType t, uint64_t raw) noexcept {
  switch (t) {
  case ValueType::I32:
    return {t, static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(raw)))};
  case ValueType::Bool:
    return {t, static_cast<uint32_t>(raw) != 0 ? 1u : 0u};
  default:
    return {t, raw};
  }
}

const Function &check_call(const Module &m, std::string_view name, std::span<const Literal> args) {
  const Function *fn = m.find_function(name);
  if (!fn)
    throw Error(ErrorCode::UndefinedFunction, std::string(name));
  if (args.size() != fn->param_count)
    throw Error(ErrorCode::SignatureMismatch,
                std::string(name) + " takes " + std::to_string(fn->param_count) +
                    " arguments, got " + std::to_string(args.size()));
  for (uint32_t i = 0; i < fn->param_count; ++i)
    if (args[i].type != fn->param_type(i))
      throw Error(ErrorCode::SignatureMismatch,
                  std::string(name) + " argument " + std::to_string(i) + " is " +
                      std::string(to_string(fn->param_type(i))) + ", got " +
                      std::string(to_string(args[i].type)));
  return *fn;
}

JitModule JitModule::compile(const TypedModule &tm, const StencilLibrary &lib,
                             const ExternalRegistry &externals, const Options &opts) {
  const Module &m = tm.module();
  size_t cap = std::max<size_t>(opts.initial_region_bytes, 64);
  while (true) {
    JitModule jm(m, ExecRegion(cap), FramePool(opts.codegen.frame_pool_bytes));
    EmitTarget t = jm.region_.target();
    try {
      for (const auto &fn : m.functions)
        jm.fns_.push_back(compile_function(fn, lib, t, opts.codegen));
    } catch (const EmitOverflowError &e) {
      // Everything is re-emitted into a larger region.
      while (cap < e.needed())
        cap *= 2;
      continue;
    }
    link_module(jm.fns_, t.data, t.address, externals.addresses());
    jm.code_bytes_ = t.used;
    jm.region_.seal();
    return jm;
  }
}

const CompiledFunction &JitModule::function(std::string_view name) const {
  for (const auto &f : fns_)
    if (f.name == name)
      return f;
  throw Error(ErrorCode::UndefinedFunction, std::string(name));
}

namespace {
struct NativeResult {
  uint64_t value;
  uint64_t status;
};
using NativeEntry = NativeResult (*)(uintptr_t frame);
} // namespace

RunResult JitModule::invoke(std::string_view name, std::span<const Literal> args) {
  const Function &fn = check_call(module_, name, args);
  uint64_t *frame = reinterpret_cast<uint64_t *>(pool_.data());
  for (size_t i = 0; i < args.size(); ++i)
    frame[i] = canonical_value(args[i].type, args[i].bits).bits;
  auto entry = reinterpret_cast<NativeEntry>(function(name).entry());
  NativeResult r = entry(reinterpret_cast<uintptr_t>(frame));
  RunResult out;
  out.status = static_cast<Status>(r.status);
  if (out.status == Status::Ok && fn.ret)
    out.value = canonical_value(*fn.ret, r.value);
  return out;
}

} // namespace cpc
