#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cpc {

enum class ValueType : uint8_t { I32, I64, F64, Bool, Ptr };

inline constexpr int kValueTypeCount = 5;

enum class BinaryOp : uint8_t { Add, Sub, Mul, Div, Mod };
enum class CompareOp : uint8_t { Eq, Ne, Lt, Le, Gt, Ge };
enum class LogicalOp : uint8_t { And, Or };

std::string_view to_string(ValueType t) noexcept;
std::string_view to_string(BinaryOp op) noexcept;
std::string_view to_string(CompareOp op) noexcept;
std::optional<ValueType> parse_value_type(std::string_view name) noexcept;

inline bool is_integer(ValueType t) noexcept {
  return t == ValueType::I32 || t == ValueType::I64;
}

/// Byte width of an element of type `t` in memory reached through a Ptr.
/// Frame slots are always 8 bytes regardless of type.
size_t storage_size(ValueType t) noexcept;

/// Heap box with value semantics: copies deep-copy, == compares pointees.
template <class T> class Box {
public:
  Box() : ptr_(std::make_unique<T>()) {}
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box &other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box &&) noexcept = default;
  Box &operator=(const Box &other) {
    if (this != &other)
      ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box &operator=(Box &&) noexcept = default;

  T &operator*() noexcept { return *ptr_; }
  const T &operator*() const noexcept { return *ptr_; }
  T *operator->() noexcept { return ptr_.get(); }
  const T *operator->() const noexcept { return ptr_.get(); }

  friend bool operator==(const Box &a, const Box &b) { return *a.ptr_ == *b.ptr_; }

private:
  std::unique_ptr<T> ptr_;
};

struct Expr;

template <class T, class... Ts>
concept OneOf = (std::is_same_v<std::decay_t<T>, Ts> || ...);

/// `bits` holds the raw 64-bit payload: integers sign-extended, F64 as its
/// IEEE bit pattern, Bool as 0/1.
struct Literal {
  ValueType type = ValueType::I32;
  uint64_t bits = 0;
  bool operator==(const Literal &) const = default;
};

struct VarRef {
  uint32_t local = 0;
  bool operator==(const VarRef &) const = default;
};

struct Binary {
  BinaryOp op = BinaryOp::Add;
  Box<Expr> lhs, rhs;
  bool operator==(const Binary &) const = default;
};

struct Compare {
  CompareOp op = CompareOp::Eq;
  Box<Expr> lhs, rhs;
  bool operator==(const Compare &) const = default;
};

/// Short-circuit operators exist only in parsed source; typecheck lowers
/// them to nested Ifs over a fresh Bool local.
struct Logical {
  LogicalOp op = LogicalOp::And;
  Box<Expr> lhs, rhs;
  bool operator==(const Logical &) const = default;
};

/// Parsed `!e`; typecheck rewrites it to `e == false`.
struct Not {
  Box<Expr> operand;
  bool operator==(const Not &) const = default;
};

struct Call {
  uint32_t callee = 0;
  std::vector<Expr> args;
  bool operator==(const Call &) const = default;
};

struct ArrayIndex {
  Box<Expr> base;
  Box<Expr> index;
  ValueType elem = ValueType::I64;
  bool operator==(const ArrayIndex &) const = default;
};

struct ExternalCall {
  std::string symbol;
  std::vector<Expr> args;
  bool operator==(const ExternalCall &) const = default;
};

struct Expr {
  using Node = std::variant<Literal, VarRef, Binary, Compare, Logical, Not,
                            Call, ArrayIndex, ExternalCall>;
  Node node;
  /// Resolved by typecheck; nullopt before checking and for void calls.
  std::optional<ValueType> type;

  Expr() = default;
  template <class N>
    requires OneOf<N, Literal, VarRef, Binary, Compare, Logical, Not, Call, ArrayIndex,
                   ExternalCall>
  Expr(N &&n) : node(std::forward<N>(n)) {}

  template <class N> bool is() const noexcept { return std::holds_alternative<N>(node); }
  template <class N> const N &as() const { return std::get<N>(node); }
  template <class N> N &as() { return std::get<N>(node); }

  bool operator==(const Expr &) const = default;
};

struct Stmt;
using StmtList = std::vector<Stmt>;

struct Declare {
  uint32_t local = 0;
  ValueType type = ValueType::I32;
  std::optional<Expr> init;
  bool operator==(const Declare &) const = default;
};

/// target is a VarRef or an ArrayIndex.
struct Assign {
  Expr target;
  Expr value;
  bool operator==(const Assign &) const = default;
};

struct If {
  Expr cond;
  StmtList then_body;
  StmtList else_body;
  bool operator==(const If &) const = default;
};

struct While {
  Expr cond;
  StmtList body;
  bool operator==(const While &) const = default;
};

struct Return {
  std::optional<Expr> value;
  bool operator==(const Return &) const = default;
};

struct ExprStmt {
  Expr expr;
  bool operator==(const ExprStmt &) const = default;
};

struct Block {
  StmtList body;
  bool operator==(const Block &) const = default;
};

struct Stmt {
  using Node = std::variant<Declare, Assign, If, While, Return, ExprStmt, Block>;
  Node node;

  Stmt() = default;
  template <class N>
    requires OneOf<N, Declare, Assign, If, While, Return, ExprStmt, Block>
  Stmt(N &&n) : node(std::forward<N>(n)) {}

  template <class N> bool is() const noexcept { return std::holds_alternative<N>(node); }
  template <class N> const N &as() const { return std::get<N>(node); }
  template <class N> N &as() { return std::get<N>(node); }

  bool operator==(const Stmt &) const = default;
};

struct Local {
  std::string name;
  ValueType type = ValueType::I32;
  bool operator==(const Local &) const = default;
};

/// Parameters occupy locals[0 .. param_count).
struct Function {
  std::string name;
  uint32_t param_count = 0;
  std::optional<ValueType> ret;
  std::vector<Local> locals;
  StmtList body;

  ValueType param_type(uint32_t i) const { return locals.at(i).type; }
  bool operator==(const Function &) const = default;
};

struct ExternDecl {
  std::string name;
  std::vector<ValueType> params;
  std::optional<ValueType> ret;
  bool operator==(const ExternDecl &) const = default;
};

struct Module {
  std::vector<Function> functions;
  std::vector<ExternDecl> externs;

  const Function *find_function(std::string_view name) const noexcept;
  const ExternDecl *find_extern(std::string_view name) const noexcept;
  std::optional<uint32_t> function_index(std::string_view name) const noexcept;

  bool operator==(const Module &) const = default;
};

/// Structural equality ignoring resolved-type annotations and local names.
bool structurally_equal(const Module &a, const Module &b);

// Literal constructors.
Literal lit_i32(int32_t v) noexcept;
Literal lit_i64(int64_t v) noexcept;
Literal lit_f64(double v) noexcept;
Literal lit_bool(bool v) noexcept;

double literal_as_f64(const Literal &l) noexcept;

} // namespace cpc
