#include "cpc/frontend.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace cpc {

namespace {

std::string join(const std::vector<std::string> &items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i)
      out += ", ";
    out += items[i];
  }
  return out;
}

} // namespace

SyntaxError::SyntaxError(SourceSpan span, std::vector<std::string> expected,
                         const std::string &found)
    : Error(ErrorCode::SyntaxError,
            std::to_string(span.line) + ":" + std::to_string(span.column) + " (offset " +
                std::to_string(span.start) + "): expected " + join(expected) + ", found " +
                found),
      span_(span), expected_(std::move(expected)) {}

namespace {

enum class Tok { Ident, Int, Float, Punct, Keyword, End };

struct Token {
  Tok kind;
  std::string text;
  SourceSpan span;
  // Int/Float only: the literal suffix ("", "i64", "f64").
  std::string suffix;
};

const std::set<std::string, std::less<>> kKeywords = {
    "fn", "extern", "let", "if", "else", "while", "return", "true", "false"};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  size_t i = 0;
  uint32_t line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };

  while (true) {
    while (i < src.size()) {
      if (std::isspace(static_cast<unsigned char>(src[i]))) {
        advance(1);
      } else if (src.substr(i, 2) == "//") {
        while (i < src.size() && src[i] != '\n')
          advance(1);
      } else {
        break;
      }
    }
    SourceSpan sp{i, i, line, col};
    if (i >= src.size()) {
      out.push_back({Tok::End, "end of input", sp, {}});
      return out;
    }
    char c = src[i];
    size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() && is_ident(src[j]))
        ++j;
      std::string word(src.substr(i, j - i));
      advance(j - i);
      sp.end = i;
      out.push_back({kKeywords.count(word) ? Tok::Keyword : Tok::Ident, word, sp, {}});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      bool is_float = false;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        is_float = true;
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
          ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-'))
          ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          is_float = true;
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
            ++j;
        }
      }
      std::string text(src.substr(i, j - i));
      std::string suffix;
      if (src.substr(j, 3) == "i64" || src.substr(j, 3) == "f64") {
        suffix = std::string(src.substr(j, 3));
        j += 3;
      }
      if (j < src.size() && is_ident(src[j])) {
        sp.end = j;
        throw SyntaxError(sp, {"literal"}, "malformed number");
      }
      advance(j - start);
      sp.end = i;
      out.push_back({is_float ? Tok::Float : Tok::Int, text, sp, suffix});
      continue;
    }
    static const char *two[] = {"->", "==", "!=", "<=", ">=", "&&", "||"};
    std::string punct;
    for (auto *t : two)
      if (src.substr(i, 2) == t)
        punct = t;
    if (punct.empty()) {
      if (std::string_view("(){}[],;:=+-*/%<>!").find(c) == std::string_view::npos) {
        sp.end = i + 1;
        throw SyntaxError(sp, {"token"}, std::string("'") + c + "'");
      }
      punct = std::string(1, c);
    }
    advance(punct.size());
    sp.end = i;
    out.push_back({Tok::Punct, punct, sp, {}});
  }
}

std::string describe(const Token &t) {
  if (t.kind == Tok::End)
    return "end of input";
  return "'" + t.text + "'";
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Module module() {
    prescan();
    while (peek().kind != Tok::End) {
      if (at_kw("extern"))
        extern_decl();
      else if (at_kw("fn"))
        function();
      else
        fail({"'fn'", "'extern'"});
    }
    return std::move(mod_);
  }

private:
  const Token &peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token &next() {
    const Token &t = peek();
    if (pos_ < toks_.size() - 1)
      ++pos_;
    return t;
  }
  bool at(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_kw(std::string_view k) const { return peek().kind == Tok::Keyword && peek().text == k; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError(peek().span, std::move(expected), describe(peek()));
  }

  void expect(std::string_view p) {
    if (!at(p))
      fail({"'" + std::string(p) + "'"});
    next();
  }
  void expect_kw(std::string_view k) {
    if (!at_kw(k))
      fail({"'" + std::string(k) + "'"});
    next();
  }
  std::string ident() {
    if (peek().kind != Tok::Ident)
      fail({"identifier"});
    return next().text;
  }
  ValueType type() {
    if (peek().kind == Tok::Ident)
      if (auto t = parse_value_type(peek().text)) {
        next();
        return *t;
      }
    fail({"type"});
  }

  // Functions may be called before their definition, so every `fn NAME`
  // is indexed up front.
  void prescan() {
    uint32_t idx = 0;
    for (size_t i = 0; i + 1 < toks_.size(); ++i) {
      const auto &t = toks_[i];
      if (t.kind == Tok::Keyword && t.text == "fn" && toks_[i + 1].kind == Tok::Ident) {
        bool is_extern = i > 0 && toks_[i - 1].kind == Tok::Keyword && toks_[i - 1].text == "extern";
        const auto &name = toks_[i + 1].text;
        if (is_extern)
          externs_.insert(name);
        else if (!fn_index_.count(name))
          fn_index_[name] = idx++;
      }
    }
  }

  void extern_decl() {
    expect_kw("extern");
    expect_kw("fn");
    ExternDecl d;
    d.name = ident();
    expect("(");
    if (!at(")")) {
      d.params.push_back(type());
      while (at(",")) {
        next();
        d.params.push_back(type());
      }
    }
    expect(")");
    if (at("->")) {
      next();
      d.ret = type();
    }
    expect(";");
    mod_.externs.push_back(std::move(d));
  }

  void function() {
    expect_kw("fn");
    Function f;
    auto name_tok = peek();
    f.name = ident();
    if (mod_.find_function(f.name))
      throw SyntaxError(name_tok.span, {"new function name"}, "duplicate '" + f.name + "'");
    fn_ = &f;
    scopes_.assign(1, {});
    expect("(");
    if (!at(")")) {
      while (true) {
        auto pname = ident();
        expect(":");
        auto pt = type();
        declare(pname, pt);
        if (!at(","))
          break;
        next();
      }
    }
    f.param_count = static_cast<uint32_t>(f.locals.size());
    expect(")");
    if (at("->")) {
      next();
      f.ret = type();
    }
    f.body = block();
    fn_ = nullptr;
    mod_.functions.push_back(std::move(f));
  }

  uint32_t declare(const std::string &name, ValueType t) {
    auto idx = static_cast<uint32_t>(fn_->locals.size());
    fn_->locals.push_back({name, t});
    scopes_.back()[name] = idx;
    return idx;
  }

  std::optional<uint32_t> lookup(const std::string &name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
      if (auto f = it->find(name); f != it->end())
        return f->second;
    return std::nullopt;
  }

  StmtList block() {
    expect("{");
    scopes_.emplace_back();
    StmtList body;
    while (!at("}")) {
      if (peek().kind == Tok::End)
        fail({"'}'"});
      body.push_back(statement());
    }
    next();
    scopes_.pop_back();
    return body;
  }

  Stmt statement() {
    if (at_kw("let")) {
      next();
      auto name = ident();
      expect(":");
      auto t = type();
      std::optional<Expr> init;
      if (at("=")) {
        next();
        init = expr();
      }
      expect(";");
      // The name becomes visible after its initializer.
      uint32_t idx = declare(name, t);
      return Declare{idx, t, std::move(init)};
    }
    if (at_kw("if")) {
      next();
      expect("(");
      Expr c = expr();
      expect(")");
      If s{std::move(c), block(), {}};
      if (at_kw("else")) {
        next();
        if (at_kw("if"))
          s.else_body.push_back(statement());
        else
          s.else_body = block();
      }
      return s;
    }
    if (at_kw("while")) {
      next();
      expect("(");
      Expr c = expr();
      expect(")");
      return While{std::move(c), block()};
    }
    if (at_kw("return")) {
      next();
      Return r;
      if (!at(";"))
        r.value = expr();
      expect(";");
      return r;
    }
    if (at("{"))
      return Block{block()};
    auto start = peek();
    Expr e = expr();
    if (at("=")) {
      if (!e.is<VarRef>() && !e.is<ArrayIndex>())
        throw SyntaxError(start.span, {"local or array element"}, "non-assignable expression");
      next();
      Expr v = expr();
      expect(";");
      return Assign{std::move(e), std::move(v)};
    }
    expect(";");
    return ExprStmt{std::move(e)};
  }

  Expr expr() { return logical_or(); }

  Expr logical_or() {
    Expr l = logical_and();
    while (at("||")) {
      next();
      l = Logical{LogicalOp::Or, std::move(l), logical_and()};
    }
    return l;
  }

  Expr logical_and() {
    Expr l = comparison();
    while (at("&&")) {
      next();
      l = Logical{LogicalOp::And, std::move(l), comparison()};
    }
    return l;
  }

  Expr comparison() {
    Expr l = additive();
    static const std::map<std::string, CompareOp, std::less<>> ops = {
        {"==", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<", CompareOp::Lt},
        {"<=", CompareOp::Le}, {">", CompareOp::Gt},  {">=", CompareOp::Ge}};
    if (peek().kind == Tok::Punct)
      if (auto it = ops.find(peek().text); it != ops.end()) {
        next();
        l = Compare{it->second, std::move(l), additive()};
      }
    return l;
  }

  Expr additive() {
    Expr l = multiplicative();
    while (at("+") || at("-")) {
      auto op = next().text == "+" ? BinaryOp::Add : BinaryOp::Sub;
      l = Binary{op, std::move(l), multiplicative()};
    }
    return l;
  }

  Expr multiplicative() {
    Expr l = unary();
    while (at("*") || at("/") || at("%")) {
      auto t = next().text;
      auto op = t == "*" ? BinaryOp::Mul : t == "/" ? BinaryOp::Div : BinaryOp::Mod;
      l = Binary{op, std::move(l), unary()};
    }
    return l;
  }

  Expr unary() {
    if (at("-")) {
      next();
      if ((peek().kind == Tok::Int || peek().kind == Tok::Float) &&
          !(peek(1).kind == Tok::Punct && peek(1).text == "["))
        return number(next(), true);
      return Binary{BinaryOp::Sub, Expr(lit_i32(0)), unary()};
    }
    if (at("!")) {
      next();
      return Not{unary()};
    }
    return postfix();
  }

  Expr postfix() {
    Expr e = primary();
    while (at("[")) {
      next();
      Expr idx = expr();
      expect(":");
      auto t = type();
      expect("]");
      e = ArrayIndex{std::move(e), std::move(idx), t};
    }
    return e;
  }

  Expr number(const Token &t, bool negative) {
    if (t.kind == Tok::Float || t.suffix == "f64") {
      double v = 0;
      auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (r.ec != std::errc())
        throw SyntaxError(t.span, {"finite float literal"}, describe(t));
      return lit_f64(negative ? -v : v);
    }
    uint64_t mag = 0;
    auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), mag);
    const uint64_t i64_limit = negative ? (uint64_t{1} << 63) : (uint64_t{1} << 63) - 1;
    if (r.ec != std::errc() || mag > i64_limit)
      throw SyntaxError(t.span, {"integer literal within i64 range"}, describe(t));
    int64_t v = negative ? static_cast<int64_t>(0 - mag) : static_cast<int64_t>(mag);
    if (t.suffix.empty() && v >= INT32_MIN && v <= INT32_MAX)
      return lit_i32(static_cast<int32_t>(v));
    return lit_i64(v);
  }

  Expr primary() {
    const Token &t = peek();
    if (t.kind == Tok::Int || t.kind == Tok::Float)
      return number(next(), false);
    if (at_kw("true") || at_kw("false"))
      return lit_bool(next().text == "true");
    if (at("(")) {
      next();
      Expr e = expr();
      expect(")");
      return e;
    }
    if (t.kind == Tok::Ident) {
      Token name = next();
      if (at("(")) {
        next();
        std::vector<Expr> args;
        if (!at(")")) {
          args.push_back(expr());
          while (at(",")) {
            next();
            args.push_back(expr());
          }
        }
        expect(")");
        if (auto it = fn_index_.find(name.text); it != fn_index_.end())
          return Call{it->second, std::move(args)};
        if (externs_.count(name.text))
          return ExternalCall{name.text, std::move(args)};
        throw SyntaxError(name.span, {"declared function"}, describe(name));
      }
      if (auto l = lookup(name.text))
        return VarRef{*l};
      throw SyntaxError(name.span, {"local in scope"}, describe(name));
    }
    fail({"expression"});
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  Module mod_;
  Function *fn_ = nullptr;
  std::vector<std::map<std::string, uint32_t>> scopes_;
  std::map<std::string, uint32_t> fn_index_;
  std::set<std::string> externs_;
};

// ---- printer -------------------------------------------------------------

enum Prec { kOr = 1, kAnd, kCmp, kAdd, kMul, kUnary, kPostfix, kAtom };

std::string literal_text(const Literal &l) {
  switch (l.type) {
  case ValueType::I32:
    return std::to_string(static_cast<int32_t>(l.bits));
  case ValueType::I64:
    return std::to_string(static_cast<int64_t>(l.bits)) + "i64";
  case ValueType::Bool:
    return l.bits ? "true" : "false";
  case ValueType::F64: {
    double v = literal_as_f64(l);
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidArgument, "non-finite f64 literal has no source form");
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, r.ptr);
    if (s.find_first_of(".e") == std::string::npos)
      s += ".0";
    return s;
  }
  case ValueType::Ptr:
    break;
  }
  throw Error(ErrorCode::InvalidArgument, "ptr literal has no source form");
}

class Printer {
public:
  explicit Printer(const Module &m) : mod_(m) {}

  std::string run() {
    for (const auto &e : mod_.externs) {
      out_ << "extern fn " << e.name << "(";
      for (size_t i = 0; i < e.params.size(); ++i)
        out_ << (i ? ", " : "") << to_string(e.params[i]);
      out_ << ")";
      if (e.ret)
        out_ << " -> " << to_string(*e.ret);
      out_ << ";\n";
    }
    for (size_t i = 0; i < mod_.functions.size(); ++i) {
      if (i || !mod_.externs.empty())
        out_ << "\n";
      function(mod_.functions[i]);
    }
    return out_.str();
  }

private:
  void function(const Function &f) {
    fn_ = &f;
    assign_names(f);
    out_ << "fn " << f.name << "(";
    for (uint32_t i = 0; i < f.param_count; ++i)
      out_ << (i ? ", " : "") << names_[i] << ": " << to_string(f.locals[i].type);
    out_ << ")";
    if (f.ret)
      out_ << " -> " << to_string(*f.ret);
    out_ << " ";
    block(f.body, 0);
    out_ << "\n";
  }

  // Names must be unique per function so the reparse resolves each
  // reference to the same slot regardless of scoping.
  void assign_names(const Function &f) {
    names_.assign(f.locals.size(), {});
    std::map<std::string, int> count;
    for (const auto &l : f.locals)
      ++count[l.name];
    std::set<std::string> used;
    for (size_t i = 0; i < f.locals.size(); ++i) {
      std::string base = f.locals[i].name;
      bool ok = !base.empty() && (std::isalpha(static_cast<unsigned char>(base[0])) || base[0] == '_') &&
                !kKeywords.count(base);
      for (char c : base)
        ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
      if (!ok)
        base = "v";
      std::string name = base;
      if (!ok || count[base] > 1)
        name = base + "_" + std::to_string(i);
      while (used.count(name) || (count.count(name) && name != f.locals[i].name))
        name += "_";
      used.insert(name);
      names_[i] = name;
    }
  }

  void indent(int depth) {
    for (int i = 0; i < depth; ++i)
      out_ << "  ";
  }

  void block(const StmtList &body, int depth) {
    out_ << "{\n";
    for (const auto &s : body)
      stmt(s, depth + 1);
    indent(depth);
    out_ << "}";
  }

  void stmt(const Stmt &s, int depth) {
    indent(depth);
    if (auto *d = std::get_if<Declare>(&s.node)) {
      out_ << "let " << names_.at(d->local) << ": " << to_string(d->type);
      if (d->init)
        out_ << " = " << expr(*d->init, 0);
      out_ << ";\n";
    } else if (auto *a = std::get_if<Assign>(&s.node)) {
      out_ << expr(a->target, 0) << " = " << expr(a->value, 0) << ";\n";
    } else if (auto *i = std::get_if<If>(&s.node)) {
      out_ << "if (" << expr(i->cond, 0) << ") ";
      block(i->then_body, depth);
      if (!i->else_body.empty()) {
        out_ << " else ";
        block(i->else_body, depth);
      }
      out_ << "\n";
    } else if (auto *w = std::get_if<While>(&s.node)) {
      out_ << "while (" << expr(w->cond, 0) << ") ";
      block(w->body, depth);
      out_ << "\n";
    } else if (auto *r = std::get_if<Return>(&s.node)) {
      out_ << "return";
      if (r->value)
        out_ << " " << expr(*r->value, 0);
      out_ << ";\n";
    } else if (auto *e = std::get_if<ExprStmt>(&s.node)) {
      out_ << expr(e->expr, 0) << ";\n";
    } else if (auto *b = std::get_if<Block>(&s.node)) {
      block(b->body, depth);
      out_ << "\n";
    }
  }

  static int prec_of(BinaryOp op) {
    return op == BinaryOp::Add || op == BinaryOp::Sub ? kAdd : kMul;
  }

  static int prec(const Expr &e) {
    if (auto *b = std::get_if<Binary>(&e.node))
      return prec_of(b->op);
    if (e.is<Compare>())
      return kCmp;
    if (auto *l = std::get_if<Logical>(&e.node))
      return l->op == LogicalOp::And ? kAnd : kOr;
    if (e.is<Not>())
      return kUnary;
    if (auto *l = std::get_if<Literal>(&e.node)) {
      auto text = literal_text(*l);
      return text[0] == '-' ? kUnary : kAtom;
    }
    if (e.is<ArrayIndex>())
      return kPostfix;
    return kAtom;
  }

  // Wraps `e` in parens when its precedence is below `min`.
  std::string expr(const Expr &e, int min) {
    std::string s = raw(e);
    return prec(e) < min ? "(" + s + ")" : s;
  }

  std::string args(const std::vector<Expr> &a) {
    std::string s = "(";
    for (size_t i = 0; i < a.size(); ++i)
      s += (i ? ", " : "") + expr(a[i], 0);
    return s + ")";
  }

  std::string raw(const Expr &e) {
    static const char *bin[] = {"+", "-", "*", "/", "%"};
    static const char *cmp[] = {"==", "!=", "<", "<=", ">", ">="};
    if (auto *l = std::get_if<Literal>(&e.node))
      return literal_text(*l);
    if (auto *v = std::get_if<VarRef>(&e.node))
      return names_.at(v->local);
    if (auto *b = std::get_if<Binary>(&e.node)) {
      int p = prec_of(b->op);
      return expr(*b->lhs, p) + " " + bin[static_cast<int>(b->op)] + " " + expr(*b->rhs, p + 1);
    }
    if (auto *c = std::get_if<Compare>(&e.node))
      return expr(*c->lhs, kCmp + 1) + " " + cmp[static_cast<int>(c->op)] + " " +
             expr(*c->rhs, kCmp + 1);
    if (auto *l = std::get_if<Logical>(&e.node)) {
      int p = l->op == LogicalOp::And ? kAnd : kOr;
      return expr(*l->lhs, p) + (p == kAnd ? " && " : " || ") + expr(*l->rhs, p + 1);
    }
    if (auto *n = std::get_if<Not>(&e.node))
      return "!" + expr(*n->operand, kUnary);
    if (auto *c = std::get_if<Call>(&e.node))
      return mod_.functions.at(c->callee).name + args(c->args);
    if (auto *c = std::get_if<ExternalCall>(&e.node))
      return c->symbol + args(c->args);
    const auto &a = e.as<ArrayIndex>();
    return expr(*a.base, kPostfix) + "[" + expr(*a.index, 0) + " : " +
           std::string(to_string(a.elem)) + "]";
  }

  const Module &mod_;
  const Function *fn_ = nullptr;
  std::vector<std::string> names_;
  std::ostringstream out_;
};

} // namespace

Module parse(std::string_view text) { return Parser(lex(text)).module(); }

std::string print(const Module &module) { return Printer(module).run(); }

} // namespace cpc
