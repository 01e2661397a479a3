#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynwire/finset.hpp"

namespace dynwire {

enum class Func { exp, log, sqrt, abs, min, max, pow };

inline std::string_view func_name(Func f) {
  static constexpr std::array<std::string_view, 7> names{"exp", "log", "sqrt", "abs", "min", "max", "pow"};
  return names[static_cast<std::size_t>(f)];
}

inline std::size_t func_arity(Func f) {
  switch (f) {
    case Func::min:
    case Func::max:
    case Func::pow:
      return 2;
    default:
      return 1;
  }
}

inline std::optional<Func> func_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Func::pow); ++i) {
    if (func_name(static_cast<Func>(i)) == name) return static_cast<Func>(i);
  }
  return std::nullopt;
}

// Immutable arithmetic expression tree. Variables are referenced by name;
// the namespace a name lives in is decided when the expression is bound
// into an ExprFun.
class Expr {
 public:
  enum class Kind { literal, variable, negate, add, sub, mul, div, pow, call };

  Expr() : Expr(number(0.0)) {}

  // Negative values become negate(literal) so that printing round-trips.
  static Expr number(double v) {
    if (!std::isfinite(v)) throw StructureError("expression literals must be finite");
    if (std::signbit(v) && v != 0.0) return negate(number(-v));
    auto n = std::make_shared<Node>();
    n->kind = Kind::literal;
    n->value = v == 0.0 ? 0.0 : v;
    return Expr(std::move(n));
  }

  static Expr variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::variable;
    n->name = std::move(name);
    return Expr(std::move(n));
  }

  static Expr negate(Expr e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::negate;
    n->args.push_back(std::move(e));
    return Expr(std::move(n));
  }

  static Expr binary(Kind k, Expr l, Expr r) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->args = {std::move(l), std::move(r)};
    return Expr(std::move(n));
  }

  static Expr call(Func f, std::vector<Expr> args) {
    if (args.size() != func_arity(f)) {
      throw StructureError(std::string(func_name(f)) + " expects " + std::to_string(func_arity(f)) + " argument(s)");
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::call;
    n->func = f;
    n->args = std::move(args);
    return Expr(std::move(n));
  }

  Kind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  const std::string& name() const noexcept { return node_->name; }
  Func func() const noexcept { return node_->func; }
  const std::vector<Expr>& args() const noexcept { return node_->args; }
  bool is_binary() const noexcept { return kind() >= Kind::add && kind() <= Kind::pow; }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case Kind::literal:
        return a.value() == b.value();
      case Kind::variable:
        return a.name() == b.name();
      case Kind::call:
        if (a.func() != b.func()) return false;
        break;
      default:
        break;
    }
    return a.args() == b.args();
  }

  friend Expr operator+(Expr a, Expr b) { return binary(Kind::add, std::move(a), std::move(b)); }
  friend Expr operator-(Expr a, Expr b) { return binary(Kind::sub, std::move(a), std::move(b)); }
  friend Expr operator*(Expr a, Expr b) { return binary(Kind::mul, std::move(a), std::move(b)); }
  friend Expr operator/(Expr a, Expr b) { return binary(Kind::div, std::move(a), std::move(b)); }
  friend Expr operator-(Expr a) { return negate(std::move(a)); }

 private:
  struct Node {
    Kind kind = Kind::literal;
    double value = 0.0;
    std::string name;
    Func func = Func::exp;
    std::vector<Expr> args;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

// Left-nested sum; the empty sum is the literal 0.
inline Expr sum_of(const std::vector<Expr>& terms) {
  if (terms.empty()) return Expr::number(0.0);
  Expr acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

// --- parsing --------------------------------------------------------------

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') fail("unbalanced parentheses: unexpected ')'");
      fail(std::string("unexpected character '") + text_[pos_] + "'");
    }
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_product();
      } else if (accept('-')) {
        lhs = lhs - parse_product();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negate(parse_unary());
    return parse_power();
  }

  // ^ binds tighter than unary minus and associates to the right; its
  // exponent may itself carry a sign.
  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(Expr::Kind::pow, std::move(base), parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) fail("unbalanced parentheses: expected ')'");
      return inner;
    }
    if (is_digit(c) || c == '.') return parse_number();
    if (is_ident_start(c)) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      std::string name(text_.substr(start, pos_ - start));
      if (name.back() == '.') {
        pos_ = start;
        fail("identifier may not end with '.'");
      }
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        auto f = func_from_name(name);
        if (!f) {
          pos_ = start;
          fail("unknown function '" + name + "'");
        }
        ++pos_;
        std::vector<Expr> args;
        if (!accept(')')) {
          args.push_back(parse_sum());
          while (accept(',')) args.push_back(parse_sum());
          if (!accept(')')) fail("unbalanced parentheses: expected ')'");
        }
        if (args.size() != func_arity(*f)) {
          pos_ = start;
          fail("bad arity: " + name + " expects " + std::to_string(func_arity(*f)) + " argument(s), got " +
               std::to_string(args.size()));
        }
        return Expr::call(*f, std::move(args));
      }
      return Expr::variable(std::move(name));
    }
    fail(std::string("lexical error: unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && is_digit(text_[pos_])) {
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_ || !std::isfinite(v)) {
      pos_ = start;
      fail("lexical error: malformed or out-of-range number");
    }
    return Expr::number(v);
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c) || c == '.'; }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::add:
    case Expr::Kind::sub:
      return 1;
    case Expr::Kind::mul:
    case Expr::Kind::div:
      return 2;
    case Expr::Kind::negate:
      return 3;
    case Expr::Kind::pow:
      return 4;
    default:
      return 5;
  }
}

inline void print_to(std::string& out, const Expr& e);

inline void print_child(std::string& out, const Expr& child, bool parens) {
  if (parens) out += '(';
  print_to(out, child);
  if (parens) out += ')';
}

inline void print_to(std::string& out, const Expr& e) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::literal: {
      std::array<char, 32> buf{};
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), e.value());
      out.append(buf.data(), ptr);
      return;
    }
    case K::variable:
      out += e.name();
      return;
    case K::negate:
      out += '-';
      print_child(out, e.args()[0], precedence(e.args()[0]) < 3);
      return;
    case K::call:
      out += func_name(e.func());
      out += '(';
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        if (i) out += ", ";
        print_to(out, e.args()[i]);
      }
      out += ')';
      return;
    default:
      break;
  }
  const int p = precedence(e);
  const Expr& l = e.args()[0];
  const Expr& r = e.args()[1];
  if (e.kind() == K::pow) {
    print_child(out, l, precedence(l) < 5);
    out += '^';
    print_child(out, r, precedence(r) < 3);
    return;
  }
  print_child(out, l, precedence(l) < p);
  switch (e.kind()) {
    case K::add: out += " + "; break;
    case K::sub: out += " - "; break;
    case K::mul: out += '*'; break;
    default: out += '/'; break;
  }
  print_child(out, r, precedence(r) <= p);
}

}  // namespace detail

inline Expr parse_expr(std::string_view text) { return detail::Parser(text).parse_all(); }

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_to(out, e);
  return out;
}

inline void collect_vars(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == Expr::Kind::variable) {
    out.insert(e.name());
    return;
  }
  for (const auto& a : e.args()) collect_vars(a, out);
}

// Names referenced anywhere in the tree.
inline std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

// Replaces variables for which `lookup` returns a value; subtrees without
// replacements are shared with the input.
inline Expr substitute(const Expr& e, const std::function<std::optional<Expr>(const std::string&)>& lookup) {
  if (e.kind() == Expr::Kind::variable) {
    if (auto r = lookup(e.name())) return *r;
    return e;
  }
  if (e.args().empty()) return e;
  std::vector<Expr> args;
  args.reserve(e.args().size());
  bool changed = false;
  for (const auto& a : e.args()) {
    args.push_back(substitute(a, lookup));
    changed = changed || !(args.back() == a);
  }
  if (!changed) return e;
  switch (e.kind()) {
    case Expr::Kind::negate:
      return Expr::negate(std::move(args[0]));
    case Expr::Kind::call:
      return Expr::call(e.func(), std::move(args));
    default:
      return Expr::binary(e.kind(), std::move(args[0]), std::move(args[1]));
  }
}

inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& table) {
  return substitute(e, [&](const std::string& n) -> std::optional<Expr> {
    auto it = table.find(n);
    if (it == table.end()) return std::nullopt;
    return it->second;
  });
}

inline Expr rename_vars(const Expr& e, const std::map<std::string, std::string>& names) {
  return substitute(e, [&](const std::string& n) -> std::optional<Expr> {
    auto it = names.find(n);
    if (it == names.end() || it->second == n) return std::nullopt;
    return Expr::variable(it->second);
  });
}

// --- binding and evaluation -----------------------------------------------

enum class Namespace { input, state, stock, sumvar, var, time };

inline std::string_view namespace_name(Namespace ns) {
  static constexpr std::array<std::string_view, 6> names{"input", "state", "stock", "sumvar", "var", "time"};
  return names[static_cast<std::size_t>(ns)];
}

// Ordered list of namespaces an expression may read from. Names must be
// unique across all namespaces of one signature.
class Signature {
 public:
  Signature() = default;
  Signature(std::initializer_list<std::pair<Namespace, FinSet>> spaces) : spaces_(spaces) {}
  explicit Signature(std::vector<std::pair<Namespace, FinSet>> spaces) : spaces_(std::move(spaces)) {}

  std::size_t size() const noexcept { return spaces_.size(); }
  Namespace kind(std::size_t s) const { return spaces_.at(s).first; }
  const FinSet& set(std::size_t s) const { return spaces_.at(s).second; }

  std::optional<std::size_t> position(Namespace ns) const {
    for (std::size_t s = 0; s < spaces_.size(); ++s)
      if (spaces_[s].first == ns) return s;
    return std::nullopt;
  }

  struct Ref {
    std::size_t space;
    Index index;
    friend auto operator<=>(const Ref&, const Ref&) = default;
  };

  // Resolves a name; throws on unknown or ambiguous names.
  Ref resolve(const std::string& name) const {
    std::optional<Ref> hit;
    for (std::size_t s = 0; s < spaces_.size(); ++s) {
      if (auto i = spaces_[s].second.find(name)) {
        if (hit) {
          throw StructureError("ambiguous name '" + name + "' (in " + std::string(namespace_name(kind(hit->space))) +
                               " and " + std::string(namespace_name(kind(s))) + ")");
        }
        hit = Ref{s, *i};
      }
    }
    if (!hit) throw StructureError("unresolved reference '" + name + "'");
    return *hit;
  }

 private:
  std::vector<std::pair<Namespace, FinSet>> spaces_;
};

// A vector-valued function given by one expression per output coordinate,
// compiled against a signature into flat postfix programs.
class ExprFun {
 public:
  ExprFun() = default;
  ExprFun(Signature sig, FinSet outputs, std::vector<Expr> exprs)
      : sig_(std::move(sig)), outputs_(std::move(outputs)), exprs_(std::move(exprs)) {
    require_size(outputs_, exprs_.size(), "ExprFun expressions");
    programs_.reserve(exprs_.size());
    deps_.reserve(exprs_.size());
    for (std::size_t k = 0; k < exprs_.size(); ++k) {
      Program prog;
      std::set<Signature::Ref> refs;
      try {
        compile(exprs_[k], prog, refs);
      } catch (const StructureError& e) {
        throw StructureError("expression for '" + outputs_.label(k) + "': " + e.what());
      }
      programs_.push_back(std::move(prog));
      deps_.emplace_back(refs.begin(), refs.end());
    }
  }

  const Signature& signature() const noexcept { return sig_; }
  const FinSet& outputs() const noexcept { return outputs_; }
  const std::vector<Expr>& exprs() const noexcept { return exprs_; }
  std::size_t size() const noexcept { return exprs_.size(); }

  // Variables read by output coordinate k, as (namespace position, index).
  const std::vector<Signature::Ref>& dependencies(std::size_t k) const { return deps_.at(k); }

  // One argument vector per signature namespace, in signature order.
  Vec eval(std::span<const std::span<const double>> env) const {
    if (env.size() != sig_.size()) throw MismatchError("ExprFun::eval: wrong number of argument vectors");
    for (std::size_t s = 0; s < env.size(); ++s) require_size(sig_.set(s), env[s].size(), "ExprFun::eval argument");
    Vec out(programs_.size());
    std::vector<double> stack;
    for (std::size_t k = 0; k < programs_.size(); ++k) out[k] = run(programs_[k], env, stack);
    return out;
  }

  Vec eval(std::initializer_list<std::span<const double>> env) const {
    return eval(std::span<const std::span<const double>>(env.begin(), env.size()));
  }

  double eval_one(std::size_t k, std::span<const std::span<const double>> env) const {
    std::vector<double> stack;
    return run(programs_.at(k), env, stack);
  }

 private:
  enum class Op : unsigned char { push, load, neg, add, sub, mul, div, pow, exp, log, sqrt, abs, min, max };
  struct Instr {
    Op op;
    std::size_t space = 0;
    Index index = 0;
    double value = 0.0;
  };
  using Program = std::vector<Instr>;

  void compile(const Expr& e, Program& prog, std::set<Signature::Ref>& refs) const {
    using K = Expr::Kind;
    switch (e.kind()) {
      case K::literal:
        prog.push_back({Op::push, 0, 0, e.value()});
        return;
      case K::variable: {
        auto ref = sig_.resolve(e.name());
        refs.insert(ref);
        prog.push_back({Op::load, ref.space, ref.index, 0.0});
        return;
      }
      default:
        break;
    }
    for (const auto& a : e.args()) compile(a, prog, refs);
    switch (e.kind()) {
      case K::negate: prog.push_back({Op::neg}); break;
      case K::add: prog.push_back({Op::add}); break;
      case K::sub: prog.push_back({Op::sub}); break;
      case K::mul: prog.push_back({Op::mul}); break;
      case K::div: prog.push_back({Op::div}); break;
      case K::pow: prog.push_back({Op::pow}); break;
      case K::call: {
        static constexpr std::array<Op, 7> ops{Op::exp, Op::log, Op::sqrt, Op::abs, Op::min, Op::max, Op::pow};
        prog.push_back({ops[static_cast<std::size_t>(e.func())]});
        break;
      }
      default:
        break;
    }
  }

  static double run(const Program& prog, std::span<const std::span<const double>> env, std::vector<double>& st) {
    st.clear();
    for (const auto& ins : prog) {
      switch (ins.op) {
        case Op::push: st.push_back(ins.value); continue;
        case Op::load: st.push_back(env[ins.space][ins.index]); continue;
        case Op::neg: st.back() = -st.back(); continue;
        case Op::exp: st.back() = std::exp(st.back()); continue;
        case Op::log: st.back() = std::log(st.back()); continue;
        case Op::sqrt: st.back() = std::sqrt(st.back()); continue;
        case Op::abs: st.back() = std::abs(st.back()); continue;
        default: break;
      }
      double r = st.back();
      st.pop_back();
      double& l = st.back();
      switch (ins.op) {
        case Op::add: l = l + r; break;
        case Op::sub: l = l - r; break;
        case Op::mul: l = l * r; break;
        case Op::div: l = l / r; break;
        case Op::pow: l = std::pow(l, r); break;
        case Op::min: l = std::min(l, r); break;
        case Op::max: l = std::max(l, r); break;
        default: break;
      }
    }
    return st.back();
  }

  Signature sig_;
  FinSet outputs_;
  std::vector<Expr> exprs_;
  std::vector<Program> programs_;
  std::vector<std::vector<Signature::Ref>> deps_;
};

// Indices of non-finite entries.
inline std::vector<Index> nonfinite_entries(std::span<const double> v) {
  std::vector<Index> out;
  for (Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) out.push_back(i);
  return out;
}

}  // namespace dynwire
