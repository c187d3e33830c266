// Text form of expression trees: parenthesized prefix notation.
//
//   expr   := 'p' | 'q' | number | '(' name expr+ ')'
//   name   := one of the primitive op names, or the sugar forms
//             (div a b) -> (mul a (inv b)), (sub a b) -> (add a (neg b))
//   number := decimal literal accepted by std::from_chars, or inf / nan

#include <cctype>
#include <charconv>
#include <string>

#include "advloss/error.hpp"
#include "advloss/expr.hpp"

namespace advloss {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprTree parse_all() {
    ExprTree t = parse_expr();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what, ErrorCode code = ErrorCode::syntax) const {
    throw Error(code, what + " at position " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  std::string_view token() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && src_[pos_] != '(' && src_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    return src_.substr(start, pos_ - start);
  }

  ExprTree parse_atom() {
    const std::size_t start = pos_;
    const std::string_view tok = token();
    if (tok.empty()) fail("expected expression");
    if (tok == "p") return ExprTree::p();
    if (tok == "q") return ExprTree::q();
    double value = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      pos_ = start;
      fail("invalid atom '" + std::string(tok) + "'");
    }
    return ExprTree::constant(value);
  }

  ExprTree parse_expr() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    if (src_[pos_] == ')') fail("unexpected ')'");
    if (src_[pos_] != '(') return parse_atom();
    ++pos_;
    skip_space();
    const std::size_t name_pos = pos_;
    const std::string name(token());
    if (name.empty()) fail("expected operator name");

    std::vector<ExprTree> args;
    for (;;) {
      skip_space();
      if (pos_ >= src_.size()) fail("unterminated list");
      if (src_[pos_] == ')') {
        ++pos_;
        break;
      }
      args.push_back(parse_expr());
    }

    auto arity_fail = [&](int expected) {
      pos_ = name_pos;
      fail(name + " expects " + std::to_string(expected) + " operand(s), got " +
               std::to_string(args.size()),
           ErrorCode::arity);
    };
    if (name == "div" || name == "sub") {
      if (args.size() != 2) arity_fail(2);
      if (name == "div")
        return ExprTree::op(OpKind::Mul, args[0], ExprTree::op(OpKind::Inv, args[1]));
      return ExprTree::op(OpKind::Add, args[0], ExprTree::op(OpKind::Neg, args[1]));
    }
    const auto kind = op_from_name(name);
    if (!kind) {
      pos_ = name_pos;
      fail("unknown operator '" + name + "'", ErrorCode::unknown_operator);
    }
    if (static_cast<int>(args.size()) != arity(*kind)) arity_fail(arity(*kind));
    return ExprTree::op(*kind, std::move(args));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void print_into(const ExprTree& t, std::string& out) {
  if (t.is_leaf()) {
    switch (t.leaf_kind()) {
      case LeafKind::P: out += 'p'; return;
      case LeafKind::Q: out += 'q'; return;
      case LeafKind::Const: {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t.constant_value());
        (void)ec;
        out.append(buf, ptr);
        return;
      }
    }
  }
  out += '(';
  out += op_name(t.op_kind());
  for (const auto& c : t.children()) {
    out += ' ';
    print_into(c, out);
  }
  out += ')';
}

}  // namespace

ExprTree parse(std::string_view source) { return Parser(source).parse_all(); }

std::string print(const ExprTree& tree) {
  std::string out;
  print_into(tree, out);
  return out;
}

}  // namespace advloss
