#include <vector>

#include "advloss/expr.hpp"

namespace advloss {

namespace {

bool is_const(const ExprTree& t, double v) {
  return t.is_leaf() && t.leaf_kind() == LeafKind::Const && t.constant_value() == v;
}

bool is_const(const ExprTree& t) { return t.is_leaf() && t.leaf_kind() == LeafKind::Const; }

// Constants evaluate as (N, 1); folding on a 1x1 batch is exact for every op.
ExprTree fold(const ExprTree& t) {
  const BatchMatrix a(1, 1, t.children()[0].constant_value());
  BatchMatrix out = t.children().size() == 1
                        ? apply_op(t.op_kind(), a)
                        : apply_op(t.op_kind(), a,
                                   BatchMatrix(1, 1, t.children()[1].constant_value()));
  return ExprTree::constant(out(0, 0));
}

ExprTree rewrite_node(const ExprTree& t) {
  const auto& kids = t.children();
  bool all_const = true;
  for (const auto& c : kids) all_const = all_const && is_const(c);
  if (all_const) return fold(t);

  switch (t.op_kind()) {
    case OpKind::Add:
      if (is_const(kids[1], 0.0)) return kids[0];
      if (is_const(kids[0], 0.0)) return kids[1];
      break;
    case OpKind::Mul:
      if (is_const(kids[1], 1.0)) return kids[0];
      if (is_const(kids[0], 1.0)) return kids[1];
      // x * 0 -> 0 only when x is (N, 1); a wide x would change the shape.
      if (is_const(kids[1], 0.0) && !kids[0].is_wide()) return kids[1];
      if (is_const(kids[0], 0.0) && !kids[1].is_wide()) return kids[0];
      break;
    case OpKind::Neg:
      if (!kids[0].is_leaf() && kids[0].op_kind() == OpKind::Neg) return kids[0].children()[0];
      break;
    case OpKind::Abs:
      if (!kids[0].is_leaf() && kids[0].op_kind() == OpKind::Neg)
        return ExprTree::op(OpKind::Abs, kids[0].children()[0]);
      break;
    default:
      break;
  }
  return t;
}

ExprTree simplify_pass(const ExprTree& t) {
  if (t.is_leaf()) return t;
  std::vector<ExprTree> kids;
  kids.reserve(t.children().size());
  for (const auto& c : t.children()) kids.push_back(simplify_pass(c));
  ExprTree rebuilt = ExprTree::op(t.op_kind(), std::move(kids));
  // Rewrites may expose another rewrite at the same node.
  for (;;) {
    ExprTree next = rewrite_node(rebuilt);
    if (next == rebuilt) return rebuilt;
    if (next.is_leaf()) return next;
    rebuilt = std::move(next);
  }
}

}  // namespace

ExprTree simplify(const ExprTree& tree) {
  ExprTree cur = tree;
  for (;;) {
    ExprTree next = simplify_pass(cur);
    if (next == cur) return next;
    cur = std::move(next);
  }
}

}  // namespace advloss
