#include "advloss/expr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advloss/error.hpp"

namespace advloss {

ExprTree ExprTree::p() {
  auto n = std::make_shared<Node>();
  n->leaf = LeafKind::P;
  n->wide = true;
  n->has_p = true;
  return ExprTree(std::move(n));
}

ExprTree ExprTree::q() {
  auto n = std::make_shared<Node>();
  n->leaf = LeafKind::Q;
  n->wide = true;
  return ExprTree(std::move(n));
}

ExprTree ExprTree::constant(double value) {
  auto n = std::make_shared<Node>();
  n->leaf = LeafKind::Const;
  n->value = value;
  return ExprTree(std::move(n));
}

ExprTree ExprTree::op(OpKind kind, ExprTree child) {
  std::vector<ExprTree> c;
  c.push_back(std::move(child));
  return op(kind, std::move(c));
}

ExprTree ExprTree::op(OpKind kind, ExprTree lhs, ExprTree rhs) {
  std::vector<ExprTree> c;
  c.push_back(std::move(lhs));
  c.push_back(std::move(rhs));
  return op(kind, std::move(c));
}

ExprTree ExprTree::op(OpKind kind, std::vector<ExprTree> children) {
  if (static_cast<int>(children.size()) != arity(kind))
    throw Error(ErrorCode::arity, std::string(op_name(kind)) + " expects " +
                                      std::to_string(arity(kind)) + " operand(s), got " +
                                      std::to_string(children.size()));
  auto n = std::make_shared<Node>();
  n->is_leaf = false;
  n->op = kind;
  int d = 0;
  std::size_t s = 1;
  bool wide = false, has_p = false;
  for (const auto& c : children) {
    d = std::max(d, c.depth());
    s += c.size();
    wide = wide || c.is_wide();
    has_p = has_p || c.contains_p();
  }
  n->depth = d + 1;
  n->size = s;
  n->wide = (kind == OpKind::Max || kind == OpKind::Sum) ? false : wide;
  n->has_p = has_p;
  n->children = std::move(children);
  return ExprTree(std::move(n));
}

ExprTree ExprTree::subtree(std::size_t index) const {
  if (index >= size()) throw Error(ErrorCode::invalid_argument, "subtree index out of range");
  const ExprTree* cur = this;
  while (index != 0) {
    --index;
    for (const auto& c : cur->children()) {
      if (index < c.size()) {
        cur = &c;
        break;
      }
      index -= c.size();
    }
  }
  return *cur;
}

int ExprTree::depth_at(std::size_t index) const {
  if (index >= size()) throw Error(ErrorCode::invalid_argument, "subtree index out of range");
  const ExprTree* cur = this;
  int depth = 1;
  while (index != 0) {
    --index;
    for (const auto& c : cur->children()) {
      if (index < c.size()) {
        cur = &c;
        break;
      }
      index -= c.size();
    }
    ++depth;
  }
  return depth;
}

ExprTree ExprTree::replace_subtree(std::size_t index, const ExprTree& replacement) const {
  if (index >= size()) throw Error(ErrorCode::invalid_argument, "subtree index out of range");
  if (index == 0) return replacement;
  std::size_t offset = index - 1;
  std::vector<ExprTree> kids = children();
  for (auto& c : kids) {
    if (offset < c.size()) {
      c = c.replace_subtree(offset, replacement);
      return op(op_kind(), std::move(kids));
    }
    offset -= c.size();
  }
  throw Error(ErrorCode::invalid_argument, "subtree index out of range");
}

bool operator==(const ExprTree& a, const ExprTree& b) {
  if (a.node_ == b.node_) return true;
  if (a.is_leaf() != b.is_leaf() || a.size() != b.size()) return false;
  if (a.is_leaf()) {
    if (a.leaf_kind() != b.leaf_kind()) return false;
    if (a.leaf_kind() != LeafKind::Const) return true;
    const double x = a.constant_value(), y = b.constant_value();
    return x == y ? std::signbit(x) == std::signbit(y) : (std::isnan(x) && std::isnan(y));
  }
  if (a.op_kind() != b.op_kind()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i)
    if (!(a.children()[i] == b.children()[i])) return false;
  return true;
}

void EvalContext::validate() const {
  if (p.rows() != q.rows() || p.cols() != q.cols() || p.empty())
    throw Error(ErrorCode::shape_mismatch, "context p and q must have identical (N, C) shape");
  for (std::size_t r = 0; r < q.rows(); ++r) {
    int ones = 0;
    for (double v : q.row(r)) {
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        throw Error(ErrorCode::invalid_argument, "q is not one-hot");
    }
    if (ones != 1) throw Error(ErrorCode::invalid_argument, "q is not one-hot");
  }
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be positive");
}

BatchMatrix one_hot(std::span<const std::uint32_t> labels, std::size_t num_classes) {
  BatchMatrix q(labels.size(), num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      throw Error(ErrorCode::invalid_argument, "label out of range");
    q(i, labels[i]) = 1.0;
  }
  return q;
}

EvalContext make_context(BatchMatrix logits, std::span<const std::uint32_t> labels,
                         double gamma) {
  if (logits.rows() != labels.size())
    throw Error(ErrorCode::shape_mismatch, "logits and labels disagree on batch size");
  BatchMatrix q = one_hot(labels, logits.cols());
  return EvalContext{std::move(logits), std::move(q), gamma};
}

namespace {

BatchMatrix leaf_value(const ExprTree& t, const EvalContext& ctx) {
  switch (t.leaf_kind()) {
    case LeafKind::P: return ctx.p;
    case LeafKind::Q: return ctx.q;
    case LeafKind::Const: return BatchMatrix(ctx.p.rows(), 1, t.constant_value());
  }
  return {};
}

BatchMatrix eval_node(const ExprTree& t, const EvalContext& ctx, std::string& path) {
  if (t.is_leaf()) return leaf_value(t, ctx);
  const auto& kids = t.children();
  std::vector<BatchMatrix> vals;
  vals.reserve(kids.size());
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const auto mark = path.size();
    path += "/" + std::to_string(i);
    vals.push_back(eval_node(kids[i], ctx, path));
    path.resize(mark);
  }
  try {
    return vals.size() == 1 ? apply_op(t.op_kind(), vals[0], ctx.gamma)
                            : apply_op(t.op_kind(), vals[0], vals[1], ctx.gamma);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " at subtree " +
                              (path.empty() ? std::string("/") : path));
  }
}

// Fills tape[index .. index + size) in pre-order positions.
void fill_tape(const ExprTree& t, const EvalContext& ctx, std::vector<BatchMatrix>& tape,
               std::size_t index) {
  if (t.is_leaf()) {
    tape[index] = leaf_value(t, ctx);
    return;
  }
  const auto& kids = t.children();
  std::size_t child_index = index + 1;
  for (const auto& c : kids) {
    fill_tape(c, ctx, tape, child_index);
    child_index += c.size();
  }
  const std::size_t first = index + 1;
  tape[index] = kids.size() == 1
                    ? apply_op(t.op_kind(), tape[first], ctx.gamma)
                    : apply_op(t.op_kind(), tape[first], tape[first + kids[0].size()], ctx.gamma);
}

void backprop(const ExprTree& t, const EvalContext& ctx, const std::vector<BatchMatrix>& tape,
              std::size_t index, const BatchMatrix& upstream, BatchMatrix& grad_p) {
  if (!t.contains_p()) return;
  if (t.is_leaf()) {
    auto g = grad_p.values();
    auto u = upstream.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i];
    return;
  }
  const auto& kids = t.children();
  const std::size_t first = index + 1;
  if (kids.size() == 1) {
    auto r = vjp_with_output(t.op_kind(), tape[first], nullptr, tape[index], upstream, ctx.gamma);
    backprop(kids[0], ctx, tape, first, r.da, grad_p);
  } else {
    const std::size_t second = first + kids[0].size();
    auto r = vjp_with_output(t.op_kind(), tape[first], &tape[second], tape[index], upstream,
                             ctx.gamma);
    backprop(kids[0], ctx, tape, first, r.da, grad_p);
    backprop(kids[1], ctx, tape, second, *r.db, grad_p);
  }
}

}  // namespace

BatchMatrix eval(const ExprTree& tree, const EvalContext& ctx) {
  std::string path;
  return eval_node(tree, ctx, path);
}

std::vector<BatchMatrix> eval_tape(const ExprTree& tree, const EvalContext& ctx) {
  std::vector<BatchMatrix> tape(tree.size());
  fill_tape(tree, ctx, tape, 0);
  return tape;
}

double scalarize(const BatchMatrix& o) {
  double total = 0.0;
  for (std::size_t r = 0; r < o.rows(); ++r) {
    double s = 0.0;
    for (double v : o.row(r)) s += v;
    total += s;
  }
  return total / static_cast<double>(o.rows());
}

ValueAndGrad value_and_grad(const ExprTree& tree, const EvalContext& ctx,
                            double upstream_scale) {
  auto tape = eval_tape(tree, ctx);
  BatchMatrix grad(ctx.p.rows(), ctx.p.cols(), 0.0);
  const BatchMatrix seed(tape[0].rows(), tape[0].cols(), upstream_scale);
  backprop(tree, ctx, tape, 0, seed, grad);
  return {std::move(tape[0]), std::move(grad)};
}

BatchMatrix grad_wrt_p(const ExprTree& tree, const EvalContext& ctx) {
  return value_and_grad(tree, ctx, 1.0 / static_cast<double>(ctx.p.rows())).grad_p;
}

namespace {

ExprTree random_leaf(Rng& rng) {
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return ExprTree::p();
    case 1: return ExprTree::q();
    case 2: return ExprTree::constant(0.0);
    default: return ExprTree::constant(1.0);
  }
}

ExprTree random_node(Rng& rng, int depth, int min_depth, int max_depth, GenMethod method) {
  bool leaf;
  if (depth >= max_depth) {
    leaf = true;
  } else if (method == GenMethod::Full || depth < min_depth) {
    leaf = false;
  } else {
    // grow: uniform over the 12 operators and 4 leaf symbols
    leaf = std::uniform_int_distribution<int>(0, static_cast<int>(kOpCount) + 3)(rng) >=
           static_cast<int>(kOpCount);
  }
  if (leaf) return random_leaf(rng);
  const OpKind kind =
      kAllOps[std::uniform_int_distribution<std::size_t>(0, kOpCount - 1)(rng)];
  std::vector<ExprTree> kids;
  for (int i = 0; i < arity(kind); ++i)
    kids.push_back(random_node(rng, depth + 1, min_depth, max_depth, method));
  return ExprTree::op(kind, std::move(kids));
}

}  // namespace

ExprTree random_tree(Rng& rng, int min_depth, int max_depth, GenMethod method) {
  if (min_depth < 1 || min_depth > max_depth || max_depth > kMaxTreeDepth)
    throw Error(ErrorCode::invalid_argument, "random_tree needs 1 <= min_depth <= max_depth <= " +
                                                 std::to_string(kMaxTreeDepth));
  return random_node(rng, 1, min_depth, max_depth, method);
}

}  // namespace advloss
