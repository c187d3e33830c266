#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "advloss/numerics.hpp"
#include "advloss/rng.hpp"

namespace advloss {

// Depth bound on every tree admitted to a GP population (one-based depth).
inline constexpr int kMaxTreeDepth = 25;

enum class LeafKind { P, Q, Const };

// Immutable expression tree over leaves {p, q, constants} and the primitive
// operations. Copies share structure; edits build new spines.
class ExprTree {
 public:
  static ExprTree p();
  static ExprTree q();
  static ExprTree constant(double value);
  static ExprTree op(OpKind kind, ExprTree child);
  static ExprTree op(OpKind kind, ExprTree lhs, ExprTree rhs);
  static ExprTree op(OpKind kind, std::vector<ExprTree> children);

  bool is_leaf() const noexcept { return node_->is_leaf; }
  LeafKind leaf_kind() const noexcept { return node_->leaf; }
  double constant_value() const noexcept { return node_->value; }
  OpKind op_kind() const noexcept { return node_->op; }
  const std::vector<ExprTree>& children() const noexcept { return node_->children; }

  int depth() const noexcept { return node_->depth; }
  std::size_t size() const noexcept { return node_->size; }
  // True when the subtree evaluates to (N, C) rather than (N, 1).
  bool is_wide() const noexcept { return node_->wide; }
  bool contains_p() const noexcept { return node_->has_p; }

  // Subtrees are addressed by pre-order index in [0, size()).
  ExprTree subtree(std::size_t preorder_index) const;
  ExprTree replace_subtree(std::size_t preorder_index, const ExprTree& replacement) const;
  int depth_at(std::size_t preorder_index) const;

  friend bool operator==(const ExprTree& a, const ExprTree& b);

 private:
  struct Node {
    bool is_leaf = true;
    LeafKind leaf = LeafKind::P;
    double value = 0.0;
    OpKind op = OpKind::Add;
    std::vector<ExprTree> children;
    int depth = 1;
    std::size_t size = 1;
    bool wide = false;
    bool has_p = false;
  };

  explicit ExprTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

struct EvalContext {
  BatchMatrix p;  // logits (N, C)
  BatchMatrix q;  // one-hot labels (N, C)
  double gamma = kGamma;

  // Throws shape_mismatch / invalid_argument when the invariants do not hold.
  void validate() const;
};

EvalContext make_context(BatchMatrix logits, std::span<const std::uint32_t> labels,
                         double gamma = kGamma);
BatchMatrix one_hot(std::span<const std::uint32_t> labels, std::size_t num_classes);

BatchMatrix eval(const ExprTree& tree, const EvalContext& ctx);

// (1/N) * sum of all entries.
double scalarize(const BatchMatrix& o);

// d scalarize(eval(tree, ctx)) / dp, shape (N, C).
BatchMatrix grad_wrt_p(const ExprTree& tree, const EvalContext& ctx);

struct ValueAndGrad {
  BatchMatrix output;  // eval(tree, ctx)
  BatchMatrix grad_p;
};
// `upstream_scale` seeds every output entry: 1/N yields the gradient of the
// batch mean, 1 yields per-sample gradients that do not depend on which other
// rows share the batch.
ValueAndGrad value_and_grad(const ExprTree& tree, const EvalContext& ctx,
                            double upstream_scale);

// Forward pass retaining every node value, indexed by pre-order position.
std::vector<BatchMatrix> eval_tape(const ExprTree& tree, const EvalContext& ctx);

ExprTree parse(std::string_view source);
std::string print(const ExprTree& tree);

enum class GenMethod { Full, Grow };

// Leaves uniform over {p, q, 0, 1}; internal nodes uniform over the 12 ops.
ExprTree random_tree(Rng& rng, int min_depth, int max_depth, GenMethod method);

ExprTree simplify(const ExprTree& tree);

}  // namespace advloss
