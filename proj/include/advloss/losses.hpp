#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "advloss/expr.hpp"
#include "advloss/numerics.hpp"

namespace advloss {

enum class BuiltinLoss { CE, CW, ML, DLR, ZeroOne };

// How the per-sample losses of a batch are combined before differentiation.
// Mean matches the scalarized loss; Sum gives each row the gradient of its
// own sample loss, independent of batch composition.
enum class Reduction { Mean, Sum };

struct LossEval {
  double value = 0.0;
  BatchMatrix grad_p;
};

// Uniform surrogate-loss interface over analytic baselines and DSL trees.
class SurrogateLoss {
 public:
  SurrogateLoss(std::string name, BuiltinLoss kind);
  SurrogateLoss(std::string name, ExprTree tree);

  const std::string& name() const noexcept { return name_; }
  bool has_gradient() const noexcept;
  bool is_tree() const noexcept { return std::holds_alternative<ExprTree>(body_); }
  const ExprTree& tree() const;  // throws when built-in
  BuiltinLoss builtin() const;   // throws when tree-based

  double value(const EvalContext& ctx) const;
  BatchMatrix grad_p(const EvalContext& ctx, Reduction reduction = Reduction::Mean) const;
  // Value is always the batch mean; throws gradient_unsupported for ZeroOne.
  LossEval value_and_grad(const EvalContext& ctx, Reduction reduction = Reduction::Mean) const;

 private:
  std::string name_;
  std::variant<BuiltinLoss, ExprTree> body_;
};

// Row prediction with ties broken toward the lowest index.
std::size_t argmax_row(std::span<const double> row) noexcept;
std::size_t label_of(std::span<const double> one_hot_row);

double zero_one(const EvalContext& ctx);
LossEval ce(const EvalContext& ctx, Reduction reduction = Reduction::Mean);
LossEval cw(const EvalContext& ctx, Reduction reduction = Reduction::Mean);
LossEval ml(const EvalContext& ctx, Reduction reduction = Reduction::Mean);
LossEval dlr(const EvalContext& ctx, Reduction reduction = Reduction::Mean);

// Expression text of the five distilled losses, in catalog order bs1..bs5.
extern const std::vector<std::pair<std::string_view, std::string_view>> kDistilledLosses;

const std::vector<SurrogateLoss>& builtin_catalog();
const SurrogateLoss& find_loss(std::string_view name);  // throws not_found

}  // namespace advloss
