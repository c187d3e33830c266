#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advloss/expr.hpp"
#include "advloss/losses.hpp"
#include "advloss/model.hpp"

namespace advloss {

struct GradCheckOptions {
  std::size_t op_trials = 25;      // per primitive op
  std::size_t trees = 100;
  int tree_max_depth = 6;
  std::size_t model_points = 50;   // per loss
  double tolerance = 1e-3;
  double h = 1e-6;
  // Points closer than this to a kink (sign change, max tie, ReLU hinge)
  // are resampled rather than checked.
  double kink_margin = 1e-3;
  std::uint64_t seed = 0;
};

struct GradCheckItem {
  std::string name;
  std::size_t cases = 0;
  std::size_t resampled = 0;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  bool all_pass() const noexcept;
};

// Smallest distance from a kink over every node of the tree at ctx: inputs to
// abs/inv/sqrt/log near zero, and the top-two gap of max inputs. Returns
// +inf for kink-free trees and 0 when any value is non-finite.
double kink_distance(const ExprTree& tree, const EvalContext& ctx);

GradCheckItem check_op(OpKind kind, const GradCheckOptions& options);
GradCheckItem check_random_trees(const GradCheckOptions& options);
GradCheckItem check_model_input_grad(const MlpModel& model, const SurrogateLoss& loss,
                                     const GradCheckOptions& options);

// Every primitive op, the random-tree sweep, and loss-through-model checks on
// a random two-layer network for the differentiable catalog losses.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace advloss
