#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advloss/losses.hpp"
#include "advloss/model.hpp"
#include "advloss/numerics.hpp"

namespace advloss {

enum class Norm { Linf, L2 };

std::string norm_name(Norm norm);
Norm norm_from_name(std::string_view name);  // throws invalid_argument

struct AttackSpec {
  Norm norm = Norm::Linf;
  double epsilon = 8.0 / 255.0;
  int steps = 10;
  std::optional<double> step_size;  // default 2.5 * epsilon / steps
  bool random_start = true;
  std::uint64_t seed = 0;

  double effective_step_size() const;
  void validate() const;
  std::string summary() const;
};

struct AttackResult {
  BatchMatrix x_adv;
  std::vector<std::uint8_t> success;  // final iterate misclassified
  std::vector<std::uint8_t> frozen;   // hit a non-finite gradient
  std::vector<double> loss_trace;     // batch-mean loss at iterates 0..steps
};

// Projects each row of delta onto the epsilon ball of `norm`. Idempotent.
BatchMatrix project(const BatchMatrix& delta, Norm norm, double epsilon);
void project_row(std::span<double> delta, Norm norm, double epsilon);

// PGD with optional random start, final-iterate semantics. Row i draws its
// random start from (spec.seed, first_index + i), and every per-row
// computation is independent of the other rows, so results do not depend on
// how a dataset is split into batches.
AttackResult pgd(const MlpModel& model, const SurrogateLoss& loss, const BatchMatrix& x,
                 std::span<const std::uint32_t> labels, const AttackSpec& spec,
                 std::uint64_t first_index = 0);

}  // namespace advloss
