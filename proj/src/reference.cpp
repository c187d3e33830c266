// Serial reference kernels. Deliberately simple: one batch, one thread, one
// point at a time. Tests compare the OpenMP kernels against these bitwise.

#include <algorithm>
#include <functional>

#include "advloss/error.hpp"
#include "advloss/riskeval.hpp"

namespace advloss::reference {

RiskReport approx_risk(const MlpModel& model, const SurrogateLoss& loss, const Dataset& data,
                       const AttackSpec& spec) {
  data.validate();
  const BatchMatrix clean = forward(model, data.features);
  const AttackResult res = pgd(model, loss, data.features, data.labels, spec, 0);
  std::size_t correct = 0, errors = 0, frozen = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax_row(clean.row(i)) == data.labels[i]) ++correct;
    errors += res.success[i];
    frozen += res.frozen[i];
  }
  const auto n = static_cast<double>(data.size());
  RiskReport r;
  r.loss_name = loss.name();
  r.attack = spec.summary();
  r.n_samples = data.size();
  r.clean_accuracy = static_cast<double>(correct) / n;
  r.r_double_prime = static_cast<double>(errors) / n;
  r.adversarial_accuracy = static_cast<double>(data.size() - errors) / n;
  r.frozen = frozen;
  return r;
}

double grid_oracle_risk(const MlpModel& model, const Dataset& data, double epsilon,
                        int grid_steps) {
  data.validate();
  if (data.input_dim() > kMaxOracleDim)
    throw Error(ErrorCode::dimension, "grid oracle supports input_dim <= 3");
  if (grid_steps < 3) throw Error(ErrorCode::invalid_argument, "grid_steps must be >= 3");
  const std::size_t d = data.input_dim();
  std::size_t errors = 0;
  BatchMatrix point(1, d);
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto x = data.features.row(s);
    bool broken = false;
    for (int level = 1; level <= grid_steps && !broken; ++level) {
      std::function<void(std::size_t)> visit = [&](std::size_t k) {
        if (broken) return;
        if (k == d) {
          broken = argmax_row(forward(model, point).row(0)) != data.labels[s];
          return;
        }
        for (int step = -level; step <= level; ++step) {
          point(0, k) = std::clamp(x[k] + epsilon * step / level, 0.0, 1.0);
          visit(k + 1);
        }
      };
      visit(0);
    }
    if (broken) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

}  // namespace advloss::reference
