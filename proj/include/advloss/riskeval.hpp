#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "advloss/attack.hpp"
#include "advloss/losses.hpp"
#include "advloss/model.hpp"

namespace advloss {

// Work partitioning for the OpenMP kernels. Results never depend on either
// field: every per-sample quantity is computed from (seed, sample index).
struct ExecPolicy {
  int workers = 1;
  std::size_t batch_size = 256;
};

struct RiskReport {
  std::string loss_name;
  std::string attack;  // AttackSpec::summary()
  std::size_t n_samples = 0;
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;  // 1 - r_double_prime
  double r_double_prime = 0.0;
  std::size_t frozen = 0;  // samples stopped by a non-finite gradient
};

// Per-sample outcome vectors behind a RiskReport.
struct RiskDetail {
  std::vector<std::uint8_t> clean_correct;
  std::vector<std::uint8_t> adversarial_error;
  std::vector<std::uint8_t> frozen;
};

RiskReport approx_risk(const MlpModel& model, const SurrogateLoss& loss, const Dataset& data,
                       const AttackSpec& spec, const ExecPolicy& exec = {},
                       RiskDetail* detail = nullptr);

inline constexpr std::size_t kMaxOracleDim = 3;

// Fraction of samples for which some L-inf lattice point (clamped to the box)
// is misclassified. The lattice is the union over s = 1..grid_steps of
// {k * eps / s : -s <= k <= s}^d, so the estimate never decreases as
// grid_steps grows; it is a lower bound on the true adversarial risk.
double grid_oracle_risk(const MlpModel& model, const Dataset& data, double epsilon,
                        int grid_steps, const ExecPolicy& exec = {},
                        std::vector<std::uint8_t>* per_sample = nullptr);

// Signed gap oracle_risk - r_double_prime.
double approximation_error(double oracle_risk, double r_double_prime);

// One (resolution x resolution) matrix per loss: entry (i, j) is the loss at
// clamp(x + alpha_i * (x_hc - x) + beta_j * (x_bs - x)), alpha_i = i / (res - 1).
std::vector<BatchMatrix> landscape_grid(const MlpModel& model,
                                        const std::vector<const SurrogateLoss*>& losses,
                                        const BatchMatrix& x,
                                        std::span<const std::uint32_t> labels,
                                        const BatchMatrix& x_adv_hc, const BatchMatrix& x_adv_bs,
                                        std::size_t resolution);

struct LandscapeAnchors {
  std::size_t index = 0;
  BatchMatrix x;
  BatchMatrix x_hc;
  BatchMatrix x_bs;
  std::uint32_t label = 0;
  // f(x) = y, f(x_hc) = y and f(x_bs) != y
  bool property_holds = false;
};

// First sample where the handcrafted-loss attack fails and the other loss
// succeeds; falls back to sample 0 with property_holds = false.
LandscapeAnchors find_landscape_anchors(const MlpModel& model, const Dataset& data,
                                        const SurrogateLoss& hc_loss,
                                        const SurrogateLoss& bs_loss, const AttackSpec& spec);

namespace reference {

// Single-batch, single-thread versions kept as the ground truth for the
// partitioned OpenMP kernels above.
RiskReport approx_risk(const MlpModel& model, const SurrogateLoss& loss, const Dataset& data,
                       const AttackSpec& spec);
double grid_oracle_risk(const MlpModel& model, const Dataset& data, double epsilon,
                        int grid_steps);

}  // namespace reference

}  // namespace advloss
