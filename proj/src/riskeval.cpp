#include "advloss/riskeval.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "advloss/error.hpp"

namespace advloss {

namespace {

int thread_count(const ExecPolicy& exec) { return std::max(1, exec.workers); }

std::size_t chunk_size(const ExecPolicy& exec) { return std::max<std::size_t>(1, exec.batch_size); }

}  // namespace

RiskReport approx_risk(const MlpModel& model, const SurrogateLoss& loss, const Dataset& data,
                       const AttackSpec& spec, const ExecPolicy& exec, RiskDetail* detail) {
  data.validate();
  spec.validate();
  const std::size_t n = data.size();
  const std::size_t chunk = chunk_size(exec);
  const auto chunks = static_cast<std::int64_t>((n + chunk - 1) / chunk);
  RiskDetail d{std::vector<std::uint8_t>(n), std::vector<std::uint8_t>(n),
               std::vector<std::uint8_t>(n)};

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(exec))
  for (std::int64_t c = 0; c < chunks; ++c) {
    try {
      const std::size_t start = static_cast<std::size_t>(c) * chunk;
      const std::size_t stop = std::min(n, start + chunk);
      std::vector<std::size_t> idx(stop - start);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
      const Dataset part = data.subset(idx);
      const BatchMatrix logits = forward(model, part.features);
      const AttackResult res = pgd(model, loss, part.features, part.labels, spec, start);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        d.clean_correct[start + i] = argmax_row(logits.row(i)) == part.labels[i] ? 1 : 0;
        d.adversarial_error[start + i] = res.success[i];
        d.frozen[start + i] = res.frozen[i];
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t correct = 0, errors = 0, frozen = 0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += d.clean_correct[i];
    errors += d.adversarial_error[i];
    frozen += d.frozen[i];
  }
  RiskReport report;
  report.loss_name = loss.name();
  report.attack = spec.summary();
  report.n_samples = n;
  report.clean_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  report.r_double_prime = static_cast<double>(errors) / static_cast<double>(n);
  report.adversarial_accuracy = static_cast<double>(n - errors) / static_cast<double>(n);
  report.frozen = frozen;
  if (detail) *detail = std::move(d);
  return report;
}

namespace {

void check_oracle_args(const Dataset& data, double epsilon, int grid_steps) {
  data.validate();
  if (data.input_dim() > kMaxOracleDim)
    throw Error(ErrorCode::dimension, "grid oracle supports input_dim <= 3, got " +
                                          std::to_string(data.input_dim()));
  if (grid_steps < 3) throw Error(ErrorCode::invalid_argument, "grid_steps must be >= 3");
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be >= 0");
}

// Lattice points of one resolution level for sample x, as rows of a batch.
BatchMatrix lattice_batch(std::span<const double> x, double epsilon, int level) {
  const std::size_t d = x.size();
  const std::size_t side = 2 * static_cast<std::size_t>(level) + 1;
  std::size_t count = 1;
  for (std::size_t k = 0; k < d; ++k) count *= side;
  BatchMatrix pts(count, d);
  for (std::size_t p = 0; p < count; ++p) {
    std::size_t rem = p;
    for (std::size_t k = 0; k < d; ++k) {
      const auto step = static_cast<int>(rem % side) - level;
      rem /= side;
      const double offset = epsilon * step / level;
      pts(p, k) = std::clamp(x[k] + offset, 0.0, 1.0);
    }
  }
  return pts;
}

bool sample_breakable(const MlpModel& model, std::span<const double> x, std::uint32_t label,
                      double epsilon, int grid_steps) {
  if (epsilon == 0.0) grid_steps = 1;  // every level collapses to x itself
  for (int level = 1; level <= grid_steps; ++level) {
    const BatchMatrix logits = forward(model, lattice_batch(x, epsilon, level));
    for (std::size_t r = 0; r < logits.rows(); ++r)
      if (argmax_row(logits.row(r)) != label) return true;
  }
  return false;
}

}  // namespace

double grid_oracle_risk(const MlpModel& model, const Dataset& data, double epsilon,
                        int grid_steps, const ExecPolicy& exec,
                        std::vector<std::uint8_t>* per_sample) {
  check_oracle_args(data, epsilon, grid_steps);
  const auto n = static_cast<std::int64_t>(data.size());
  std::vector<std::uint8_t> broken(data.size(), 0);
#pragma omp parallel for schedule(dynamic, 4) num_threads(thread_count(exec))
  for (std::int64_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    broken[s] = sample_breakable(model, data.features.row(s), data.labels[s], epsilon, grid_steps);
  }
  const auto errors = static_cast<double>(std::count(broken.begin(), broken.end(), 1));
  if (per_sample) *per_sample = broken;
  return errors / static_cast<double>(n);
}

double approximation_error(double oracle_risk, double r_double_prime) {
  if (!(oracle_risk >= 0.0 && oracle_risk <= 1.0) ||
      !(r_double_prime >= 0.0 && r_double_prime <= 1.0))
    throw Error(ErrorCode::invalid_argument, "risks must lie in [0, 1]");
  return oracle_risk - r_double_prime;
}

std::vector<BatchMatrix> landscape_grid(const MlpModel& model,
                                        const std::vector<const SurrogateLoss*>& losses,
                                        const BatchMatrix& x,
                                        std::span<const std::uint32_t> labels,
                                        const BatchMatrix& x_adv_hc, const BatchMatrix& x_adv_bs,
                                        std::size_t resolution) {
  if (x_adv_hc.rows() != x.rows() || x_adv_hc.cols() != x.cols() ||
      x_adv_bs.rows() != x.rows() || x_adv_bs.cols() != x.cols())
    throw Error(ErrorCode::shape_mismatch, "landscape anchors must match the clean batch shape");
  if (labels.size() != x.rows())
    throw Error(ErrorCode::shape_mismatch, "landscape labels disagree with batch size");
  if (resolution < 2) throw Error(ErrorCode::invalid_argument, "landscape resolution must be >= 2");

  std::vector<BatchMatrix> grids(losses.size(), BatchMatrix(resolution, resolution));
  const double denom = static_cast<double>(resolution - 1);
  BatchMatrix point(x.rows(), x.cols());
  for (std::size_t i = 0; i < resolution; ++i) {
    const double alpha = static_cast<double>(i) / denom;
    for (std::size_t j = 0; j < resolution; ++j) {
      const double beta = static_cast<double>(j) / denom;
      auto pv = point.values();
      auto xv = x.values();
      auto hv = x_adv_hc.values();
      auto bv = x_adv_bs.values();
      for (std::size_t k = 0; k < pv.size(); ++k)
        pv[k] = std::clamp(xv[k] + alpha * (hv[k] - xv[k]) + beta * (bv[k] - xv[k]), 0.0, 1.0);
      const auto ctx = make_context(forward(model, point), labels);
      for (std::size_t l = 0; l < losses.size(); ++l) grids[l](i, j) = losses[l]->value(ctx);
    }
  }
  return grids;
}

LandscapeAnchors find_landscape_anchors(const MlpModel& model, const Dataset& data,
                                        const SurrogateLoss& hc_loss,
                                        const SurrogateLoss& bs_loss, const AttackSpec& spec) {
  data.validate();
  const BatchMatrix clean = forward(model, data.features);
  const AttackResult hc = pgd(model, hc_loss, data.features, data.labels, spec);
  const AttackResult bs = pgd(model, bs_loss, data.features, data.labels, spec);
  std::size_t pick = 0;
  bool found = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax_row(clean.row(i)) == data.labels[i] && !hc.success[i] && bs.success[i]) {
      pick = i;
      found = true;
      break;
    }
  }
  const std::size_t one[] = {pick};
  LandscapeAnchors a;
  a.index = pick;
  a.x = data.subset(one).features;
  a.label = data.labels[pick];
  a.x_hc = BatchMatrix(1, data.input_dim());
  a.x_bs = BatchMatrix(1, data.input_dim());
  std::copy_n(hc.x_adv.row(pick).begin(), data.input_dim(), a.x_hc.row(0).begin());
  std::copy_n(bs.x_adv.row(pick).begin(), data.input_dim(), a.x_bs.row(0).begin());
  a.property_holds = found;
  return a;
}

}  // namespace advloss
