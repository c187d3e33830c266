#include "advloss/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "advloss/error.hpp"

namespace advloss {

std::string norm_name(Norm norm) { return norm == Norm::Linf ? "linf" : "l2"; }

Norm norm_from_name(std::string_view name) {
  if (name == "linf") return Norm::Linf;
  if (name == "l2") return Norm::L2;
  throw Error(ErrorCode::invalid_argument, "unknown norm '" + std::string(name) + "'");
}

double AttackSpec::effective_step_size() const {
  if (step_size) return *step_size;
  return steps > 0 ? 2.5 * epsilon / steps : 0.0;
}

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::invalid_argument, "attack epsilon must be finite and >= 0");
  if (steps < 0) throw Error(ErrorCode::invalid_argument, "attack steps must be >= 0");
  if (steps > 0 && step_size && !(*step_size > 0.0))
    throw Error(ErrorCode::invalid_argument, "attack step size must be > 0");
}

std::string AttackSpec::summary() const {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << "pgd-" << steps << ' ' << norm_name(norm) << " eps=" << epsilon
     << " step=" << effective_step_size() << (random_start ? " rs" : " no-rs")
     << " seed=" << seed;
  return ss.str();
}

namespace {

double l2_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  if (m == 0.0 || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += (x / m) * (x / m);
  return m * std::sqrt(s);
}

}  // namespace

void project_row(std::span<double> delta, Norm norm, double epsilon) {
  if (norm == Norm::Linf) {
    for (double& d : delta) d = std::clamp(d, -epsilon, epsilon);
    return;
  }
  const double n = l2_norm(delta);
  if (!(n > epsilon)) return;
  const std::vector<double> original(delta.begin(), delta.end());
  double scale = epsilon / n;
  for (;;) {
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = original[i] * scale;
    // Rounding can leave the rescaled norm an ulp above epsilon; shrink until
    // inside so a second projection is a no-op.
    if (!(l2_norm(delta) > epsilon)) return;
    scale = std::nextafter(scale, 0.0);
  }
}

BatchMatrix project(const BatchMatrix& delta, Norm norm, double epsilon) {
  BatchMatrix out = delta;
  for (std::size_t r = 0; r < out.rows(); ++r) project_row(out.row(r), norm, epsilon);
  return out;
}

namespace {

void random_start_row(std::span<double> delta, const AttackSpec& spec, Rng& rng) {
  if (spec.norm == Norm::Linf) {
    std::uniform_real_distribution<double> u(-spec.epsilon, spec.epsilon);
    for (double& d : delta) d = u(rng);
    return;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& d : delta) d = gauss(rng);
  const double n = l2_norm(delta);
  const double radius =
      spec.epsilon *
      std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / delta.size());
  for (double& d : delta) d = n > 0.0 ? d / n * radius : 0.0;
}

// x = clamp(origin + project(x - origin)) row-wise.
void project_and_clamp_row(std::span<double> x, std::span<const double> origin,
                           const AttackSpec& spec, std::vector<double>& scratch) {
  scratch.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) scratch[i] = x[i] - origin[i];
  project_row(scratch, spec.norm, spec.epsilon);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::clamp(origin[i] + scratch[i], 0.0, 1.0);
}

bool row_finite(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

AttackResult pgd(const MlpModel& model, const SurrogateLoss& loss, const BatchMatrix& x,
                 std::span<const std::uint32_t> labels, const AttackSpec& spec,
                 std::uint64_t first_index) {
  spec.validate();
  if (x.rows() != labels.size())
    throw Error(ErrorCode::shape_mismatch, "attack inputs and labels disagree on batch size");
  if (spec.steps > 0 && !loss.has_gradient())
    throw Error(ErrorCode::gradient_unsupported, loss.name() + " cannot drive a gradient attack");

  const std::size_t n = x.rows(), d = x.cols();
  const double alpha = spec.effective_step_size();
  AttackResult result{x, std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0), {}};
  BatchMatrix& cur = result.x_adv;
  std::vector<double> scratch;

  if (spec.random_start) {
    for (std::size_t r = 0; r < n; ++r) {
      Rng rng(derive_seed(spec.seed, {stream::attack, first_index + r}));
      auto row = cur.row(r);
      random_start_row(row, spec, rng);
      for (std::size_t i = 0; i < d; ++i) row[i] += x(r, i);
      project_and_clamp_row(row, x.row(r), spec, scratch);
    }
  }

  for (int step = 0; step < spec.steps; ++step) {
    auto ig = loss_and_input_grad(model, loss, cur, labels, Reduction::Sum);
    result.loss_trace.push_back(ig.loss_value);
    for (std::size_t r = 0; r < n; ++r) {
      if (result.frozen[r]) continue;
      auto g = ig.grad.row(r);
      if (!row_finite(g)) {
        result.frozen[r] = 1;
        continue;
      }
      auto row = cur.row(r);
      if (spec.norm == Norm::Linf) {
        for (std::size_t i = 0; i < d; ++i) {
          const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
          row[i] += alpha * s;
        }
      } else {
        const double gn = l2_norm(g);
        if (gn > 0.0)
          for (std::size_t i = 0; i < d; ++i) row[i] += alpha * (g[i] / gn);
      }
      project_and_clamp_row(row, x.row(r), spec, scratch);
    }
  }

  const BatchMatrix logits = forward(model, cur);
  for (std::size_t r = 0; r < n; ++r)
    result.success[r] = argmax_row(logits.row(r)) != labels[r] ? 1 : 0;
  result.loss_trace.push_back(loss.value(make_context(logits, labels)));
  return result;
}

}  // namespace advloss
