#include "advloss/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "advloss/error.hpp"
#include "mlp_internal.hpp"

namespace advloss {

namespace {

constexpr std::size_t kMaxAttempts = 50;
// Tape entries beyond this make central differences cancellation-dominated.
constexpr double kMaxMagnitude = 1e4;

bool needs_nonzero(OpKind k) {
  return k == OpKind::Abs || k == OpKind::Inv || k == OpKind::Sqrt || k == OpKind::Log;
}

double top_gap(std::span<const double> row) {
  if (row.size() < 2) return std::numeric_limits<double>::infinity();
  double first = -std::numeric_limits<double>::infinity(), second = first;
  for (double v : row) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

// Smallest gap among the three largest entries; covers the max/argmax
// switches inside CW, ML and DLR.
double top3_gap(std::span<const double> row) {
  std::vector<double> v(row.begin(), row.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < std::min<std::size_t>(v.size(), 3); ++i)
    gap = std::min(gap, v[i - 1] - v[i]);
  return gap;
}

double min_abs(const BatchMatrix& m) {
  double out = std::numeric_limits<double>::infinity();
  for (double v : m.values()) out = std::min(out, std::fabs(v));
  return out;
}

double max_abs(const BatchMatrix& m) {
  double out = 0.0;
  for (double v : m.values()) out = std::max(out, std::fabs(v));
  return out;
}

double row_gap(const BatchMatrix& m) {
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < m.rows(); ++r) out = std::min(out, top_gap(m.row(r)));
  return out;
}

double walk(const ExprTree& t, const std::vector<BatchMatrix>& tape, std::size_t& index) {
  const std::size_t self = index++;
  if (!tape[self].all_finite()) return 0.0;
  double dist = std::numeric_limits<double>::infinity();
  if (t.is_leaf()) return dist;
  const std::size_t first_child = index;
  for (const auto& c : t.children()) dist = std::min(dist, walk(c, tape, index));
  // A kink only matters when the input moves with p.
  if (!t.children().front().contains_p()) return dist;
  const BatchMatrix& in = tape[first_child];
  if (needs_nonzero(t.op_kind())) dist = std::min(dist, min_abs(in));
  if (t.op_kind() == OpKind::Max) dist = std::min(dist, row_gap(in));
  return dist;
}

BatchMatrix random_entries(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> nd(0.0, 1.5);
  BatchMatrix m(rows, cols);
  for (double& v : m.values()) v = nd(rng);
  return m;
}

double weighted_sum(const BatchMatrix& w, const BatchMatrix& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) s += w.values()[i] * o.values()[i];
  return s;
}

void absorb(GradCheckItem& item, double err, double tolerance) {
  ++item.cases;
  item.max_rel_err = std::max(item.max_rel_err, err);
  if (!(err <= tolerance)) item.pass = false;
}

EvalContext random_context(Rng& rng, std::size_t rows, std::size_t classes) {
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(classes - 1));
  std::normal_distribution<double> logit(0.0, 2.0);
  BatchMatrix p(rows, classes);
  for (double& v : p.values()) v = logit(rng);
  std::vector<std::uint32_t> y(rows);
  for (auto& v : y) v = label(rng);
  return make_context(std::move(p), y);
}

}  // namespace

bool GradCheckReport::all_pass() const noexcept {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.pass; });
}

double kink_distance(const ExprTree& tree, const EvalContext& ctx) {
  const auto tape = eval_tape(tree, ctx);
  std::size_t index = 0;
  return walk(tree, tape, index);
}

GradCheckItem check_op(OpKind kind, const GradCheckOptions& options) {
  GradCheckItem item;
  item.name = "op:" + std::string(op_name(kind));
  Rng rng(derive_seed(options.seed, {0x6f70, static_cast<std::uint64_t>(kind)}));
  std::uniform_int_distribution<std::size_t> rows_d(1, 4), cols_d(2, 5), layout(0, 2);

  auto acceptable = [&](const BatchMatrix& m) {
    if (needs_nonzero(kind) && min_abs(m) <= options.kink_margin) return false;
    if (kind == OpKind::Max && row_gap(m) <= options.kink_margin) return false;
    return true;
  };

  while (item.cases < options.op_trials) {
    const std::size_t n = rows_d(rng), c = cols_d(rng);
    if (arity(kind) == 1) {
      BatchMatrix a = random_entries(rng, n, c);
      if (!acceptable(a)) {
        ++item.resampled;
        continue;
      }
      const BatchMatrix out = apply_op(kind, a);
      const BatchMatrix w = random_entries(rng, out.rows(), out.cols());
      const BatchMatrix analytic = vjp(kind, a, w).da;
      const BatchMatrix numeric = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted_sum(w, apply_op(kind, x)); }, a, options.h);
      absorb(item, relative_error(analytic, numeric), options.tolerance);
    } else {
      const std::size_t l = layout(rng);
      BatchMatrix a = random_entries(rng, n, l == 1 ? 1 : c);
      BatchMatrix b = random_entries(rng, n, l == 2 ? 1 : c);
      const BatchMatrix out = apply_op(kind, a, b);
      const BatchMatrix w = random_entries(rng, out.rows(), out.cols());
      const VjpResult g = vjp(kind, a, b, w);
      const BatchMatrix na = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted_sum(w, apply_op(kind, x, b)); }, a,
          options.h);
      const BatchMatrix nb = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted_sum(w, apply_op(kind, a, x)); }, b,
          options.h);
      absorb(item, std::max(relative_error(g.da, na), relative_error(*g.db, nb)),
             options.tolerance);
    }
  }
  return item;
}

GradCheckItem check_random_trees(const GradCheckOptions& options) {
  GradCheckItem item;
  item.name = "random_trees";
  Rng rng(derive_seed(options.seed, {0x7472}));
  std::bernoulli_distribution full(0.5);
  constexpr std::size_t rows = 4, classes = 3;

  while (item.cases < options.trees) {
    const ExprTree tree = random_tree(rng, 1, options.tree_max_depth,
                                      full(rng) ? GenMethod::Full : GenMethod::Grow);
    bool checked = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !checked; ++attempt) {
      const EvalContext ctx = random_context(rng, rows, classes);
      const auto tape = eval_tape(tree, ctx);
      const bool bounded = std::all_of(tape.begin(), tape.end(), [](const BatchMatrix& m) {
        return m.all_finite() && max_abs(m) <= kMaxMagnitude;
      });
      if (!bounded || kink_distance(tree, ctx) <= options.kink_margin) {
        ++item.resampled;
        continue;
      }
      const BatchMatrix analytic = grad_wrt_p(tree, ctx);
      const BatchMatrix numeric = finite_diff_grad(
          [&](const BatchMatrix& p) {
            EvalContext c = ctx;
            c.p = p;
            return scalarize(eval(tree, c));
          },
          ctx.p, options.h);
      absorb(item, relative_error(analytic, numeric), options.tolerance);
      checked = true;
    }
  }
  return item;
}

GradCheckItem check_model_input_grad(const MlpModel& model, const SurrogateLoss& loss,
                                     const GradCheckOptions& options) {
  GradCheckItem item;
  item.name = "model:" + loss.name();
  Rng rng(derive_seed(options.seed, {0x6d6c, std::hash<std::string>{}(loss.name())}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> label(
      0, static_cast<std::uint32_t>(model.num_classes() - 1));
  const std::size_t d = model.input_dim();

  std::size_t attempts = 0;
  while (item.cases < options.model_points) {
    if (++attempts > options.model_points * kMaxAttempts)
      throw Error(ErrorCode::invalid_value, "no kink-free points found for " + loss.name());
    BatchMatrix x(1, d);
    for (double& v : x.values()) v = unit(rng);
    const std::uint32_t y[] = {label(rng)};

    const auto trace = detail::trace_forward(model, x);
    bool ok = true;
    for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l)
      ok = ok && min_abs(trace.pre[l]) > options.kink_margin;
    const BatchMatrix logits = forward(model, x);
    const EvalContext ctx = make_context(logits, y);
    if (loss.is_tree()) {
      ok = ok && kink_distance(loss.tree(), ctx) > options.kink_margin;
    } else if (loss.builtin() != BuiltinLoss::CE) {
      ok = ok && top3_gap(logits.row(0)) > options.kink_margin;
    }
    if (!ok || !std::isfinite(loss.value(ctx))) {
      ++item.resampled;
      continue;
    }
    const BatchMatrix analytic = input_grad(model, loss, x, y);
    const BatchMatrix numeric = finite_diff_grad(
        [&](const BatchMatrix& xi) { return loss.value(make_context(forward(model, xi), y)); }, x,
        options.h);
    absorb(item, relative_error(analytic, numeric), options.tolerance);
  }
  return item;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  GradCheckReport report;
  for (OpKind k : kAllOps) report.items.push_back(check_op(k, options));
  report.items.push_back(check_random_trees(options));

  Rng rng(derive_seed(options.seed, {stream::init}));
  const std::size_t dims[] = {2, 16, 3};
  const MlpModel model = MlpModel::random(dims, rng);
  for (const auto& loss : builtin_catalog())
    if (loss.has_gradient()) report.items.push_back(check_model_input_grad(model, loss, options));
  return report;
}

}  // namespace advloss
