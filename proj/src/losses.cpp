#include "advloss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advloss/error.hpp"

namespace advloss {

std::size_t argmax_row(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

std::size_t label_of(std::span<const double> one_hot_row) {
  for (std::size_t j = 0; j < one_hot_row.size(); ++j)
    if (one_hot_row[j] == 1.0) return j;
  throw Error(ErrorCode::invalid_argument, "label row is not one-hot");
}

namespace {

double row_scale(const EvalContext& ctx, Reduction reduction) {
  return reduction == Reduction::Mean ? 1.0 / static_cast<double>(ctx.p.rows()) : 1.0;
}

// Largest logit other than the label, lowest index on ties.
std::size_t runner_up(std::span<const double> row, std::size_t label) {
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != label && row[j] > row[best]) best = j;
  return best;
}

}  // namespace

double zero_one(const EvalContext& ctx) {
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < ctx.p.rows(); ++r)
    if (argmax_row(ctx.p.row(r)) != label_of(ctx.q.row(r))) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(ctx.p.rows());
}

LossEval ce(const EvalContext& ctx, Reduction reduction) {
  const std::size_t n = ctx.p.rows(), c = ctx.p.cols();
  const double scale = row_scale(ctx, reduction);
  LossEval out{0.0, BatchMatrix(n, c)};
  for (std::size_t r = 0; r < n; ++r) {
    auto p = ctx.p.row(r);
    const std::size_t y = label_of(ctx.q.row(r));
    const double m = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double v : p) z += std::exp(v - m);
    const double lse = m + std::log(z);
    out.value += lse - p[y];
    for (std::size_t j = 0; j < c; ++j)
      out.grad_p(r, j) = scale * (std::exp(p[j] - lse) - (j == y ? 1.0 : 0.0));
  }
  out.value /= static_cast<double>(n);
  return out;
}

LossEval cw(const EvalContext& ctx, Reduction reduction) {
  const std::size_t n = ctx.p.rows(), c = ctx.p.cols();
  if (c < 2) throw Error(ErrorCode::unsupported_loss, "cw needs at least 2 classes");
  const double scale = row_scale(ctx, reduction);
  LossEval out{0.0, BatchMatrix(n, c, 0.0)};
  for (std::size_t r = 0; r < n; ++r) {
    auto p = ctx.p.row(r);
    const std::size_t y = label_of(ctx.q.row(r));
    const std::size_t j = runner_up(p, y);
    out.value += p[j] - p[y];
    out.grad_p(r, j) = scale;
    out.grad_p(r, y) = -scale;
  }
  out.value /= static_cast<double>(n);
  return out;
}

LossEval ml(const EvalContext& ctx, Reduction reduction) { return cw(ctx, reduction); }

LossEval dlr(const EvalContext& ctx, Reduction reduction) {
  const std::size_t n = ctx.p.rows(), c = ctx.p.cols();
  if (c < 3) throw Error(ErrorCode::unsupported_loss, "dlr needs at least 3 classes");
  const double scale = row_scale(ctx, reduction);
  LossEval out{0.0, BatchMatrix(n, c, 0.0)};
  std::vector<std::size_t> order(c);
  for (std::size_t r = 0; r < n; ++r) {
    auto p = ctx.p.row(r);
    const std::size_t y = label_of(ctx.q.row(r));
    const std::size_t j = runner_up(p, y);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    const std::size_t first = order[0], third = order[2];
    const double num = p[y] - p[j];
    const double den = p[first] - p[third] + ctx.gamma;
    out.value += -num / den;
    auto g = out.grad_p.row(r);
    g[y] += -scale / den;
    g[j] += scale / den;
    g[first] += scale * num / (den * den);
    g[third] -= scale * num / (den * den);
  }
  out.value /= static_cast<double>(n);
  return out;
}

SurrogateLoss::SurrogateLoss(std::string name, BuiltinLoss kind)
    : name_(std::move(name)), body_(kind) {}

SurrogateLoss::SurrogateLoss(std::string name, ExprTree tree)
    : name_(std::move(name)), body_(std::move(tree)) {}

bool SurrogateLoss::has_gradient() const noexcept {
  const auto* b = std::get_if<BuiltinLoss>(&body_);
  return !b || *b != BuiltinLoss::ZeroOne;
}

const ExprTree& SurrogateLoss::tree() const {
  if (const auto* t = std::get_if<ExprTree>(&body_)) return *t;
  throw Error(ErrorCode::invalid_argument, name_ + " is not an expression loss");
}

BuiltinLoss SurrogateLoss::builtin() const {
  if (const auto* b = std::get_if<BuiltinLoss>(&body_)) return *b;
  throw Error(ErrorCode::invalid_argument, name_ + " is not a built-in loss");
}

double SurrogateLoss::value(const EvalContext& ctx) const {
  if (const auto* t = std::get_if<ExprTree>(&body_)) return scalarize(eval(*t, ctx));
  switch (std::get<BuiltinLoss>(body_)) {
    case BuiltinLoss::ZeroOne: return zero_one(ctx);
    case BuiltinLoss::CE: return ce(ctx).value;
    case BuiltinLoss::CW: return cw(ctx).value;
    case BuiltinLoss::ML: return ml(ctx).value;
    case BuiltinLoss::DLR: return dlr(ctx).value;
  }
  return 0.0;
}

LossEval SurrogateLoss::value_and_grad(const EvalContext& ctx, Reduction reduction) const {
  if (const auto* t = std::get_if<ExprTree>(&body_)) {
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(ctx.p.rows())
                                                      : 1.0;
    auto vg = advloss::value_and_grad(*t, ctx, scale);
    return {scalarize(vg.output), std::move(vg.grad_p)};
  }
  switch (std::get<BuiltinLoss>(body_)) {
    case BuiltinLoss::ZeroOne:
      throw Error(ErrorCode::gradient_unsupported, name_ + " provides no gradient");
    case BuiltinLoss::CE: return ce(ctx, reduction);
    case BuiltinLoss::CW: return cw(ctx, reduction);
    case BuiltinLoss::ML: return ml(ctx, reduction);
    case BuiltinLoss::DLR: return dlr(ctx, reduction);
  }
  return {};
}

BatchMatrix SurrogateLoss::grad_p(const EvalContext& ctx, Reduction reduction) const {
  return value_and_grad(ctx, reduction).grad_p;
}

const std::vector<std::pair<std::string_view, std::string_view>> kDistilledLosses = {
    {"bs1", "(exp (div (mul 10 (softmax p)) (max (softmax p))))"},
    {"bs2", "(exp (neg (max (softmax (add p (mul 2 (softmax (mul 5 p))))))))"},
    {"bs3",
     "(mul (softmax (neg (softmax (mul (mul (exp p) 2) p)))) "
     "(add (softmax (mul 2 p)) (mul 2 q)))"},
    {"bs4", "(square (sub (softmax (sub (add (softmax (mul 2 p)) p) q)) q))"},
    {"bs5", "(exp (neg (max (add (softmax (add (exp (add (softmax (add (exp p) p)) 1)) p)) 1))))"},
};

const std::vector<SurrogateLoss>& builtin_catalog() {
  static const std::vector<SurrogateLoss> catalog = [] {
    std::vector<SurrogateLoss> c;
    c.emplace_back("ce", BuiltinLoss::CE);
    c.emplace_back("cw", BuiltinLoss::CW);
    c.emplace_back("ml", BuiltinLoss::ML);
    c.emplace_back("dlr", BuiltinLoss::DLR);
    c.emplace_back("zero_one", BuiltinLoss::ZeroOne);
    for (const auto& [name, text] : kDistilledLosses)
      c.emplace_back(std::string(name), parse(text));
    return c;
  }();
  return catalog;
}

const SurrogateLoss& find_loss(std::string_view name) {
  for (const auto& l : builtin_catalog())
    if (l.name() == name) return l;
  throw Error(ErrorCode::not_found, "no loss named '" + std::string(name) + "' in the catalog");
}

}  // namespace advloss
