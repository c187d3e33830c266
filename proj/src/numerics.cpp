#include "advloss/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "advloss/error.hpp"

namespace advloss {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::arity: return "arity";
    case ErrorCode::invalid_value: return "invalid_value";
    case ErrorCode::syntax: return "syntax";
    case ErrorCode::unknown_operator: return "unknown_operator";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::unsupported_loss: return "unsupported_loss";
    case ErrorCode::gradient_unsupported: return "gradient_unsupported";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::malformed_file: return "malformed_file";
    case ErrorCode::inconsistent_file: return "inconsistent_file";
    case ErrorCode::io: return "io";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

BatchMatrix::BatchMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0)
    throw Error(ErrorCode::shape_mismatch, "BatchMatrix needs rows >= 1 and cols >= 1");
}

BatchMatrix::BatchMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0)
    throw Error(ErrorCode::shape_mismatch, "BatchMatrix needs rows >= 1 and cols >= 1");
  if (data_.size() != rows * cols)
    throw Error(ErrorCode::shape_mismatch, "BatchMatrix data length does not match shape");
}

BatchMatrix::BatchMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  if (rows_ == 0 || cols_ == 0)
    throw Error(ErrorCode::shape_mismatch, "BatchMatrix needs rows >= 1 and cols >= 1");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorCode::shape_mismatch, "ragged BatchMatrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool BatchMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

int arity(OpKind kind) noexcept {
  return (kind == OpKind::Add || kind == OpKind::Mul) ? 2 : 1;
}

std::string_view op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Neg: return "neg";
    case OpKind::Abs: return "abs";
    case OpKind::Inv: return "inv";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Square: return "square";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Max: return "max";
    case OpKind::Sum: return "sum";
    case OpKind::Softmax: return "softmax";
  }
  return "?";
}

std::optional<OpKind> op_from_name(std::string_view name) noexcept {
  for (auto k : kAllOps)
    if (op_name(k) == name) return k;
  return std::nullopt;
}

namespace {

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Error arity_error(OpKind kind, int given) {
  return Error(ErrorCode::arity, std::string(op_name(kind)) + " expects " +
                                     std::to_string(arity(kind)) + " operand(s), got " +
                                     std::to_string(given));
}

void check_same_shape(const BatchMatrix& a, const BatchMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::shape_mismatch, std::string(what) + ": shape mismatch");
}

// Sum gradient over broadcast columns so it matches `like`.
BatchMatrix reduce_to(const BatchMatrix& grad, const BatchMatrix& like) {
  if (grad.cols() == like.cols()) return grad;
  BatchMatrix out(grad.rows(), 1);
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    double s = 0.0;
    for (double v : grad.row(r)) s += v;
    out(r, 0) = s;
  }
  return out;
}

double unary_value(OpKind kind, double a, double gamma) noexcept {
  switch (kind) {
    case OpKind::Neg: return -a;
    case OpKind::Abs: return std::fabs(a);
    case OpKind::Inv: return sign(a) / (std::fabs(a) + gamma);
    case OpKind::Sqrt: return sign(a) * std::sqrt(std::fabs(a) + gamma);
    case OpKind::Square: return a * a;
    case OpKind::Exp: return std::exp(a);
    case OpKind::Log: return sign(a) * std::log(std::fabs(a) + gamma);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

// d op(a)/da with sign treated as locally constant (sign'(0) = 0).
double unary_derivative(OpKind kind, double a, double out, double gamma) noexcept {
  const double s = sign(a);
  switch (kind) {
    case OpKind::Neg: return -1.0;
    case OpKind::Abs: return s;
    case OpKind::Inv: {
      const double d = std::fabs(a) + gamma;
      return -s * s / (d * d);
    }
    case OpKind::Sqrt: return s * s / (2.0 * std::sqrt(std::fabs(a) + gamma));
    case OpKind::Square: return 2.0 * a;
    case OpKind::Exp: return out;
    case OpKind::Log: return s * s / (std::fabs(a) + gamma);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> broadcast_shape(const BatchMatrix& a, const BatchMatrix& b) {
  if (a.rows() != b.rows())
    throw Error(ErrorCode::shape_mismatch, "operands have different row counts (" +
                                               std::to_string(a.rows()) + " vs " +
                                               std::to_string(b.rows()) + ")");
  if (a.cols() == b.cols()) return {a.rows(), a.cols()};
  if (a.cols() == 1) return {a.rows(), b.cols()};
  if (b.cols() == 1) return {a.rows(), a.cols()};
  throw Error(ErrorCode::shape_mismatch, "operands are not broadcastable (" +
                                             std::to_string(a.cols()) + " vs " +
                                             std::to_string(b.cols()) + " columns)");
}

BatchMatrix apply_op(OpKind kind, const BatchMatrix& a, double gamma) {
  if (arity(kind) != 1) throw arity_error(kind, 1);
  const std::size_t n = a.rows(), c = a.cols();
  switch (kind) {
    case OpKind::Max: {
      BatchMatrix out(n, 1);
      for (std::size_t r = 0; r < n; ++r) {
        auto row = a.row(r);
        double m = row[0];
        for (std::size_t j = 1; j < c; ++j)
          if (row[j] > m) m = row[j];
        out(r, 0) = m;
      }
      return out;
    }
    case OpKind::Sum: {
      BatchMatrix out(n, 1);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (double v : a.row(r)) s += v;
        out(r, 0) = s;
      }
      return out;
    }
    case OpKind::Softmax: {
      BatchMatrix out(n, c);
      for (std::size_t r = 0; r < n; ++r) {
        auto in = a.row(r);
        auto o = out.row(r);
        double m = in[0];
        for (std::size_t j = 1; j < c; ++j)
          if (in[j] > m) m = in[j];
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          o[j] = std::exp(in[j] - m);
          z += o[j];
        }
        for (std::size_t j = 0; j < c; ++j) o[j] /= z;
      }
      return out;
    }
    default: {
      BatchMatrix out(n, c);
      auto src = a.values();
      auto dst = out.values();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = unary_value(kind, src[i], gamma);
      return out;
    }
  }
}

BatchMatrix apply_op(OpKind kind, const BatchMatrix& a, const BatchMatrix& b, double) {
  if (arity(kind) != 2) throw arity_error(kind, 2);
  const auto [n, c] = broadcast_shape(a, b);
  BatchMatrix out(n, c);
  const bool add = kind == OpKind::Add;
  const std::size_t ca = a.cols(), cb = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    auto ra = a.row(r);
    auto rb = b.row(r);
    auto o = out.row(r);
    for (std::size_t j = 0; j < c; ++j) {
      const double x = ra[ca == 1 ? 0 : j];
      const double y = rb[cb == 1 ? 0 : j];
      o[j] = add ? x + y : x * y;
    }
  }
  return out;
}

VjpResult vjp_with_output(OpKind kind, const BatchMatrix& a, const BatchMatrix* b,
                          const BatchMatrix& output, const BatchMatrix& upstream, double gamma) {
  const int given = b ? 2 : 1;
  if (arity(kind) != given) throw arity_error(kind, given);
  check_same_shape(output, upstream, "vjp upstream");
  const std::size_t n = a.rows(), c = a.cols();

  switch (kind) {
    case OpKind::Add:
    case OpKind::Mul: {
      const std::size_t oc = output.cols();
      BatchMatrix ga(n, oc), gb(n, oc);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < oc; ++j) {
          const double u = upstream(r, j);
          if (kind == OpKind::Add) {
            ga(r, j) = u;
            gb(r, j) = u;
          } else {
            ga(r, j) = u * (*b)(r, b->cols() == 1 ? 0 : j);
            gb(r, j) = u * a(r, c == 1 ? 0 : j);
          }
        }
      }
      return {reduce_to(ga, a), reduce_to(gb, *b)};
    }
    case OpKind::Max: {
      BatchMatrix g(n, c, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        auto row = a.row(r);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < c; ++j)
          if (row[j] > row[arg]) arg = j;
        g(r, arg) = upstream(r, 0);
      }
      return {std::move(g), std::nullopt};
    }
    case OpKind::Sum: {
      BatchMatrix g(n, c);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) g(r, j) = upstream(r, 0);
      return {std::move(g), std::nullopt};
    }
    case OpKind::Softmax: {
      BatchMatrix g(n, c);
      for (std::size_t r = 0; r < n; ++r) {
        auto s = output.row(r);
        auto u = upstream.row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += u[j] * s[j];
        for (std::size_t j = 0; j < c; ++j) g(r, j) = s[j] * (u[j] - dot);
      }
      return {std::move(g), std::nullopt};
    }
    default: {
      BatchMatrix g(n, c);
      auto av = a.values();
      auto ov = output.values();
      auto uv = upstream.values();
      auto gv = g.values();
      for (std::size_t i = 0; i < av.size(); ++i)
        gv[i] = uv[i] * unary_derivative(kind, av[i], ov[i], gamma);
      return {std::move(g), std::nullopt};
    }
  }
}

VjpResult vjp(OpKind kind, const BatchMatrix& a, const BatchMatrix& upstream, double gamma) {
  return vjp_with_output(kind, a, nullptr, apply_op(kind, a, gamma), upstream, gamma);
}

VjpResult vjp(OpKind kind, const BatchMatrix& a, const BatchMatrix& b,
              const BatchMatrix& upstream, double gamma) {
  return vjp_with_output(kind, a, &b, apply_op(kind, a, b, gamma), upstream, gamma);
}

BatchMatrix finite_diff_grad(const ScalarFunction& func, const BatchMatrix& at, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "finite difference step must be > 0");
  BatchMatrix grad(at.rows(), at.cols());
  BatchMatrix probe = at;
  auto pv = probe.values();
  auto gv = grad.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double x = pv[i];
    pv[i] = x + h;
    const double up = func(probe);
    pv[i] = x - h;
    const double down = func(probe);
    pv[i] = x;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw Error(ErrorCode::invalid_value,
                  "non-finite function value at coordinate " + std::to_string(i));
    gv[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const BatchMatrix& a, const BatchMatrix& b, double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::shape_mismatch, "relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    diff += (av[i] - bv[i]) * (av[i] - bv[i]);
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace advloss
