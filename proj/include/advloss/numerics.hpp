#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace advloss {

// Guard constant shared by Inv, Sqrt and Log (and the DLR denominator).
inline constexpr double kGamma = 1e-6;

// Dense row-major (rows x cols) array of doubles. Non-finite entries are
// representable; all_finite() is the validity predicate.
class BatchMatrix {
 public:
  BatchMatrix() = default;
  BatchMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  BatchMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  BatchMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const BatchMatrix&, const BatchMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class OpKind { Add, Mul, Neg, Abs, Inv, Sqrt, Square, Exp, Log, Max, Sum, Softmax };

inline constexpr std::size_t kOpCount = 12;
inline constexpr OpKind kAllOps[kOpCount] = {
    OpKind::Add, OpKind::Mul,    OpKind::Neg, OpKind::Abs, OpKind::Inv, OpKind::Sqrt,
    OpKind::Square, OpKind::Exp, OpKind::Log, OpKind::Max, OpKind::Sum, OpKind::Softmax};

int arity(OpKind kind) noexcept;
std::string_view op_name(OpKind kind) noexcept;
std::optional<OpKind> op_from_name(std::string_view name) noexcept;

// Output shape of a binary element-wise op; throws shape_mismatch.
std::pair<std::size_t, std::size_t> broadcast_shape(const BatchMatrix& a, const BatchMatrix& b);

BatchMatrix apply_op(OpKind kind, const BatchMatrix& a, double gamma = kGamma);
BatchMatrix apply_op(OpKind kind, const BatchMatrix& a, const BatchMatrix& b,
                     double gamma = kGamma);

struct VjpResult {
  BatchMatrix da;
  std::optional<BatchMatrix> db;
};

// Gradient of sum(upstream * op(inputs)) with respect to each input. The
// `output` argument must be the forward result for these inputs; pass it when
// already available to skip recomputation.
VjpResult vjp(OpKind kind, const BatchMatrix& a, const BatchMatrix& upstream,
              double gamma = kGamma);
VjpResult vjp(OpKind kind, const BatchMatrix& a, const BatchMatrix& b,
              const BatchMatrix& upstream, double gamma = kGamma);
VjpResult vjp_with_output(OpKind kind, const BatchMatrix& a, const BatchMatrix* b,
                          const BatchMatrix& output, const BatchMatrix& upstream,
                          double gamma = kGamma);

using ScalarFunction = std::function<double(const BatchMatrix&)>;

// Central differences per coordinate. Throws invalid_value when any
// evaluation is non-finite.
BatchMatrix finite_diff_grad(const ScalarFunction& func, const BatchMatrix& at, double h);

// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
double relative_error(const BatchMatrix& a, const BatchMatrix& b, double floor = 1e-4);

}  // namespace advloss
