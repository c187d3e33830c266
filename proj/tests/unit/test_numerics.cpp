#include <doctest.h>

#include <cmath>
#include <random>

#include "advloss/error.hpp"
#include "advloss/numerics.hpp"
#include "advloss/rng.hpp"

using namespace advloss;

namespace {

BatchMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.5) {
  std::normal_distribution<double> nd(0.0, scale);
  BatchMatrix m(r, c);
  for (double& v : m.values()) v = nd(rng);
  return m;
}

bool away_from_kinks(OpKind k, const BatchMatrix& m) {
  for (double v : m.values())
    if (std::fabs(v) <= 1e-3) return false;
  if (k != OpKind::Max) return true;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t i = 0; i < row.size(); ++i)
      for (std::size_t j = i + 1; j < row.size(); ++j)
        if (std::fabs(row[i] - row[j]) <= 1e-3) return false;
  }
  return true;
}

double weighted(const BatchMatrix& w, const BatchMatrix& o) {
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) s += w.values()[i] * o.values()[i];
  return s;
}

}  // namespace

TEST_CASE("softmax of a zero row is uniform") {
  const BatchMatrix out = apply_op(OpKind::Softmax, BatchMatrix{{0.0, 0.0}});
  CHECK(out(0, 0) == doctest::Approx(0.5));
  CHECK(out(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("guarded ops follow the sign convention") {
  const BatchMatrix inv = apply_op(OpKind::Inv, BatchMatrix{{2.0}});
  CHECK(inv(0, 0) == doctest::Approx(1.0 / (2.0 + 1e-6)).epsilon(1e-12));
  CHECK(inv(0, 0) == doctest::Approx(0.49999975).epsilon(1e-8));
  const BatchMatrix sq = apply_op(OpKind::Sqrt, BatchMatrix{{-4.0}});
  CHECK(sq(0, 0) == doctest::Approx(-2.0).epsilon(1e-6));
  const BatchMatrix lg = apply_op(OpKind::Log, BatchMatrix{{-std::exp(1.0)}});
  CHECK(lg(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  // sign(0) = 0 collapses all three guards to zero
  CHECK(apply_op(OpKind::Inv, BatchMatrix{{0.0}})(0, 0) == 0.0);
  CHECK(apply_op(OpKind::Log, BatchMatrix{{0.0}})(0, 0) == 0.0);
}

TEST_CASE("max and sum keep a column") {
  const BatchMatrix a{{1, 5, 2}, {0, 0, 0}};
  const BatchMatrix m = apply_op(OpKind::Max, a);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 1);
  CHECK(m(0, 0) == 5.0);
  CHECK(m(1, 0) == 0.0);
  const BatchMatrix s = apply_op(OpKind::Sum, a);
  CHECK(s(0, 0) == 8.0);
}

TEST_CASE("broadcasting and shape errors") {
  const BatchMatrix wide{{1, 2, 3}, {4, 5, 6}};
  const BatchMatrix narrow{{10}, {20}};
  const BatchMatrix out = apply_op(OpKind::Add, wide, narrow);
  CHECK(out == BatchMatrix{{11, 12, 13}, {24, 25, 26}});
  CHECK(apply_op(OpKind::Mul, narrow, wide) == BatchMatrix{{10, 20, 30}, {80, 100, 120}});

  const BatchMatrix other{{1, 2}, {3, 4}};
  try {
    apply_op(OpKind::Add, wide, other);
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape_mismatch);
  }
  try {
    apply_op(OpKind::Neg, wide, wide);
    FAIL("expected arity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::arity);
  }
  try {
    apply_op(OpKind::Add, wide);
    FAIL("expected arity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::arity);
  }
}

TEST_CASE("vjp examples") {
  const VjpResult neg = vjp(OpKind::Neg, BatchMatrix{{0.4, -2.0}}, BatchMatrix{{1, 1}});
  CHECK(neg.da == BatchMatrix{{-1, -1}});
  CHECK_FALSE(neg.db.has_value());

  const VjpResult sm = vjp(OpKind::Softmax, BatchMatrix{{0, 0}}, BatchMatrix{{1, 0}});
  CHECK(sm.da(0, 0) == doctest::Approx(0.25));
  CHECK(sm.da(0, 1) == doctest::Approx(-0.25));

  const BatchMatrix at{{0.7}};
  const VjpResult ex = vjp(OpKind::Exp, at, BatchMatrix{{1.3}});
  const BatchMatrix fd =
      finite_diff_grad([](const BatchMatrix& x) { return 1.3 * std::exp(x(0, 0)); }, at, 1e-5);
  CHECK(relative_error(ex.da, fd) <= 1e-6);
  CHECK(ex.da(0, 0) == doctest::Approx(1.3 * std::exp(0.7)));
}

TEST_CASE("subgradient conventions") {
  CHECK(vjp(OpKind::Abs, BatchMatrix{{0.0}}, BatchMatrix{{1.0}}).da(0, 0) == 0.0);
  // Max routes to the first maximal element.
  const VjpResult m = vjp(OpKind::Max, BatchMatrix{{2, 5, 5}}, BatchMatrix{{1.0}});
  CHECK(m.da == BatchMatrix{{0, 1, 0}});
}

TEST_CASE("broadcast gradient is the row sum of upstream") {
  Rng rng(3);
  const BatchMatrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 1);
  const BatchMatrix up = random_matrix(rng, 3, 4);
  const VjpResult g = vjp(OpKind::Add, a, b, up);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) s += up(r, c);
    CHECK(g.db->operator()(r, 0) == s);
  }
  CHECK(g.da == up);
}

TEST_CASE("finite_diff_grad examples") {
  const BatchMatrix g = finite_diff_grad(
      [](const BatchMatrix& x) { return x(0, 0) * x(0, 0) + x(0, 1) * x(0, 1); },
      BatchMatrix{{1, 2}}, 1e-5);
  CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(g(0, 1) == doctest::Approx(4.0).epsilon(1e-8));
  const BatchMatrix z = finite_diff_grad([](const BatchMatrix&) { return 0.0; },
                                         BatchMatrix{{1, 2, 3}}, 1e-5);
  CHECK(z == BatchMatrix(1, 3, 0.0));
  CHECK_THROWS_AS(finite_diff_grad([](const BatchMatrix&) { return NAN; }, BatchMatrix{{1}}, 1e-5),
                  Error);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const BatchMatrix out = apply_op(OpKind::Softmax, random_matrix(rng, 3, 5, 20.0));
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double s = 0.0;
      for (double v : out.row(r)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        s += v;
      }
      CHECK(std::fabs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("validity predicate tracks overflow") {
  CHECK(apply_op(OpKind::Exp, BatchMatrix{{1.0}}).all_finite());
  CHECK_FALSE(apply_op(OpKind::Exp, BatchMatrix{{1000.0}}).all_finite());
  CHECK_FALSE(apply_op(OpKind::Square, BatchMatrix{{1e200}}).all_finite());
  Rng rng(5);
  for (OpKind k : {OpKind::Neg, OpKind::Abs, OpKind::Sqrt, OpKind::Max, OpKind::Sum,
                   OpKind::Softmax})
    CHECK(apply_op(k, random_matrix(rng, 4, 3, 1e6)).all_finite());
}

TEST_CASE("vjp agrees with finite differences on 1000 random cases") {
  Rng rng(2025);
  std::uniform_int_distribution<std::size_t> kind_d(0, kOpCount - 1), rows_d(1, 4), cols_d(2, 5);
  int checked = 0;
  while (checked < 1000) {
    const OpKind k = kAllOps[kind_d(rng)];
    const std::size_t n = rows_d(rng), c = cols_d(rng);
    const BatchMatrix a = random_matrix(rng, n, c);
    if (!away_from_kinks(k, a)) continue;
    if (arity(k) == 1) {
      const BatchMatrix out = apply_op(k, a);
      const BatchMatrix w = random_matrix(rng, out.rows(), out.cols());
      const BatchMatrix fd = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted(w, apply_op(k, x)); }, a, 1e-6);
      CHECK(relative_error(vjp(k, a, w).da, fd) <= 1e-4);
    } else {
      const BatchMatrix b = random_matrix(rng, n, c);
      const BatchMatrix w = random_matrix(rng, n, c);
      const VjpResult g = vjp(k, a, b, w);
      const BatchMatrix fa = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted(w, apply_op(k, x, b)); }, a, 1e-6);
      const BatchMatrix fb = finite_diff_grad(
          [&](const BatchMatrix& x) { return weighted(w, apply_op(k, a, x)); }, b, 1e-6);
      CHECK(relative_error(g.da, fa) <= 1e-4);
      CHECK(relative_error(*g.db, fb) <= 1e-4);
    }
    ++checked;
  }
}

TEST_CASE("op table") {
  CHECK(arity(OpKind::Add) == 2);
  CHECK(arity(OpKind::Mul) == 2);
  for (OpKind k : kAllOps) {
    if (k != OpKind::Add && k != OpKind::Mul) CHECK(arity(k) == 1);
    CHECK(op_from_name(op_name(k)) == k);
  }
  CHECK_FALSE(op_from_name("div").has_value());
  CHECK(kGamma > 0.0);
}
