#include <doctest.h>

#include <cstring>

#include "advloss/datagen.hpp"
#include "advloss/error.hpp"
#include "advloss/riskeval.hpp"

using namespace advloss;

namespace {

struct Setup {
  Dataset data;
  MlpModel model;
};

const Setup& setup() {
  static const Setup s = [] {
    Setup r;
    r.data = make_blobs(400, 2, 3, 0.12, 31);
    TrainConfig c;
    c.epochs = 15;
    c.seed = 2;
    r.model = train(r.data, c).model;
    return r;
  }();
  return s;
}

double clean_error(const MlpModel& m, const Dataset& d) { return 1.0 - clean_accuracy(m, d); }

bool same_report(const RiskReport& a, const RiskReport& b) {
  return a.n_samples == b.n_samples && a.frozen == b.frozen &&
         std::memcmp(&a.r_double_prime, &b.r_double_prime, sizeof(double)) == 0 &&
         std::memcmp(&a.clean_accuracy, &b.clean_accuracy, sizeof(double)) == 0;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::config;
}

}  // namespace

TEST_CASE("zero budget reduces to clean error") {
  const auto& [d, m] = setup();
  AttackSpec s;
  s.epsilon = 0.0;
  for (const char* name : {"ce", "cw", "dlr", "bs3"}) {
    const RiskReport r = approx_risk(m, find_loss(name), d, s);
    CHECK(r.r_double_prime == doctest::Approx(clean_error(m, d)).epsilon(1e-12));
    CHECK(r.adversarial_accuracy == r.clean_accuracy);
  }
  CHECK(grid_oracle_risk(m, d, 0.0, 5) == doctest::Approx(clean_error(m, d)).epsilon(1e-12));
}

TEST_CASE("a constant loss never moves the input") {
  const auto& [d, m] = setup();
  const SurrogateLoss flat("flat", parse("(add 1 1)"));
  AttackSpec s;
  s.epsilon = 0.2;
  s.random_start = false;
  CHECK(approx_risk(m, flat, d, s).r_double_prime ==
        doctest::Approx(clean_error(m, d)).epsilon(1e-12));
}

TEST_CASE("oracle is monotone in resolution and budget") {
  const auto& [d, m] = setup();
  const Dataset sub = d.head(150);
  double prev = 0.0;
  for (int steps = 3; steps <= 9; ++steps) {
    const double r = grid_oracle_risk(m, sub, 0.08, steps);
    CHECK(r >= prev);
    prev = r;
  }
  prev = 0.0;
  for (double eps : {0.0, 0.02, 0.04, 0.08, 0.16}) {
    const double r = grid_oracle_risk(m, sub, eps, 5);
    CHECK(r >= prev);
    CHECK(r >= clean_error(m, sub));
    prev = r;
  }
}

TEST_CASE("a far boundary adds no oracle risk") {
  // class 0 wins unless x0 + x1 > 10, impossible inside the box
  DenseLayer l{BatchMatrix{{0, 0}, {1, 1}}, {0, -10}};
  const MlpModel m({l});
  Dataset d = make_blobs(60, 2, 2, 0.1, 4);
  for (auto& y : d.labels) y = 0;
  CHECK(grid_oracle_risk(m, d, 0.3, 5) == 0.0);
}

TEST_CASE("oracle dimension and argument errors") {
  const Dataset d4 = make_blobs(10, 4, 2, 0.1, 1);
  Rng rng(1);
  const std::size_t dims[] = {4, 3, 2};
  const MlpModel m = MlpModel::random(dims, rng);
  CHECK(code_of([&] { grid_oracle_risk(m, d4, 0.1, 5); }) == ErrorCode::dimension);
  const auto& s = setup();
  CHECK(code_of([&] { grid_oracle_risk(s.model, s.data, 0.1, 2); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("approximation_error examples") {
  CHECK(approximation_error(0.3, 0.25) == doctest::Approx(0.05));
  CHECK(approximation_error(0.3, 0.3) == 0.0);
  CHECK(approximation_error(0.2, 0.3) == doctest::Approx(-0.1));
  CHECK(code_of([] { approximation_error(1.2, 0.3); }) == ErrorCode::invalid_argument);
}

TEST_CASE("parallel evaluation matches the reference bitwise") {
  const auto& [d, m] = setup();
  AttackSpec s;
  s.epsilon = 0.08;
  s.seed = 1234;
  for (Norm n : {Norm::Linf, Norm::L2}) {
    s.norm = n;
    for (const char* name : {"ce", "dlr", "bs5"}) {
      const RiskReport ref = reference::approx_risk(m, find_loss(name), d, s);
      for (int workers : {1, 2, 4})
        for (std::size_t batch : {1, 7, 64, 1000})
          CHECK(same_report(approx_risk(m, find_loss(name), d, s, {workers, batch}), ref));
    }
  }
  const Dataset sub = d.head(120);
  const double ref = reference::grid_oracle_risk(m, sub, 0.08, 5);
  for (int workers : {1, 3})
    for (std::size_t batch : {5, 120}) CHECK(grid_oracle_risk(m, sub, 0.08, 5, {workers, batch}) == ref);
}

TEST_CASE("risk bounds") {
  const auto& [d, m] = setup();
  AttackSpec s;
  s.epsilon = 0.1;
  RiskDetail detail;
  const RiskReport r = approx_risk(m, find_loss("ce"), d, s, {}, &detail);
  CHECK(r.n_samples == d.size());
  CHECK(r.r_double_prime >= 0.0);
  CHECK(r.r_double_prime <= 1.0);
  CHECK(detail.adversarial_error.size() == d.size());
  // a misclassified clean point stays an adversarial error only if the
  // attack did not repair it; the oracle at a matching budget dominates
  CHECK(grid_oracle_risk(m, d.head(200), 0.1, 5) >= 0.0);
}

TEST_CASE("landscape corners hit the anchors") {
  const auto& [d, m] = setup();
  const BatchMatrix x{{0.4, 0.5}};
  const BatchMatrix hc{{0.45, 0.5}}, bs{{0.4, 0.42}};
  const std::uint32_t y[] = {1};
  const SurrogateLoss& ce = find_loss("ce");
  const auto grids = landscape_grid(m, {&ce}, x, y, hc, bs, 3);
  REQUIRE(grids.size() == 1);
  CHECK(grids[0].rows() == 3);
  CHECK(grids[0].cols() == 3);
  auto loss_at = [&](const BatchMatrix& p) {
    return ce.value(make_context(forward(m, p), std::vector<std::uint32_t>{1}));
  };
  CHECK(grids[0](0, 0) == doctest::Approx(loss_at(x)));
  CHECK(grids[0](2, 0) == doctest::Approx(loss_at(hc)));
  CHECK(grids[0](0, 2) == doctest::Approx(loss_at(bs)));
  CHECK(code_of([&] { landscape_grid(m, {&ce}, x, y, hc, bs, 1); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("landscape anchors") {
  const auto& [d, m] = setup();
  AttackSpec s;
  s.epsilon = 0.1;
  const LandscapeAnchors a = find_landscape_anchors(m, d, find_loss("ce"), find_loss("bs1"), s);
  if (a.property_holds) {
    CHECK(argmax_row(forward(m, a.x).row(0)) == a.label);
    CHECK(argmax_row(forward(m, a.x_hc).row(0)) == a.label);
    CHECK(argmax_row(forward(m, a.x_bs).row(0)) != a.label);
  } else {
    CHECK(a.index == 0);
  }
}
