#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survbench/cox_linear.hpp"
#include "survbench/dataset.hpp"

using namespace survbench;

namespace {

/// x=[1,0,1,0], times 1..4, all events: the score equation reduces to
/// u^2 - u - 4 = 0 with u = exp(beta).
struct AnalyticInstance {
  Matrix X;
  Vector time;
  IntVector event;

  AnalyticInstance() {
    X.resize(4, 1);
    X << 1, 0, 1, 0;
    time.resize(4);
    time << 1, 2, 3, 4;
    event = IntVector::Ones(4);
  }
};

SurvivalDataset linear_synth(Index n, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_rows = n;
  spec.n_continuous = 4;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(4);
  risk.beta << 0.8, -0.5, 0.3, 0.0;
  spec.risk = risk;
  spec.target_event_fraction = 0.7;
  spec.seed = seed;
  return generate_synthetic(spec).data;
}

}  // namespace

TEST_CASE("newton solves the analytic instance") {
  const AnalyticInstance inst;
  NewtonTrace trace;
  const CoxModel model =
      fit_cox_newton(inst.X, inst.time, inst.event, 1e-6, 100, 1e-9, &trace);
  const Scalar expected = std::log((1.0 + std::sqrt(17.0)) / 2.0);  // 0.94061364...
  CHECK(model.beta[0] == doctest::Approx(expected).epsilon(1e-4));
  CHECK(trace.converged);

  // every accepted step strictly increases the penalized log-likelihood
  for (std::size_t i = 1; i < trace.penalized_ll.size(); ++i) {
    CHECK(trace.penalized_ll[i] > trace.penalized_ll[i - 1]);
  }
}

TEST_CASE("huge ridge pins beta to zero") {
  const AnalyticInstance inst;
  const CoxModel model = fit_cox_newton(inst.X, inst.time, inst.event, 1e6);
  CHECK(std::abs(model.beta[0]) < 1e-3);
}

TEST_CASE("all-zero feature stays at zero") {
  AnalyticInstance inst;
  inst.X.setZero();
  const CoxModel model = fit_cox_newton(inst.X, inst.time, inst.event, 1e-6);
  CHECK(model.beta[0] == 0.0);
}

TEST_CASE("newton rejects missing values") {
  AnalyticInstance inst;
  inst.X(1, 0) = missing_value();
  CHECK_THROWS_AS(fit_cox_newton(inst.X, inst.time, inst.event, 1e-6), ValidationError);
}

TEST_CASE("full lasso shrinkage at and above alpha_max") {
  const SurvivalDataset ds = linear_synth(400, 21);
  const Scalar a_max = lasso_alpha_max(ds.features, ds.time, ds.event, 1.0);

  PenaltySpec penalty;
  penalty.l1_ratio = 1.0;
  penalty.alpha = a_max * 1.0001;
  const CoxModel shrunk =
      fit_cox_coordinate_descent(ds.features, ds.time, ds.event, penalty);
  CHECK(shrunk.beta.lpNorm<Eigen::Infinity>() == 0.0);

  penalty.alpha = a_max * 0.5;
  const CoxModel loose =
      fit_cox_coordinate_descent(ds.features, ds.time, ds.event, penalty);
  CHECK(loose.beta.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("ridge coordinate descent matches newton through the alpha mapping") {
  const SurvivalDataset ds = linear_synth(300, 22);
  PenaltySpec penalty;
  penalty.alpha = 1e-3;
  penalty.l1_ratio = 0.0;
  const CoxModel cd = fit_cox_coordinate_descent(ds.features, ds.time, ds.event, penalty,
                                                 200, 1e-9);
  const CoxModel newton =
      fit_cox_newton(ds.features, ds.time, ds.event,
                     1e-3 * static_cast<Scalar>(ds.n_rows()), 100, 1e-10);
  CHECK((cd.beta - newton.beta).lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("l1 norm shrinks monotonically along the alpha grid") {
  const SurvivalDataset ds = linear_synth(300, 23);
  Scalar prev_norm = std::numeric_limits<Scalar>::infinity();
  for (Scalar alpha : {0.001, 0.005623413251903491, 0.03162277660168379,
                       0.1778279410038923, 1.0}) {
    PenaltySpec penalty;
    penalty.alpha = alpha;
    penalty.l1_ratio = 0.7;
    const CoxModel model =
        fit_cox_coordinate_descent(ds.features, ds.time, ds.event, penalty);
    const Scalar norm = model.beta.lpNorm<1>();
    CHECK(norm <= prev_norm + 1e-8);
    prev_norm = norm;
  }
}

TEST_CASE("breslow baseline hand anchors") {
  SUBCASE("three events, beta = 0") {
    Matrix X = Matrix::Zero(3, 1);
    Vector time(3);
    time << 1, 2, 3;
    IntVector event = IntVector::Ones(3);
    CoxModel model;
    model.beta = Vector::Zero(1);
    const auto steps = breslow_baseline(model, X, time, event);
    REQUIRE(steps.size() == 3);
    CHECK(steps[0].first == 1.0);
    CHECK(steps[0].second == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(steps[1].second == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(steps[2].second == doctest::Approx(11.0 / 6.0).epsilon(1e-12));
  }
  SUBCASE("tied events share the denominator") {
    Matrix X = Matrix::Zero(3, 1);
    Vector time(3);
    time << 1, 1, 2;
    IntVector event(3);
    event << 1, 1, 0;
    CoxModel model;
    model.beta = Vector::Zero(1);
    const auto steps = breslow_baseline(model, X, time, event);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].second == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("predict_risk basics") {
  CoxModel model;
  model.beta = Vector(2);
  model.beta << 1, -1;
  Matrix X(1, 2);
  X << 2, 3;
  CHECK(predict_risk(model, X)[0] == doctest::Approx(-1.0));

  Matrix bad(1, 3);
  CHECK_THROWS_AS(predict_risk(model, bad), ValidationError);

  model.beta.setZero();
  Matrix X2 = Matrix::Random(5, 2);
  CHECK(predict_risk(model, X2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("risk order ignores a constant zero-coefficient column") {
  const SurvivalDataset ds = linear_synth(120, 31);
  const CoxModel model = fit_cox_newton(ds.features, ds.time, ds.event, 1e-6);
  const Vector base = predict_risk(model, ds.features);

  Matrix augmented(ds.n_rows(), ds.n_cols() + 1);
  augmented << ds.features, Vector::Ones(ds.n_rows());
  CoxModel wider;
  wider.beta = Vector::Zero(ds.n_cols() + 1);
  wider.beta.head(ds.n_cols()) = model.beta;
  const Vector with_const = predict_risk(wider, augmented);

  std::vector<Index> order_a(static_cast<std::size_t>(ds.n_rows()));
  std::vector<Index> order_b(static_cast<std::size_t>(ds.n_rows()));
  std::iota(order_a.begin(), order_a.end(), Index{0});
  std::iota(order_b.begin(), order_b.end(), Index{0});
  std::stable_sort(order_a.begin(), order_a.end(),
                   [&](Index a, Index b) { return base[a] < base[b]; });
  std::stable_sort(order_b.begin(), order_b.end(),
                   [&](Index a, Index b) { return with_const[a] < with_const[b]; });
  CHECK(order_a == order_b);
}
