#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "survbench/metrics.hpp"
#include "survbench/rng.hpp"
#include "survbench/special.hpp"

using namespace survbench;

namespace {

struct Sample {
  Vector time;
  IntVector event;
  Vector risk;
};

Sample random_sample(Index n, Scalar censor_fraction, Rng& rng, bool tie_risks = false) {
  Sample s;
  s.time.resize(n);
  s.event.resize(n);
  s.risk.resize(n);
  for (Index i = 0; i < n; ++i) {
    s.time[i] = 1.0 + static_cast<Scalar>(rng.uniform_int(std::max<Index>(n / 3, 2)));
    s.event[i] = rng.uniform01() < censor_fraction ? 0 : 1;
    s.risk[i] = tie_risks ? static_cast<Scalar>(rng.uniform_int(6)) : rng.normal();
  }
  if (s.event.sum() == 0) s.event[0] = 1;
  return s;
}

/// Independent IPCW oracle: direct double loop, own censoring KM lookup.
Scalar uno_oracle(const Vector& train_time, const IntVector& train_event,
                  const Sample& test, Scalar tau) {
  // censoring KM over the train split, written independently of KmCurve
  std::vector<std::pair<Scalar, Scalar>> g_steps;  // (time, survival after)
  {
    std::vector<Index> order(static_cast<std::size_t>(train_time.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return train_time[a] < train_time[b]; });
    Scalar s = 1.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      Scalar d = 0;
      while (j < order.size() && train_time[order[j]] == train_time[order[i]]) {
        if (train_event[order[j]] == 0) d += 1;  // censoring treated as the event
        ++j;
      }
      if (d > 0) {
        s *= 1.0 - d / static_cast<Scalar>(order.size() - i);
        g_steps.emplace_back(train_time[order[i]], s);
      }
      i = j;
    }
  }
  auto g_before = [&](Scalar t) {
    Scalar s = 1.0;
    for (const auto& [st, sv] : g_steps) {
      if (st >= t) break;
      s = sv;
    }
    return s;
  };

  Scalar num = 0, den = 0;
  const Index n = test.time.size();
  for (Index i = 0; i < n; ++i) {
    if (test.event[i] != 1 || !(test.time[i] < tau)) continue;
    for (Index j = 0; j < n; ++j) {
      const bool later = test.time[j] > test.time[i];
      const bool tied_censored = test.time[j] == test.time[i] && test.event[j] == 0;
      if (!later && !tied_censored) continue;
      const Scalar g = g_before(test.time[i]);
      const Scalar w = 1.0 / (g * g);
      den += w;
      if (test.risk[i] > test.risk[j]) {
        num += w;
      } else if (test.risk[i] == test.risk[j]) {
        num += 0.5 * w;
      }
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("harrell anchors") {
  Vector time(3);
  time << 1, 2, 3;
  IntVector event = IntVector::Ones(3);
  Vector perfect(3), mixed(3), flat(3);
  perfect << 3, 2, 1;
  mixed << 1, 3, 2;
  flat << 1, 1, 1;
  CHECK(harrell_c(time, event, perfect) == doctest::Approx(1.0));
  CHECK(harrell_c(time, event, mixed) == doctest::Approx(1.0 / 3.0));
  CHECK(harrell_c(time, event, flat) == doctest::Approx(0.5));
}

TEST_CASE("harrell error without comparable pairs") {
  Vector time(2);
  time << 1, 1;
  IntVector event = IntVector::Ones(2);  // tied events are not comparable
  Vector risk(2);
  risk << 1, 2;
  CHECK_THROWS_AS(harrell_c(time, event, risk), ValidationError);
}

TEST_CASE("fast and quadratic harrell agree exactly") {
  Rng rng(31);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index n = 5 + static_cast<Index>(rng.uniform_int(496));
    const bool ties = rng.uniform01() < 0.5;
    const Sample s = random_sample(n, 0.8 * rng.uniform01(), rng, ties);
    Scalar slow;
    try {
      slow = harrell_c(s.time, s.event, s.risk);
    } catch (const ValidationError&) {
      CHECK_THROWS_AS(harrell_c_fast(s.time, s.event, s.risk), ValidationError);
      continue;
    }
    const Scalar fast = harrell_c_fast(s.time, s.event, s.risk);
    CHECK(fast == slow);  // identical integer counting, exact equality
  }
}

TEST_CASE("harrell symmetry and monotone-transform invariance") {
  Rng rng(37);
  for (int rep = 0; rep < 50; ++rep) {
    const Sample s = random_sample(80, 0.3, rng, false);  // continuous risks: no ties
    const Scalar c = harrell_c(s.time, s.event, s.risk);
    CHECK(harrell_c(s.time, s.event, -s.risk) == doctest::Approx(1.0 - c).epsilon(1e-12));
    const Vector transformed = (s.risk.array() * 0.3).exp();
    CHECK(harrell_c(s.time, s.event, transformed) == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("uno equals harrell when training has no censoring") {
  Rng rng(41);
  const Sample s = random_sample(150, 0.4, rng);
  Vector train_time(100);
  IntVector train_event = IntVector::Ones(100);
  for (Index i = 0; i < 100; ++i) train_time[i] = 1.0 + static_cast<Scalar>(i % 17);

  const Scalar tau = s.time.maxCoeff() + 1.0;
  // restricted Harrell: here every test time is < tau, so plain Harrell
  const Scalar h = harrell_c_fast(s.time, s.event, s.risk);
  const Scalar u = uno_c(train_time, train_event, s.time, s.event, s.risk, tau);
  CHECK(u == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("uno of the perfect-ranking toy is 1") {
  Vector time(3);
  time << 1, 2, 3;
  IntVector event = IntVector::Ones(3);
  Vector risk(3);
  risk << 3, 2, 1;
  CHECK(uno_c(time, event, time, event, risk, 10.0) == doctest::Approx(1.0));
}

TEST_CASE("uno matches the independent double-loop IPCW oracle") {
  Rng rng(43);
  for (int rep = 0; rep < 40; ++rep) {
    const Index n_train = 50 + static_cast<Index>(rng.uniform_int(100));
    const Sample train = random_sample(n_train, 0.4, rng);
    const Sample test = random_sample(40 + static_cast<Index>(rng.uniform_int(260)), 0.4,
                                      rng, /*tie_risks=*/rep % 2 == 0);
    const Scalar tau = 1.0 + 0.9 * (test.time.maxCoeff() - 1.0);
    Scalar ours;
    try {
      ours = uno_c(train.time, train.event, test.time, test.event, test.risk, tau);
    } catch (const ValidationError&) {
      continue;  // G hits 0 or no pairs below tau; oracle undefined too
    }
    const Scalar oracle = uno_oracle(train.time, train.event, test, tau);
    CHECK(ours == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("uno errors when the censoring survival hits zero") {
  // train: every row censored at time 1 -> G(t-) = 0 for t > 1
  Vector train_time = Vector::Ones(4);
  IntVector train_event = IntVector::Zero(4);
  Vector time(3);
  time << 2, 3, 4;
  IntVector event = IntVector::Ones(3);
  Vector risk(3);
  risk << 3, 2, 1;
  CHECK_THROWS_AS(uno_c(train_time, train_event, time, event, risk, 4.0),
                  ValidationError);
}

TEST_CASE("kaplan-meier anchors") {
  SUBCASE("event, censor, event") {
    Vector time(3);
    time << 1, 2, 3;
    IntVector event(3);
    event << 1, 0, 1;
    const KmCurve curve = kaplan_meier(time, event);
    REQUIRE(curve.steps.size() == 2);
    CHECK(curve.survival_at(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(curve.survival_at(2.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(curve.survival_at(3.0) == doctest::Approx(0.0));
  }
  SUBCASE("all censored keeps survival at 1") {
    Vector time(3);
    time << 1, 2, 3;
    IntVector event = IntVector::Zero(3);
    const KmCurve curve = kaplan_meier(time, event);
    CHECK(curve.steps.empty());
    CHECK(curve.survival_at(100.0) == 1.0);
  }
  SUBCASE("tied events in one step") {
    Vector time(3);
    time << 1, 1, 1;
    IntVector event(3);
    event << 1, 1, 0;
    const KmCurve curve = kaplan_meier(time, event);
    REQUIRE(curve.steps.size() == 1);
    CHECK(curve.steps[0].survival == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(curve.steps[0].at_risk == 3);
    CHECK(curve.steps[0].events == 2);
  }
}

TEST_CASE("rmst anchors and properties") {
  Vector time(3);
  time << 1, 2, 3;
  IntVector event(3);
  event << 1, 0, 1;
  const KmCurve curve = kaplan_meier(time, event);
  CHECK(rmst(curve, 3.0) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));

  KmCurve flat;  // S == 1
  CHECK(rmst(flat, 4.5) == doctest::Approx(4.5));
  CHECK(rmst(curve, 0.5) == doctest::Approx(0.5));  // tau before the first event

  Scalar prev = 0;
  for (Scalar tau : {0.5, 1.0, 2.0, 3.0, 10.0}) {
    const Scalar value = rmst(curve, tau);
    CHECK(value >= prev);
    CHECK(value <= tau);
    prev = value;
  }
}

TEST_CASE("logrank test anchors") {
  Vector ta(2), tb(2);
  ta << 1, 2;
  tb << 3, 4;
  IntVector ones = IntVector::Ones(2);
  const LogrankResult r = logrank_test(ta, ones, tb, ones);
  CHECK(r.statistic == doctest::Approx(49.0 / 17.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.08955507441364255).epsilon(1e-10));

  const LogrankResult swapped = logrank_test(tb, ones, ta, ones);
  CHECK(swapped.statistic == doctest::Approx(r.statistic).epsilon(1e-12));

  const LogrankResult same = logrank_test(ta, ones, ta, ones);
  CHECK(same.statistic == doctest::Approx(0.0));
  CHECK(same.p_value == doctest::Approx(1.0));
}

TEST_CASE("top fraction metrics") {
  SUBCASE("perfect separation") {
    Vector time(10), risk(10);
    IntVector event(10);
    for (Index i = 0; i < 10; ++i) {
      risk[i] = static_cast<Scalar>(i + 1);
      event[i] = i >= 8 ? 1 : 0;  // events exactly on risks 9 and 10
      time[i] = event[i] ? 1.0 + 0.1 * static_cast<Scalar>(i) : 20.0;
    }
    const GroupMetrics gm = top_fraction_metrics(time, event, risk, 0.2, 10.0);
    CHECK(gm.sensitivity == doctest::Approx(1.0));
    CHECK(gm.specificity == doctest::Approx(1.0));
    CHECK(gm.fpr == doctest::Approx(0.0));
    CHECK(gm.fnr == doctest::Approx(0.0));
    CHECK(gm.hazard_ratio > 1.0);
  }
  SUBCASE("delta rmst from the two-group toy") {
    // top group = A (events at 1,2), rest = B (events at 3,4), tau = 4
    Vector time(4), risk(4);
    IntVector event = IntVector::Ones(4);
    time << 1, 2, 3, 4;
    risk << 10, 9, 1, 0;  // top 50% = the early events
    const GroupMetrics gm = top_fraction_metrics(time, event, risk, 0.5, 4.0);
    CHECK(gm.delta_rmst == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(gm.logrank_p == doctest::Approx(0.08955507441364255).epsilon(1e-10));
  }
  SUBCASE("null data keeps the hazard ratio near 1") {
    Rng rng(51);
    Vector time(400), risk(400);
    IntVector event(400);
    for (Index i = 0; i < 400; ++i) {
      time[i] = 1.0 + rng.uniform01() * 10.0;
      event[i] = rng.uniform01() < 0.5 ? 1 : 0;
      risk[i] = rng.normal();
    }
    const GroupMetrics gm = top_fraction_metrics(time, event, risk, 0.2, 8.0);
    CHECK(gm.hazard_ratio > 0.6);
    CHECK(gm.hazard_ratio < 1.6);
  }
  SUBCASE("errors") {
    Vector time(4);
    time << 1, 2, 3, 4;
    IntVector event = IntVector::Ones(4);
    Vector flat = Vector::Ones(4);  // everyone ties into the top group
    CHECK_THROWS_AS(top_fraction_metrics(time, event, flat, 0.2, 4.0), ValidationError);
  }
}

TEST_CASE("delta_c arithmetic") {
  CHECK(delta_c(0.8, 0.7) == doctest::Approx(0.1));
  CHECK(delta_c(0.7, 0.7) == doctest::Approx(0.0));
  CHECK(delta_c(0.6, 0.7) == doctest::Approx(-0.1));
}

TEST_CASE("paired t-test") {
  SUBCASE("identical sequences") {
    const TTestResult r = paired_t_test({1, 2, 3}, {1, 2, 3});
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
  }
  SUBCASE("zero-mean differences") {
    const TTestResult r = paired_t_test({1, -1, 0}, {0, 0, 0});
    CHECK(r.t == doctest::Approx(0.0));
    CHECK(r.p == doctest::Approx(1.0));
  }
  SUBCASE("strong consistent differences (scipy oracle)") {
    const TTestResult r = paired_t_test({1, 1.1, 0.9, 1.0, 1.0}, {0, 0, 0, 0, 0});
    CHECK(r.t == doctest::Approx(31.62277660168379).epsilon(1e-10));
    CHECK(r.p == doctest::Approx(5.960208996599507e-06).epsilon(1e-8));
    CHECK(r.p < 0.01);
  }
  SUBCASE("zero variance, nonzero mean") {
    const TTestResult r = paired_t_test({1, 1, 1}, {0, 0, 0});
    CHECK(std::isinf(r.t));
    CHECK(r.p == 0.0);
  }
  SUBCASE("length checks") {
    CHECK_THROWS_AS(paired_t_test({1}, {1}), ValidationError);
    CHECK_THROWS_AS(paired_t_test({1, 2}, {1}), ValidationError);
  }
}

TEST_CASE("benjamini-hochberg anchors") {
  const std::vector<Scalar> q = bh_fdr({0.01, 0.02, 0.03});
  REQUIRE(q.size() == 3);
  CHECK(q[0] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(0.03).epsilon(1e-12));

  CHECK(bh_fdr({0.42})[0] == doctest::Approx(0.42));
  for (Scalar v : bh_fdr({1.0, 1.0, 1.0})) CHECK(v == doctest::Approx(1.0));

  // q preserves input order and stays monotone with respect to p rank
  const std::vector<Scalar> q2 = bh_fdr({0.9, 0.001, 0.2, 0.05});
  CHECK(q2[1] <= q2[3]);
  CHECK(q2[3] <= q2[2]);
  CHECK(q2[2] <= q2[0]);
}

TEST_CASE("incomplete beta matches scipy to 1e-10") {
  CHECK(incomplete_beta(0.5, 0.5, 0.3) ==
        doctest::Approx(0.36901011956554536).epsilon(1e-10));
  CHECK(incomplete_beta(2.0, 3.0, 0.5) == doctest::Approx(0.6875).epsilon(1e-10));
  CHECK(incomplete_beta(5.0, 1.5, 0.9) ==
        doctest::Approx(0.7761721343162159).epsilon(1e-10));
  CHECK(incomplete_beta(0.5, 2.0, 0.001) ==
        doctest::Approx(0.04741835351422484).epsilon(1e-10));
  CHECK(incomplete_beta(10, 10, 0.4) ==
        doctest::Approx(0.18609202141541176).epsilon(1e-10));
  CHECK(incomplete_beta(2.5, 0.5, 0.99) ==
        doctest::Approx(0.8310822789720563).epsilon(1e-10));
  CHECK(incomplete_beta(1, 1, 0.0) == 0.0);
  CHECK(incomplete_beta(1, 1, 1.0) == 1.0);
}

TEST_CASE("student t p-values match scipy") {
  CHECK(student_t_two_sided_p(2.0, 4) ==
        doctest::Approx(0.1161165235168155).epsilon(1e-10));
  CHECK(student_t_two_sided_p(1.0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.5, 9) ==
        doctest::Approx(0.6290712998260264).epsilon(1e-10));
  CHECK(student_t_two_sided_p(3.2, 19) ==
        doctest::Approx(0.0047141890282631875).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.0, 7) == doctest::Approx(1.0));
}
