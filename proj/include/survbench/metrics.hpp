#ifndef SURVBENCH_METRICS_HPP
#define SURVBENCH_METRICS_HPP

#include <map>
#include <utility>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

struct KmStep {
  Scalar time = 0;
  Scalar survival = 1;
  Index at_risk = 0;
  Index events = 0;
};

/// Kaplan-Meier curve; S(0) = 1 implicitly, one step per distinct event time.
struct KmCurve {
  std::vector<KmStep> steps;

  Scalar survival_at(Scalar t) const;      // S(t), right-continuous
  Scalar survival_before(Scalar t) const;  // S(t-), left limit
};

struct GroupMetrics {
  Scalar sensitivity = 0;
  Scalar specificity = 0;
  Scalar fpr = 0;
  Scalar fnr = 0;
  Scalar hazard_ratio = 1;
  Scalar delta_rmst = 0;
  Scalar logrank_p = 1;
  Scalar fraction = 0;
};

struct MetricReport {
  Scalar harrell_c = 0;
  Scalar uno_c = 0;
  Scalar delta_c = 0;
  std::map<Scalar, GroupMetrics> group;  // keyed by fraction
  Scalar fit_time_seconds = 0;
};

/// Harrell's concordance, pairwise O(n^2) reference path. Pairs with tied
/// times are comparable only when exactly one of them is an event.
Scalar harrell_c(const Vector& time, const IntVector& event, const Vector& risk);

/// Order-statistic sweep with a Fenwick tree; counts the same integer
/// half-units as harrell_c, so the two agree exactly.
Scalar harrell_c_fast(const Vector& time, const IntVector& event, const Vector& risk);

/// Uno's IPCW concordance truncated at tau. The censoring survival G comes
/// from the training split with the event roles flipped; every pair with
/// event time t_i < tau weighs G(t_i-)^-2.
Scalar uno_c(const Vector& train_time, const IntVector& train_event,
             const Vector& test_time, const IntVector& test_event,
             const Vector& test_risk, Scalar tau);

KmCurve kaplan_meier(const Vector& time, const IntVector& event);

/// Restricted mean survival time: exact step integral of S up to tau,
/// carried flat beyond the last step.
Scalar rmst(const KmCurve& curve, Scalar tau);

struct LogrankResult {
  Scalar statistic = 0;
  Scalar p_value = 1;
};

LogrankResult logrank_test(const Vector& time_a, const IntVector& event_a,
                           const Vector& time_b, const IntVector& event_b);

/// Top-risk-group discrimination: the group is everything at or above the
/// (1 - fraction) empirical quantile (lower interpolation, threshold ties
/// included). Positives are rows with an observed event at any follow-up
/// time; censored rows count as negatives.
GroupMetrics top_fraction_metrics(const Vector& time, const IntVector& event,
                                  const Vector& risk, Scalar fraction, Scalar tau);

inline Scalar delta_c(Scalar c_train, Scalar c_test) { return c_train - c_test; }

struct TTestResult {
  Scalar t = 0;
  Scalar p = 1;
};

TTestResult paired_t_test(const std::vector<Scalar>& a, const std::vector<Scalar>& b);

/// Benjamini-Hochberg adjusted q-values, input order preserved.
std::vector<Scalar> bh_fdr(const std::vector<Scalar>& p_values);

}  // namespace survbench

#endif
