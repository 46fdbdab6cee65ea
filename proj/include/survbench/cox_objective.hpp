#ifndef SURVBENCH_COX_OBJECTIVE_HPP
#define SURVBENCH_COX_OBJECTIVE_HPP

#include <vector>

#include "survbench/common.hpp"

namespace survbench {

/// Time-sorted view of a survival sample with Breslow tie groups. Built once,
/// immutable afterwards, shared by every partial-likelihood computation.
struct RiskSetIndex {
  struct TieGroup {
    Index begin = 0;  // [begin, end) in sorted positions
    Index end = 0;
    Index n_events = 0;
  };

  std::vector<Index> order;          // original row -> sorted position
  std::vector<Index> inverse_order;  // sorted position -> original row
  std::vector<TieGroup> tie_groups;  // ascending time, strictly increasing across groups
  std::vector<Index> event_rows;     // sorted positions with event = 1, ascending
  std::vector<char> event_sorted;    // event flag per sorted position
  Index n_rows = 0;
  Index n_events = 0;
};

/// Loss is the negative mean partial log-likelihood. grad is the gradient of
/// the (unnormalized) log-likelihood l with respect to eta; hess is the
/// diagonal curvature of -l, which is nonnegative. Both are in original row
/// order.
struct ObjectiveOutput {
  Scalar loss = 0;
  Vector grad;
  Vector hess;
};

RiskSetIndex build_risk_index(const Vector& time, const IntVector& event);

/// Breslow partial log-likelihood l(eta); tied events share the full
/// tie-inclusive risk-set denominator.
Scalar partial_log_likelihood(const RiskSetIndex& idx, const Vector& eta);

/// One reused sort plus two linear sweeps: suffix sums of exp(eta) per event
/// time, then prefix sums of their reciprocals.
ObjectiveOutput grad_hess(const RiskSetIndex& idx, const Vector& eta);

/// Quadratic-time reference: explicit loops over events x risk sets. Test and
/// benchmark oracle only; contract identical to grad_hess.
ObjectiveOutput grad_hess_naive(const RiskSetIndex& idx, const Vector& eta);

}  // namespace survbench

#endif
