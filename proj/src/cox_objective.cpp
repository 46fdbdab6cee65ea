#include "survbench/cox_objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace survbench {

namespace {

constexpr Scalar kEps = 1e-12;   // near-zero constant guarding divisions
constexpr Scalar kClip = 30.0;   // clip for centered scores before exp

void check_eta(const RiskSetIndex& idx, const Vector& eta) {
  if (eta.size() != idx.n_rows) {
    throw ValidationError("cox objective: eta length does not match the index");
  }
  if (!eta.allFinite()) {
    throw ValidationError("cox objective: eta contains non-finite values");
  }
}

/// exp of the max-centered, clipped score per sorted position. Centering by
/// the max keeps the loss exactly shift-invariant; only the lower clip can
/// ever bite.
Vector sorted_weights(const RiskSetIndex& idx, const Vector& eta, Scalar* max_eta) {
  const Scalar m = eta.maxCoeff();
  *max_eta = m;
  Vector w(idx.n_rows);
  for (Index p = 0; p < idx.n_rows; ++p) {
    const Scalar centered = eta[idx.inverse_order[static_cast<std::size_t>(p)]] - m;
    w[p] = std::exp(std::max(centered, -kClip));
  }
  return w;
}

}  // namespace

RiskSetIndex build_risk_index(const Vector& time, const IntVector& event) {
  const Index n = time.size();
  if (n == 0) throw ValidationError("risk index: empty input");
  if (event.size() != n) throw ValidationError("risk index: time/event sizes differ");
  for (Index i = 0; i < n; ++i) {
    if (!(time[i] > 0)) throw ValidationError("risk index: time must be > 0");
    if (event[i] != 0 && event[i] != 1) {
      throw ValidationError("risk index: event must be 0 or 1");
    }
  }

  RiskSetIndex idx;
  idx.n_rows = n;
  idx.inverse_order.resize(static_cast<std::size_t>(n));
  std::iota(idx.inverse_order.begin(), idx.inverse_order.end(), Index{0});
  std::stable_sort(idx.inverse_order.begin(), idx.inverse_order.end(),
                   [&](Index a, Index b) { return time[a] < time[b]; });

  idx.order.resize(static_cast<std::size_t>(n));
  idx.event_sorted.resize(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) {
    const Index row = idx.inverse_order[static_cast<std::size_t>(p)];
    idx.order[static_cast<std::size_t>(row)] = p;
    idx.event_sorted[static_cast<std::size_t>(p)] = static_cast<char>(event[row]);
    if (event[row] == 1) idx.event_rows.push_back(p);
  }
  idx.n_events = static_cast<Index>(idx.event_rows.size());
  if (idx.n_events == 0) {
    throw ValidationError("risk index: no events: partial likelihood undefined");
  }

  Index begin = 0;
  for (Index p = 1; p <= n; ++p) {
    const bool boundary =
        p == n || time[idx.inverse_order[static_cast<std::size_t>(p)]] !=
                      time[idx.inverse_order[static_cast<std::size_t>(begin)]];
    if (!boundary) continue;
    RiskSetIndex::TieGroup g;
    g.begin = begin;
    g.end = p;
    g.n_events = 0;
    for (Index q = begin; q < p; ++q) {
      g.n_events += idx.event_sorted[static_cast<std::size_t>(q)];
    }
    idx.tie_groups.push_back(g);
    begin = p;
  }
  return idx;
}

Scalar partial_log_likelihood(const RiskSetIndex& idx, const Vector& eta) {
  check_eta(idx, eta);
  Scalar max_eta = 0;
  const Vector w = sorted_weights(idx, eta, &max_eta);

  // Suffix sums per tie group, accumulated from the latest time backwards.
  std::vector<Scalar> group_suffix(idx.tie_groups.size());
  Scalar suffix = 0;
  for (std::size_t g = idx.tie_groups.size(); g-- > 0;) {
    const auto& grp = idx.tie_groups[g];
    for (Index p = grp.end; p-- > grp.begin;) suffix += w[p];
    group_suffix[g] = suffix;
  }

  Scalar ll = 0;
  for (std::size_t g = 0; g < idx.tie_groups.size(); ++g) {
    const auto& grp = idx.tie_groups[g];
    if (grp.n_events == 0) continue;
    for (Index p = grp.begin; p < grp.end; ++p) {
      if (!idx.event_sorted[static_cast<std::size_t>(p)]) continue;
      ll += eta[idx.inverse_order[static_cast<std::size_t>(p)]] - max_eta;
    }
    ll -= static_cast<Scalar>(grp.n_events) * std::log(group_suffix[g]);
  }
  return ll;
}

ObjectiveOutput grad_hess(const RiskSetIndex& idx, const Vector& eta) {
  check_eta(idx, eta);
  Scalar max_eta = 0;
  const Vector w = sorted_weights(idx, eta, &max_eta);

  std::vector<Scalar> group_suffix(idx.tie_groups.size());
  Scalar suffix = 0;
  for (std::size_t g = idx.tie_groups.size(); g-- > 0;) {
    const auto& grp = idx.tie_groups[g];
    for (Index p = grp.end; p-- > grp.begin;) suffix += w[p];
    group_suffix[g] = suffix;
  }

  ObjectiveOutput out;
  out.grad.resize(idx.n_rows);
  out.hess.resize(idx.n_rows);
  Scalar loss = 0;

  // Ascending sweep: a = sum of d_g / (S_g + eps), b = sum of d_g / (S_g + eps)^2
  // over event groups at or before the current time; each row's own tie group
  // is included.
  Scalar a = 0, b = 0;
  for (std::size_t g = 0; g < idx.tie_groups.size(); ++g) {
    const auto& grp = idx.tie_groups[g];
    if (grp.n_events > 0) {
      const Scalar inv = 1.0 / (group_suffix[g] + kEps);
      a += static_cast<Scalar>(grp.n_events) * inv;
      b += static_cast<Scalar>(grp.n_events) * inv * inv;
      loss -= static_cast<Scalar>(grp.n_events) * std::log(group_suffix[g]);
    }
    for (Index p = grp.begin; p < grp.end; ++p) {
      const Index row = idx.inverse_order[static_cast<std::size_t>(p)];
      const Scalar delta = idx.event_sorted[static_cast<std::size_t>(p)] ? 1.0 : 0.0;
      if (delta > 0) loss += eta[row] - max_eta;
      out.grad[row] = delta - w[p] * a;
      out.hess[row] = w[p] * a - w[p] * w[p] * b;
    }
  }
  out.loss = -loss / static_cast<Scalar>(idx.n_rows);
  return out;
}

ObjectiveOutput grad_hess_naive(const RiskSetIndex& idx, const Vector& eta) {
  check_eta(idx, eta);
  Scalar max_eta = 0;
  const Vector w = sorted_weights(idx, eta, &max_eta);

  std::vector<Scalar> grad_sorted(static_cast<std::size_t>(idx.n_rows), 0.0);
  std::vector<Scalar> hess_sorted(static_cast<std::size_t>(idx.n_rows), 0.0);

  for (std::size_t g = 0; g < idx.tie_groups.size(); ++g) {
    const auto& grp = idx.tie_groups[g];
    for (Index e = grp.begin; e < grp.end; ++e) {
      if (!idx.event_sorted[static_cast<std::size_t>(e)]) continue;
      // Risk set of this event: all sorted positions from the start of its
      // tie group onward. Summed from the end so the accumulation order
      // matches the fast path's suffix sweep.
      Scalar s = 0;
      for (Index p = idx.n_rows; p-- > grp.begin;) s += w[p];
      const Scalar inv = 1.0 / (s + kEps);
      for (Index p = grp.begin; p < idx.n_rows; ++p) {
        grad_sorted[static_cast<std::size_t>(p)] -= w[p] * inv;
        hess_sorted[static_cast<std::size_t>(p)] += w[p] * inv - w[p] * w[p] * inv * inv;
      }
    }
  }

  ObjectiveOutput out;
  out.grad.resize(idx.n_rows);
  out.hess.resize(idx.n_rows);
  for (Index p = 0; p < idx.n_rows; ++p) {
    const Index row = idx.inverse_order[static_cast<std::size_t>(p)];
    const Scalar delta = idx.event_sorted[static_cast<std::size_t>(p)] ? 1.0 : 0.0;
    out.grad[row] = delta + grad_sorted[static_cast<std::size_t>(p)];
    out.hess[row] = hess_sorted[static_cast<std::size_t>(p)];
  }
  out.loss = -partial_log_likelihood(idx, eta) / static_cast<Scalar>(idx.n_rows);
  return out;
}

}  // namespace survbench
