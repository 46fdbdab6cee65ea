#include "survbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "survbench/cox_linear.hpp"
#include "survbench/special.hpp"

namespace survbench {

Scalar KmCurve::survival_at(Scalar t) const {
  // last step with time <= t
  const auto it = std::upper_bound(
      steps.begin(), steps.end(), t,
      [](Scalar value, const KmStep& step) { return value < step.time; });
  return it == steps.begin() ? 1.0 : std::prev(it)->survival;
}

Scalar KmCurve::survival_before(Scalar t) const {
  // last step with time < t
  const auto it = std::lower_bound(
      steps.begin(), steps.end(), t,
      [](const KmStep& step, Scalar value) { return step.time < value; });
  return it == steps.begin() ? 1.0 : std::prev(it)->survival;
}

namespace {

void check_metric_input(const Vector& time, const IntVector& event, const Vector& risk) {
  if (time.size() != event.size() || time.size() != risk.size()) {
    throw ValidationError("metrics: time/event/risk lengths differ");
  }
  if (!risk.allFinite()) throw ValidationError("metrics: risks must be finite");
}

/// Point-update prefix-count tree over compressed risk ranks (1-indexed).
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0), total_(0) {}

  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += 1;
    ++total_;
  }

  std::int64_t count_leq(std::size_t rank) const {
    std::int64_t s = 0;
    for (std::size_t i = rank + 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

  std::int64_t count_less(std::size_t rank) const {
    return rank == 0 ? 0 : count_leq(rank - 1);
  }

  std::int64_t total() const { return total_; }

 private:
  std::vector<std::int64_t> tree_;
  std::int64_t total_;
};

std::vector<std::size_t> risk_ranks(const Vector& risk) {
  std::vector<Scalar> sorted(risk.data(), risk.data() + risk.size());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::size_t> ranks(static_cast<std::size_t>(risk.size()));
  for (Index i = 0; i < risk.size(); ++i) {
    ranks[static_cast<std::size_t>(i)] = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), risk[i]) - sorted.begin());
  }
  return ranks;
}

/// Tie groups of sorted-by-time positions, ascending.
struct TimeGroups {
  std::vector<Index> order;                       // sorted position -> row
  std::vector<std::pair<Index, Index>> groups;    // [begin, end) positions
};

TimeGroups group_by_time(const Vector& time) {
  TimeGroups tg;
  tg.order.resize(static_cast<std::size_t>(time.size()));
  std::iota(tg.order.begin(), tg.order.end(), Index{0});
  std::stable_sort(tg.order.begin(), tg.order.end(),
                   [&](Index a, Index b) { return time[a] < time[b]; });
  Index begin = 0;
  for (Index p = 1; p <= time.size(); ++p) {
    if (p == time.size() ||
        time[tg.order[static_cast<std::size_t>(p)]] !=
            time[tg.order[static_cast<std::size_t>(begin)]]) {
      tg.groups.emplace_back(begin, p);
      begin = p;
    }
  }
  return tg;
}

}  // namespace

Scalar harrell_c(const Vector& time, const IntVector& event, const Vector& risk) {
  check_metric_input(time, event, risk);
  const Index n = time.size();
  std::int64_t half_units = 0;  // 2 per concordant pair, 1 per risk tie
  std::int64_t pairs = 0;
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      Index i, j;
      if (time[a] < time[b] && event[a] == 1) {
        i = a;
        j = b;
      } else if (time[b] < time[a] && event[b] == 1) {
        i = b;
        j = a;
      } else if (time[a] == time[b] && event[a] != event[b]) {
        i = event[a] == 1 ? a : b;  // the event is treated as earlier
        j = event[a] == 1 ? b : a;
      } else {
        continue;
      }
      ++pairs;
      if (risk[i] > risk[j]) {
        half_units += 2;
      } else if (risk[i] == risk[j]) {
        half_units += 1;
      }
    }
  }
  if (pairs == 0) throw ValidationError("harrell_c: C undefined, no comparable pairs");
  return static_cast<Scalar>(half_units) / (2.0 * static_cast<Scalar>(pairs));
}

Scalar harrell_c_fast(const Vector& time, const IntVector& event, const Vector& risk) {
  check_metric_input(time, event, risk);
  const std::vector<std::size_t> ranks = risk_ranks(risk);
  const TimeGroups tg = group_by_time(time);

  Fenwick later(ranks.size() == 0 ? 1 : *std::max_element(ranks.begin(), ranks.end()) + 1);
  std::int64_t half_units = 0;
  std::int64_t pairs = 0;

  for (std::size_t g = tg.groups.size(); g-- > 0;) {
    const auto [begin, end] = tg.groups[g];
    // Pairs against every strictly later row.
    for (Index p = begin; p < end; ++p) {
      const Index i = tg.order[static_cast<std::size_t>(p)];
      if (event[i] != 1) continue;
      const std::size_t r = ranks[static_cast<std::size_t>(i)];
      const std::int64_t less = later.count_less(r);
      const std::int64_t equal = later.count_leq(r) - less;
      half_units += 2 * less + equal;
      pairs += later.total();
      // Tied-time pairs against censored rows in the same group.
      for (Index q = begin; q < end; ++q) {
        const Index j = tg.order[static_cast<std::size_t>(q)];
        if (event[j] != 0) continue;
        ++pairs;
        if (risk[i] > risk[j]) {
          half_units += 2;
        } else if (risk[i] == risk[j]) {
          half_units += 1;
        }
      }
    }
    for (Index p = begin; p < end; ++p) {
      later.add(ranks[static_cast<std::size_t>(tg.order[static_cast<std::size_t>(p)])]);
    }
  }
  if (pairs == 0) throw ValidationError("harrell_c: C undefined, no comparable pairs");
  return static_cast<Scalar>(half_units) / (2.0 * static_cast<Scalar>(pairs));
}

Scalar uno_c(const Vector& train_time, const IntVector& train_event,
             const Vector& test_time, const IntVector& test_event,
             const Vector& test_risk, Scalar tau) {
  check_metric_input(test_time, test_event, test_risk);
  if (!(tau > 0)) throw ValidationError("uno_c: tau must be > 0");

  // Censoring survival: Kaplan-Meier on the training split with roles flipped.
  IntVector censor_event = (1 - train_event.array()).matrix();
  const KmCurve g_curve = kaplan_meier(train_time, censor_event);

  const std::vector<std::size_t> ranks = risk_ranks(test_risk);
  const TimeGroups tg = group_by_time(test_time);

  Fenwick later(ranks.size() == 0 ? 1 : *std::max_element(ranks.begin(), ranks.end()) + 1);
  Scalar num = 0, den = 0;

  for (std::size_t g = tg.groups.size(); g-- > 0;) {
    const auto [begin, end] = tg.groups[g];
    for (Index p = begin; p < end; ++p) {
      const Index i = tg.order[static_cast<std::size_t>(p)];
      if (test_event[i] != 1 || !(test_time[i] < tau)) continue;

      std::int64_t n_pairs = later.total();
      std::int64_t less = later.count_less(ranks[static_cast<std::size_t>(i)]);
      std::int64_t equal =
          later.count_leq(ranks[static_cast<std::size_t>(i)]) - less;
      Scalar tie_score = 0;
      for (Index q = begin; q < end; ++q) {
        const Index j = tg.order[static_cast<std::size_t>(q)];
        if (test_event[j] != 0) continue;
        ++n_pairs;
        if (test_risk[i] > test_risk[j]) {
          tie_score += 1.0;
        } else if (test_risk[i] == test_risk[j]) {
          tie_score += 0.5;
        }
      }
      if (n_pairs == 0) continue;

      const Scalar g_before = g_curve.survival_before(test_time[i]);
      if (!(g_before > 0)) {
        throw ValidationError(
            "uno_c: censoring survival reaches 0 before tau; choose a smaller tau");
      }
      const Scalar w = 1.0 / (g_before * g_before);
      num += w * (static_cast<Scalar>(less) + 0.5 * static_cast<Scalar>(equal) + tie_score);
      den += w * static_cast<Scalar>(n_pairs);
    }
    for (Index p = begin; p < end; ++p) {
      later.add(ranks[static_cast<std::size_t>(tg.order[static_cast<std::size_t>(p)])]);
    }
  }
  if (den == 0) throw ValidationError("uno_c: C undefined, no comparable pairs below tau");
  return num / den;
}

KmCurve kaplan_meier(const Vector& time, const IntVector& event) {
  if (time.size() == 0) throw ValidationError("kaplan_meier: empty input");
  if (time.size() != event.size()) {
    throw ValidationError("kaplan_meier: time/event lengths differ");
  }
  const TimeGroups tg = group_by_time(time);
  KmCurve curve;
  Scalar s = 1;
  Index at_risk = time.size();
  for (const auto& [begin, end] : tg.groups) {
    Index d = 0;
    for (Index p = begin; p < end; ++p) {
      if (event[tg.order[static_cast<std::size_t>(p)]] == 1) ++d;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<Scalar>(d) / static_cast<Scalar>(at_risk);
      curve.steps.push_back(
          {time[tg.order[static_cast<std::size_t>(begin)]], s, at_risk, d});
    }
    at_risk -= end - begin;
  }
  return curve;
}

Scalar rmst(const KmCurve& curve, Scalar tau) {
  if (!(tau > 0)) throw ValidationError("rmst: tau must be > 0");
  Scalar area = 0;
  Scalar prev_time = 0;
  Scalar prev_survival = 1;
  for (const KmStep& step : curve.steps) {
    if (step.time >= tau) break;
    area += prev_survival * (step.time - prev_time);
    prev_time = step.time;
    prev_survival = step.survival;
  }
  area += prev_survival * (tau - prev_time);
  return area;
}

LogrankResult logrank_test(const Vector& time_a, const IntVector& event_a,
                           const Vector& time_b, const IntVector& event_b) {
  if (time_a.size() == 0 || time_b.size() == 0) {
    throw ValidationError("logrank_test: both groups must be nonempty");
  }

  struct Row {
    Scalar time;
    int event;
    int group;
  };
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(time_a.size() + time_b.size()));
  for (Index i = 0; i < time_a.size(); ++i) rows.push_back({time_a[i], event_a[i], 0});
  for (Index i = 0; i < time_b.size(); ++i) rows.push_back({time_b[i], event_b[i], 1});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.time < b.time; });

  Scalar observed = 0, expected = 0, variance = 0;
  std::size_t at_risk = rows.size();
  std::size_t at_risk_a = static_cast<std::size_t>(time_a.size());
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    Scalar d = 0, d_a = 0;
    while (j < rows.size() && rows[j].time == rows[i].time) {
      if (rows[j].event) {
        d += 1;
        if (rows[j].group == 0) d_a += 1;
      }
      ++j;
    }
    if (d > 0) {
      const Scalar n = static_cast<Scalar>(at_risk);
      const Scalar n_a = static_cast<Scalar>(at_risk_a);
      observed += d_a;
      expected += d * n_a / n;
      if (at_risk > 1) {
        variance += d * (n_a / n) * ((n - n_a) / n) * (n - d) / (n - 1);
      }
    }
    for (std::size_t q = i; q < j; ++q) {
      if (rows[q].group == 0) --at_risk_a;
    }
    at_risk -= j - i;
    i = j;
  }

  LogrankResult out;
  if (variance <= 0) return out;  // statistic 0, p 1 by convention
  const Scalar diff = observed - expected;
  out.statistic = diff * diff / variance;
  out.p_value = chi_square_upper_tail_1df(out.statistic);
  return out;
}

GroupMetrics top_fraction_metrics(const Vector& time, const IntVector& event,
                                  const Vector& risk, Scalar fraction, Scalar tau) {
  check_metric_input(time, event, risk);
  if (!(fraction > 0) || !(fraction < 1)) {
    throw ValidationError("top_fraction_metrics: fraction must lie in (0,1)");
  }
  const Index n = time.size();
  std::vector<Scalar> sorted(risk.data(), risk.data() + n);
  std::sort(sorted.begin(), sorted.end());
  Index threshold_idx = static_cast<Index>(
      std::floor((1.0 - fraction) * static_cast<Scalar>(n)));
  threshold_idx = std::min(threshold_idx, n - 1);
  const Scalar threshold = sorted[static_cast<std::size_t>(threshold_idx)];

  std::vector<Index> top, rest;
  for (Index i = 0; i < n; ++i) {
    (risk[i] >= threshold ? top : rest).push_back(i);
  }
  if (top.empty() || rest.empty()) {
    throw ValidationError("top_fraction_metrics: top group or rest is empty");
  }

  Index tp = 0, fp = 0, fn = 0, tn = 0;
  for (Index i : top) (event[i] == 1 ? tp : fp)++;
  for (Index i : rest) (event[i] == 1 ? fn : tn)++;

  GroupMetrics out;
  out.fraction = fraction;
  // An absent class makes its rate vacuously perfect (all-event or all-censored
  // samples still need delta RMST and the log-rank comparison).
  out.sensitivity =
      tp + fn == 0 ? 1.0 : static_cast<Scalar>(tp) / static_cast<Scalar>(tp + fn);
  out.specificity =
      tn + fp == 0 ? 1.0 : static_cast<Scalar>(tn) / static_cast<Scalar>(tn + fp);
  out.fpr = 1.0 - out.specificity;
  out.fnr = 1.0 - out.sensitivity;

  // Univariate Cox on the group indicator; minimal ridge as elsewhere.
  Matrix indicator = Matrix::Zero(n, 1);
  for (Index i : top) indicator(i, 0) = 1.0;
  const CoxModel hr_fit = fit_cox_newton(indicator, time, event, 1e-6);
  out.hazard_ratio = std::exp(hr_fit.beta[0]);

  auto subset = [&](const std::vector<Index>& rows, Vector* t, IntVector* e) {
    t->resize(static_cast<Index>(rows.size()));
    e->resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      (*t)[static_cast<Index>(i)] = time[rows[i]];
      (*e)[static_cast<Index>(i)] = event[rows[i]];
    }
  };
  Vector t_top, t_rest;
  IntVector e_top, e_rest;
  subset(top, &t_top, &e_top);
  subset(rest, &t_rest, &e_rest);

  out.delta_rmst = rmst(kaplan_meier(t_top, e_top), tau) -
                   rmst(kaplan_meier(t_rest, e_rest), tau);
  out.logrank_p = logrank_test(t_top, e_top, t_rest, e_rest).p_value;
  return out;
}

TTestResult paired_t_test(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  if (a.size() != b.size()) throw ValidationError("paired_t_test: lengths differ");
  if (a.size() < 2) throw ValidationError("paired_t_test: need at least 2 pairs");
  const std::size_t n = a.size();

  Scalar mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<Scalar>(n);
  Scalar ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const Scalar sd = std::sqrt(ss / static_cast<Scalar>(n - 1));

  TTestResult out;
  if (sd == 0) {
    if (mean == 0) return out;  // t = 0, p = 1
    out.t = mean > 0 ? std::numeric_limits<Scalar>::infinity()
                     : -std::numeric_limits<Scalar>::infinity();
    out.p = 0;
    return out;
  }
  out.t = mean / (sd / std::sqrt(static_cast<Scalar>(n)));
  out.p = student_t_two_sided_p(out.t, static_cast<Scalar>(n - 1));
  return out;
}

std::vector<Scalar> bh_fdr(const std::vector<Scalar>& p_values) {
  const std::size_t m = p_values.size();
  for (Scalar p : p_values) {
    if (!(p >= 0) || p > 1) throw ValidationError("bh_fdr: p-values must lie in [0,1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });

  std::vector<Scalar> q(m);
  Scalar running = 1;
  for (std::size_t r = m; r-- > 0;) {
    const Scalar candidate =
        p_values[order[r]] * static_cast<Scalar>(m) / static_cast<Scalar>(r + 1);
    running = std::min(running, std::min(candidate, Scalar{1}));
    q[order[r]] = running;
  }
  return q;
}

}  // namespace survbench
