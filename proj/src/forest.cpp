#include "survbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survbench/rng.hpp"

namespace survbench {

namespace {

/// Accumulates O, E and V terms of the two-group log-rank statistic.
struct LogrankAccumulator {
  Scalar observed = 0;
  Scalar expected = 0;
  Scalar variance = 0;

  void add(Scalar d1, Scalar d, Scalar n1, Scalar n) {
    if (n <= 0) return;
    observed += d1;
    expected += d * n1 / n;
    if (n > 1) {
      variance += d * (n1 / n) * ((n - n1) / n) * (n - d) / (n - 1);
    }
  }

  Scalar statistic() const {
    if (variance <= 0) return 0;
    const Scalar diff = observed - expected;
    return diff * diff / variance;
  }
};

}  // namespace

Scalar logrank_split_statistic(const std::vector<Scalar>& left_times,
                               const std::vector<int>& left_events,
                               const std::vector<Scalar>& right_times,
                               const std::vector<int>& right_events) {
  if (left_times.empty() || right_times.empty()) {
    throw ValidationError("logrank split: both sides must be nonempty");
  }

  struct Row {
    Scalar time;
    int event;
    int group;
  };
  std::vector<Row> rows;
  rows.reserve(left_times.size() + right_times.size());
  for (std::size_t i = 0; i < left_times.size(); ++i) {
    rows.push_back({left_times[i], left_events[i], 0});
  }
  for (std::size_t i = 0; i < right_times.size(); ++i) {
    rows.push_back({right_times[i], right_events[i], 1});
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.time < b.time; });

  LogrankAccumulator acc;
  const std::size_t total = rows.size();
  std::size_t at_risk_left = left_times.size();
  std::size_t i = 0;
  std::size_t at_risk = total;
  while (i < total) {
    std::size_t j = i;
    Scalar d = 0, d1 = 0;
    while (j < total && rows[j].time == rows[i].time) {
      if (rows[j].event) {
        d += 1;
        if (rows[j].group == 0) d1 += 1;
      }
      ++j;
    }
    if (d > 0) {
      acc.add(d1, d, static_cast<Scalar>(at_risk_left), static_cast<Scalar>(at_risk));
    }
    for (std::size_t q = i; q < j; ++q) {
      if (rows[q].group == 0) --at_risk_left;
    }
    at_risk -= j - i;
    i = j;
  }
  return acc.statistic();
}

std::vector<Scalar> nelson_aalen(const std::vector<Scalar>& times,
                                 const std::vector<int>& events,
                                 const std::vector<Scalar>& grid) {
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Hazard increments d/n at distinct event times.
  std::vector<std::pair<Scalar, Scalar>> steps;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    Scalar d = 0;
    while (j < order.size() && times[order[j]] == times[order[i]]) {
      if (events[order[j]]) d += 1;
      ++j;
    }
    if (d > 0) {
      const Scalar at_risk = static_cast<Scalar>(order.size() - i);
      steps.emplace_back(times[order[i]], d / at_risk);
    }
    i = j;
  }

  std::vector<Scalar> out(grid.size(), 0.0);
  Scalar h = 0;
  std::size_t s = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    while (s < steps.size() && steps[s].first <= grid[k]) h += steps[s++].second;
    out[k] = h;
  }
  return out;
}

namespace {

struct NodeContext {
  std::vector<Index> rows;  // positions into the bootstrap sample
  int depth = 0;
  int node_id = 0;
};

struct BestNodeSplit {
  bool found = false;
  int feature = -1;
  Scalar threshold = 0;
  Scalar statistic = 0;
};

/// All-threshold log-rank scan for one node. Rows entering the left side are
/// bucketed by the last node event time they are still at risk for, so each
/// candidate evaluation is one linear pass over the node's event times.
BestNodeSplit scan_node(const std::vector<Index>& rows, const Matrix& X,
                        const std::vector<Scalar>& boot_time,
                        const std::vector<int>& boot_event,
                        const std::vector<int>& features) {
  BestNodeSplit best;
  const std::size_t m = rows.size();

  std::vector<Scalar> etimes;
  for (Index r : rows) {
    if (boot_event[static_cast<std::size_t>(r)]) {
      etimes.push_back(boot_time[static_cast<std::size_t>(r)]);
    }
  }
  std::sort(etimes.begin(), etimes.end());
  etimes.erase(std::unique(etimes.begin(), etimes.end()), etimes.end());
  if (etimes.empty()) return best;
  const std::size_t T = etimes.size();

  std::vector<Scalar> d_total(T, 0), n_total(T, 0);
  std::vector<int> last_le(m), event_idx(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar t = boot_time[static_cast<std::size_t>(rows[i])];
    const auto it = std::upper_bound(etimes.begin(), etimes.end(), t);
    last_le[i] = static_cast<int>(it - etimes.begin()) - 1;
    if (last_le[i] >= 0) n_total[static_cast<std::size_t>(last_le[i])] += 1;
    if (boot_event[static_cast<std::size_t>(rows[i])]) {
      const auto pos = std::lower_bound(etimes.begin(), etimes.end(), t);
      event_idx[i] = static_cast<int>(pos - etimes.begin());
      d_total[static_cast<std::size_t>(event_idx[i])] += 1;
    }
  }
  // n_total[t] counts rows still at risk at etimes[t]: suffix-sum the buckets.
  for (std::size_t t = T - 1; t-- > 0;) n_total[t] += n_total[t + 1];

  std::vector<std::pair<Scalar, std::size_t>> sorted(m);
  std::vector<Scalar> d_left(T), enter(T);
  for (int f : features) {
    for (std::size_t i = 0; i < m; ++i) {
      sorted[i] = {X(rows[i], f), i};
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::fill(d_left.begin(), d_left.end(), 0.0);
    std::fill(enter.begin(), enter.end(), 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const std::size_t local = sorted[i].second;
      if (event_idx[local] >= 0) d_left[static_cast<std::size_t>(event_idx[local])] += 1;
      if (last_le[local] >= 0) enter[static_cast<std::size_t>(last_le[local])] += 1;
      if (sorted[i].first == sorted[i + 1].first) continue;

      LogrankAccumulator acc;
      Scalar n_left = 0;
      for (std::size_t t = T; t-- > 0;) {
        n_left += enter[t];
        if (d_total[t] > 0) acc.add(d_left[t], d_total[t], n_left, n_total[t]);
      }
      const Scalar stat = acc.statistic();
      if (stat > best.statistic) {
        best.found = true;
        best.feature = f;
        best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        best.statistic = stat;
      }
    }
  }
  return best;
}

}  // namespace

RsfModel fit_rsf(const Matrix& X, const Vector& time, const IntVector& event,
                 const RsfHyperparams& hp, std::vector<std::string> feature_names) {
  if (!X.allFinite()) throw ValidationError("rsf: X contains missing values");
  if (X.rows() != time.size()) throw ValidationError("rsf: X row count mismatch");
  const Index n = X.rows();
  const int p = static_cast<int>(X.cols());
  if (event.sum() == 0) throw ValidationError("rsf: no events");
  const int mtry =
      hp.mtry > 0 ? std::min(hp.mtry, p)
                  : static_cast<int>(std::ceil(std::sqrt(static_cast<Scalar>(p))));

  RsfModel model;
  model.n_features = X.cols();
  model.feature_names = std::move(feature_names);
  for (Index i = 0; i < n; ++i) {
    if (event[i]) model.event_time_grid.push_back(time[i]);
  }
  std::sort(model.event_time_grid.begin(), model.event_time_grid.end());
  model.event_time_grid.erase(
      std::unique(model.event_time_grid.begin(), model.event_time_grid.end()),
      model.event_time_grid.end());

  model.trees.resize(static_cast<std::size_t>(hp.n_estimators));
  for (int t = 0; t < hp.n_estimators; ++t) {
    Rng rng(hp.seed + static_cast<std::uint64_t>(t));
    std::vector<Scalar> boot_time(static_cast<std::size_t>(n));
    std::vector<int> boot_event(static_cast<std::size_t>(n));
    std::vector<Index> boot_row(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
      boot_row[static_cast<std::size_t>(i)] = r;
      boot_time[static_cast<std::size_t>(i)] = time[r];
      boot_event[static_cast<std::size_t>(i)] = event[r];
    }

    RsfTree& tree = model.trees[static_cast<std::size_t>(t)];
    std::vector<int> feature_pool(static_cast<std::size_t>(p));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);

    std::vector<NodeContext> stack;
    tree.nodes.emplace_back();
    {
      NodeContext root;
      root.rows.resize(static_cast<std::size_t>(n));
      std::iota(root.rows.begin(), root.rows.end(), Index{0});
      stack.push_back(std::move(root));
    }

    while (!stack.empty()) {
      NodeContext ctx = std::move(stack.back());
      stack.pop_back();

      auto make_leaf = [&]() {
        std::vector<Scalar> leaf_times;
        std::vector<int> leaf_events;
        leaf_times.reserve(ctx.rows.size());
        for (Index r : ctx.rows) {
          leaf_times.push_back(boot_time[static_cast<std::size_t>(r)]);
          leaf_events.push_back(boot_event[static_cast<std::size_t>(r)]);
        }
        tree.nodes[static_cast<std::size_t>(ctx.node_id)].chf =
            nelson_aalen(leaf_times, leaf_events, model.event_time_grid);
      };

      if (ctx.depth >= hp.max_depth ||
          static_cast<int>(ctx.rows.size()) < hp.min_node_size) {
        make_leaf();
        continue;
      }

      // mtry candidate features, sampled without replacement.
      for (int k = 0; k < mtry; ++k) {
        const std::size_t j =
            static_cast<std::size_t>(k) +
            rng.uniform_int(static_cast<std::uint64_t>(p - k));
        std::swap(feature_pool[static_cast<std::size_t>(k)], feature_pool[j]);
      }
      std::vector<int> candidates(feature_pool.begin(), feature_pool.begin() + mtry);
      std::sort(candidates.begin(), candidates.end());

      auto project = [&](Index r, int f) { return X(boot_row[static_cast<std::size_t>(r)], f); };
      BestNodeSplit split;
      {
        // Rows are projected through the bootstrap map before the scan.
        const std::size_t m = ctx.rows.size();
        Matrix node_x(static_cast<Index>(m), static_cast<Index>(candidates.size()));
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t c = 0; c < candidates.size(); ++c) {
            node_x(static_cast<Index>(i), static_cast<Index>(c)) =
                project(ctx.rows[i], candidates[c]);
          }
        }
        std::vector<Index> local(m);
        std::iota(local.begin(), local.end(), Index{0});
        std::vector<Scalar> local_time(m);
        std::vector<int> local_event(m);
        for (std::size_t i = 0; i < m; ++i) {
          local_time[i] = boot_time[static_cast<std::size_t>(ctx.rows[i])];
          local_event[i] = boot_event[static_cast<std::size_t>(ctx.rows[i])];
        }
        std::vector<int> local_features(candidates.size());
        std::iota(local_features.begin(), local_features.end(), 0);
        split = scan_node(local, node_x, local_time, local_event, local_features);
        if (split.found) split.feature = candidates[static_cast<std::size_t>(split.feature)];
      }

      if (!split.found) {
        make_leaf();
        continue;
      }

      NodeContext left, right;
      for (Index r : ctx.rows) {
        if (project(r, split.feature) < split.threshold) {
          left.rows.push_back(r);
        } else {
          right.rows.push_back(r);
        }
      }
      RsfNode& node = tree.nodes[static_cast<std::size_t>(ctx.node_id)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes[static_cast<std::size_t>(ctx.node_id)].right =
          static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();

      left.depth = right.depth = ctx.depth + 1;
      left.node_id = tree.nodes[static_cast<std::size_t>(ctx.node_id)].left;
      right.node_id = tree.nodes[static_cast<std::size_t>(ctx.node_id)].right;
      // Right pushed first so the left child is grown next (stable order).
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
  }
  return model;
}

Vector predict_mortality(const RsfModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) {
    throw ValidationError("rsf predict: feature count mismatch");
  }
  Vector out = Vector::Zero(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    Scalar total = 0;
    for (const RsfTree& tree : model.trees) {
      const std::vector<Scalar>& chf = tree.leaf_chf(X.row(i));
      for (Scalar h : chf) total += h;
    }
    out[i] = total / static_cast<Scalar>(model.trees.size());
  }
  return out;
}

}  // namespace survbench
