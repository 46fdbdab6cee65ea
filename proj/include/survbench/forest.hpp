#ifndef SURVBENCH_FOREST_HPP
#define SURVBENCH_FOREST_HPP

#include <string>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

struct RsfHyperparams {
  int n_estimators = 100;
  int max_depth = 7;      // 0 grows a root-only tree
  int min_node_size = 20; // nodes smaller than this are not split
  int mtry = 0;           // 0 means ceil(sqrt(p))
  std::uint64_t seed = 0;
};

struct RsfNode {
  int feature = -1;  // -1 marks a leaf
  Scalar threshold = 0;
  int left = -1;
  int right = -1;
  std::vector<Scalar> chf;  // leaf only: Nelson-Aalen over the event-time grid
};

struct RsfTree {
  std::vector<RsfNode> nodes;

  template <typename Row>
  const std::vector<Scalar>& leaf_chf(const Row& x) const {
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
      const RsfNode& nd = nodes[static_cast<std::size_t>(id)];
      id = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(id)].chf;
  }
};

struct RsfModel {
  std::vector<RsfTree> trees;
  std::vector<Scalar> event_time_grid;  // sorted unique training event times
  Index n_features = 0;
  std::vector<std::string> feature_names;
};

/// Squared standardized two-group log-rank statistic (O-E)^2 / V with the
/// hypergeometric variance per pooled event time; 0 when the variance is 0.
Scalar logrank_split_statistic(const std::vector<Scalar>& left_times,
                               const std::vector<int>& left_events,
                               const std::vector<Scalar>& right_times,
                               const std::vector<int>& right_events);

/// Nelson-Aalen cumulative hazard evaluated at the given grid times.
std::vector<Scalar> nelson_aalen(const std::vector<Scalar>& times,
                                 const std::vector<int>& events,
                                 const std::vector<Scalar>& grid);

/// Bootstrap per tree, mtry features per node, exhaustive midpoint thresholds
/// scored by the log-rank statistic (Ishwaran-style growth). Per-tree seeds
/// are seed + tree index.
RsfModel fit_rsf(const Matrix& X, const Vector& time, const IntVector& event,
                 const RsfHyperparams& hp, std::vector<std::string> feature_names = {});

/// Ensemble mortality: mean leaf CHF across trees, summed over the grid.
Vector predict_mortality(const RsfModel& model, const Matrix& X);

}  // namespace survbench

#endif
