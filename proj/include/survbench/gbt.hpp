#ifndef SURVBENCH_GBT_HPP
#define SURVBENCH_GBT_HPP

#include <string>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

/// Leaf-wise growth splits the best frontier leaf until the leaf budget is
/// spent; depth-wise splits every eligible node level by level.
struct GrowthPolicy {
  enum class Kind { LeafWise, DepthWise };
  Kind kind = Kind::DepthWise;
  int num_leaves = 31;  // leaf-wise budget
  int max_depth = 3;    // depth-wise cap

  static GrowthPolicy leaf_wise(int num_leaves) {
    return {Kind::LeafWise, num_leaves, 0};
  }
  static GrowthPolicy depth_wise(int max_depth) {
    return {Kind::DepthWise, 0, max_depth};
  }
};

struct GbtHyperparams {
  int n_estimators = 100;
  GrowthPolicy policy;
  Scalar learning_rate = 0.1;
  int min_leaf = 10;
  Scalar lambda_l2 = 1.0;  // L2 on leaf values
  std::uint64_t seed = 0;  // growth is exact and deterministic; kept for the record
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  Scalar threshold = 0;
  int left = -1;
  int right = -1;
  Scalar value = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int n_leaves() const;

  template <typename Row>
  Scalar predict_row(const Row& x) const {
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(id)];
      id = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
  }
};

struct GbtModel {
  std::vector<Tree> trees;
  Scalar learning_rate = 0.1;
  Index n_features = 0;
  std::vector<std::string> feature_names;
  std::vector<Scalar> train_loss;  // -l/n before boosting and after each round
};

/// Exact greedy second-order tree: gain
/// 0.5 * (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)),
/// leaf value -G/(H+lambda), min_leaf enforced on both sides. Ties broken by
/// lowest feature index, then lowest threshold.
Tree grow_tree(const Vector& grad, const Vector& hess, const Matrix& X,
               const GrowthPolicy& policy, int min_leaf, Scalar lambda_l2);

/// Boosting on the Cox objective: the risk-set sort is computed once and
/// reused every round.
GbtModel fit_gbt(const Matrix& X, const Vector& time, const IntVector& event,
                 const GbtHyperparams& hp,
                 std::vector<std::string> feature_names = {});

Vector predict(const GbtModel& model, const Matrix& X);

}  // namespace survbench

#endif
