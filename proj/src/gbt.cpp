#include "survbench/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "survbench/cox_objective.hpp"

namespace survbench {

int Tree::n_leaves() const {
  int count = 0;
  for (const auto& nd : nodes) {
    if (nd.is_leaf()) ++count;
  }
  return count;
}

namespace {

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  Scalar threshold = 0;
  Scalar gain = 0;
  Scalar g_left = 0, h_left = 0;
};

Scalar leaf_score(Scalar g, Scalar h, Scalar lambda) { return g * g / (h + lambda); }

/// Best split of the given rows; scan order (feature ascending, threshold
/// ascending) plus strict improvement implements the tie-break.
SplitCandidate best_split(const std::vector<Index>& rows, const Vector& grad,
                          const Vector& hess, const Matrix& X, int min_leaf,
                          Scalar lambda, std::vector<std::pair<Scalar, Index>>& scratch) {
  SplitCandidate best;
  const Index m = static_cast<Index>(rows.size());
  if (m < 2 * min_leaf) return best;

  Scalar g_total = 0, h_total = 0;
  for (Index r : rows) {
    g_total += grad[r];
    h_total += hess[r];
  }
  const Scalar base = leaf_score(g_total, h_total, lambda);

  for (int f = 0; f < X.cols(); ++f) {
    scratch.clear();
    for (Index r : rows) scratch.emplace_back(X(r, f), r);
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Scalar g_left = 0, h_left = 0;
    for (Index i = 0; i + 1 < m; ++i) {
      g_left += grad[scratch[static_cast<std::size_t>(i)].second];
      h_left += hess[scratch[static_cast<std::size_t>(i)].second];
      const Scalar v = scratch[static_cast<std::size_t>(i)].first;
      const Scalar next = scratch[static_cast<std::size_t>(i + 1)].first;
      if (v == next) continue;
      if (i + 1 < min_leaf || m - i - 1 < min_leaf) continue;
      const Scalar gain = 0.5 * (leaf_score(g_left, h_left, lambda) +
                                 leaf_score(g_total - g_left, h_total - h_left, lambda) -
                                 base);
      if (gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = 0.5 * (v + next);
        best.gain = gain;
        best.g_left = g_left;
        best.h_left = h_left;
      }
    }
  }
  return best;
}

struct Frontier {
  int node_id;
  std::vector<Index> rows;
  Scalar g_sum, h_sum;
  SplitCandidate split;
  int depth;
};

void split_rows(const Frontier& fr, const Matrix& X, std::vector<Index>* left,
                std::vector<Index>* right) {
  for (Index r : fr.rows) {
    if (X(r, fr.split.feature) < fr.split.threshold) {
      left->push_back(r);
    } else {
      right->push_back(r);
    }
  }
}

}  // namespace

Tree grow_tree(const Vector& grad, const Vector& hess, const Matrix& X,
               const GrowthPolicy& policy, int min_leaf, Scalar lambda_l2) {
  if (grad.size() != hess.size() || grad.size() != X.rows()) {
    throw ValidationError("grow_tree: grad/hess/X sizes disagree");
  }
  std::vector<Index> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<std::pair<Scalar, Index>> scratch;
  scratch.reserve(all.size());

  Tree tree;
  Scalar g0 = grad.sum(), h0 = hess.sum();
  tree.nodes.push_back({-1, 0, -1, -1, -g0 / (h0 + lambda_l2)});

  auto make_children = [&](Frontier& fr, std::deque<Frontier>* out) {
    std::vector<Index> left_rows, right_rows;
    split_rows(fr, X, &left_rows, &right_rows);
    const Scalar gl = fr.split.g_left, hl = fr.split.h_left;
    const Scalar gr = fr.g_sum - gl, hr = fr.h_sum - hl;

    TreeNode& parent = tree.nodes[static_cast<std::size_t>(fr.node_id)];
    parent.feature = fr.split.feature;
    parent.threshold = fr.split.threshold;
    parent.left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0, -1, -1, -gl / (hl + lambda_l2)});
    tree.nodes[static_cast<std::size_t>(fr.node_id)].right =
        static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0, -1, -1, -gr / (hr + lambda_l2)});

    const int left_id = tree.nodes[static_cast<std::size_t>(fr.node_id)].left;
    const int right_id = tree.nodes[static_cast<std::size_t>(fr.node_id)].right;
    out->push_back({left_id, std::move(left_rows), gl, hl, {}, fr.depth + 1});
    out->push_back({right_id, std::move(right_rows), gr, hr, {}, fr.depth + 1});
  };

  if (policy.kind == GrowthPolicy::Kind::LeafWise) {
    if (policy.num_leaves < 2) throw ValidationError("grow_tree: num_leaves must be >= 2");
    std::deque<Frontier> frontier;
    frontier.push_back({0, std::move(all), g0, h0, {}, 0});
    frontier.back().split =
        best_split(frontier.back().rows, grad, hess, X, min_leaf, lambda_l2, scratch);
    int leaves = 1;
    while (leaves < policy.num_leaves) {
      // Highest gain wins; equal gains go to the earliest-created leaf.
      std::size_t pick = frontier.size();
      Scalar best_gain = 0;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        if (frontier[i].split.found && frontier[i].split.gain > best_gain) {
          best_gain = frontier[i].split.gain;
          pick = i;
        }
      }
      if (pick == frontier.size()) break;  // no positive gain anywhere
      Frontier fr = std::move(frontier[pick]);
      frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
      std::deque<Frontier> children;
      make_children(fr, &children);
      for (auto& child : children) {
        child.split = best_split(child.rows, grad, hess, X, min_leaf, lambda_l2, scratch);
        frontier.push_back(std::move(child));
      }
      ++leaves;
    }
  } else {
    if (policy.max_depth < 1) throw ValidationError("grow_tree: max_depth must be >= 1");
    std::deque<Frontier> level;
    level.push_back({0, std::move(all), g0, h0, {}, 0});
    while (!level.empty()) {
      Frontier fr = std::move(level.front());
      level.pop_front();
      if (fr.depth >= policy.max_depth) continue;
      fr.split = best_split(fr.rows, grad, hess, X, min_leaf, lambda_l2, scratch);
      if (!fr.split.found) continue;
      make_children(fr, &level);
    }
  }
  return tree;
}

GbtModel fit_gbt(const Matrix& X, const Vector& time, const IntVector& event,
                 const GbtHyperparams& hp, std::vector<std::string> feature_names) {
  if (!X.allFinite()) throw ValidationError("gbt: X contains missing values");
  if (X.rows() != time.size()) throw ValidationError("gbt: X row count mismatch");
  if (hp.min_leaf > X.rows()) throw ValidationError("gbt: min_leaf exceeds row count");
  if (hp.n_estimators < 1) throw ValidationError("gbt: n_estimators must be >= 1");

  const RiskSetIndex idx = build_risk_index(time, event);

  GbtModel model;
  model.learning_rate = hp.learning_rate;
  model.n_features = X.cols();
  model.feature_names = std::move(feature_names);
  model.trees.reserve(static_cast<std::size_t>(hp.n_estimators));

  Vector eta = Vector::Zero(X.rows());
  for (int round = 0; round < hp.n_estimators; ++round) {
    const ObjectiveOutput obj = grad_hess(idx, eta);
    if (round == 0) model.train_loss.push_back(obj.loss);
    // obj.grad is the gradient of l; boosting descends -l.
    Tree tree = grow_tree(-obj.grad, obj.hess, X, hp.policy, hp.min_leaf, hp.lambda_l2);
    for (Index i = 0; i < X.rows(); ++i) {
      eta[i] += hp.learning_rate * tree.predict_row(X.row(i));
    }
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(-partial_log_likelihood(idx, eta) /
                               static_cast<Scalar>(X.rows()));
  }
  return model;
}

Vector predict(const GbtModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) {
    throw ValidationError("gbt predict: feature count mismatch");
  }
  Vector eta = Vector::Zero(X.rows());
  for (const Tree& tree : model.trees) {
    for (Index i = 0; i < X.rows(); ++i) {
      eta[i] += model.learning_rate * tree.predict_row(X.row(i));
    }
  }
  return eta;
}

}  // namespace survbench
