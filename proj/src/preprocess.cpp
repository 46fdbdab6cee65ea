#include "survbench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace survbench {

namespace {

constexpr int kImputerMaxDepth = 8;
constexpr int kImputerMinLeaf = 10;

Scalar observed_median(const std::vector<Scalar>& values) {
  std::vector<Scalar> v = values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Exact greedy SSE regression tree, depth- and leaf-size-limited.
ImputerTree fit_regression_tree(const Matrix& predictors, const Vector& target,
                                bool boolean_target) {
  ImputerTree tree;
  const Index n = target.size();

  struct NodeJob {
    std::vector<Index> rows;
    int node_id;
    int depth;
  };

  auto leaf_value = [&](const std::vector<Index>& rows) {
    Scalar sum = 0;
    for (Index r : rows) sum += target[r];
    const Scalar mean = rows.empty() ? 0 : sum / static_cast<Scalar>(rows.size());
    if (boolean_target) return mean > 0.5 ? 1.0 : 0.0;  // majority vote
    return mean;
  };

  tree.nodes.emplace_back();
  std::vector<NodeJob> stack;
  {
    NodeJob root;
    root.rows.resize(static_cast<std::size_t>(n));
    std::iota(root.rows.begin(), root.rows.end(), Index{0});
    root.node_id = 0;
    root.depth = 0;
    stack.push_back(std::move(root));
  }

  std::vector<std::pair<Scalar, Index>> scratch;
  while (!stack.empty()) {
    NodeJob job = std::move(stack.back());
    stack.pop_back();
    const Index m = static_cast<Index>(job.rows.size());

    bool split_found = false;
    int best_feature = -1;
    Scalar best_threshold = 0, best_gain = 1e-12;
    if (job.depth < kImputerMaxDepth && m >= 2 * kImputerMinLeaf) {
      Scalar sum = 0, sum_sq = 0;
      for (Index r : job.rows) {
        sum += target[r];
        sum_sq += target[r] * target[r];
      }
      const Scalar sse_parent = sum_sq - sum * sum / static_cast<Scalar>(m);

      for (Index f = 0; f < predictors.cols(); ++f) {
        scratch.clear();
        for (Index r : job.rows) scratch.emplace_back(predictors(r, f), r);
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        Scalar left_sum = 0, left_sq = 0;
        for (Index i = 0; i + 1 < m; ++i) {
          const Scalar y = target[scratch[static_cast<std::size_t>(i)].second];
          left_sum += y;
          left_sq += y * y;
          const Scalar v = scratch[static_cast<std::size_t>(i)].first;
          const Scalar next = scratch[static_cast<std::size_t>(i + 1)].first;
          if (v == next) continue;
          if (i + 1 < kImputerMinLeaf || m - i - 1 < kImputerMinLeaf) continue;
          const Scalar nl = static_cast<Scalar>(i + 1);
          const Scalar nr = static_cast<Scalar>(m - i - 1);
          const Scalar right_sum = sum - left_sum;
          const Scalar right_sq = sum_sq - left_sq;
          const Scalar sse = (left_sq - left_sum * left_sum / nl) +
                             (right_sq - right_sum * right_sum / nr);
          const Scalar gain = sse_parent - sse;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = 0.5 * (v + next);
            split_found = true;
          }
        }
      }
    }

    if (!split_found) {
      tree.nodes[static_cast<std::size_t>(job.node_id)].value = leaf_value(job.rows);
      continue;
    }

    NodeJob left, right;
    for (Index r : job.rows) {
      (predictors(r, best_feature) < best_threshold ? left.rows : right.rows)
          .push_back(r);
    }
    ImputerTree::Node& node = tree.nodes[static_cast<std::size_t>(job.node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(job.node_id)].right =
        static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    left.node_id = tree.nodes[static_cast<std::size_t>(job.node_id)].left;
    right.node_id = tree.nodes[static_cast<std::size_t>(job.node_id)].right;
    left.depth = right.depth = job.depth + 1;
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
  return tree;
}

ImputerTree root_only_tree(Scalar value) {
  ImputerTree tree;
  tree.nodes.emplace_back();
  tree.nodes[0].value = value;
  return tree;
}

/// Predictor row for the imputer tree of column `target`: all other pipeline
/// columns in order.
Vector predictor_row(const Matrix& data, Index row, Index target) {
  Vector out(data.cols() - 1);
  Index k = 0;
  for (Index j = 0; j < data.cols(); ++j) {
    if (j != target) out[k++] = data(row, j);
  }
  return out;
}

Matrix predictor_matrix(const Matrix& data, Index target) {
  Matrix out(data.rows(), data.cols() - 1);
  Index k = 0;
  for (Index j = 0; j < data.cols(); ++j) {
    if (j != target) out.col(k++) = data.col(j);
  }
  return out;
}

/// Replays the stored trees: init fill, then `sweeps` passes in visit order.
/// Only originally-missing cells are ever written.
void run_imputation(const ImputerModel& imputer, const std::vector<Index>& col_of,
                    Matrix* data) {
  const Index n = data->rows();
  std::vector<std::vector<Index>> missing_rows(imputer.columns.size());
  for (std::size_t c = 0; c < imputer.columns.size(); ++c) {
    const Index j = col_of[c];
    for (Index i = 0; i < n; ++i) {
      if (is_missing((*data)(i, j))) missing_rows[c].push_back(i);
    }
    for (Index i : missing_rows[c]) (*data)(i, j) = imputer.columns[c].init_fill;
  }
  for (int sweep = 0; sweep < imputer.sweeps; ++sweep) {
    for (std::size_t c = 0; c < imputer.columns.size(); ++c) {
      const Index j = col_of[c];
      for (Index i : missing_rows[c]) {
        (*data)(i, j) = imputer.columns[c].tree.predict(predictor_row(*data, i, j));
      }
    }
  }
}

std::string format_level(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Scalar sample_sd(const Vector& v) {
  const Index n = v.size();
  if (n < 2) return 0;
  const Scalar mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<Scalar>(n - 1));
}

}  // namespace

Scalar ImputerTree::predict(const Vector& predictor_row) const {
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const Node& nd = nodes[static_cast<std::size_t>(id)];
    id = predictor_row[nd.feature] < nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(id)].value;
}

std::pair<PreprocessPlan, PreprocessReport> fit_preprocessor(
    const SurvivalDataset& train, std::uint64_t seed,
    const PreprocessOptions& options) {
  if (train.n_rows() == 0) throw ValidationError("fit_preprocessor: empty training fold");
  PreprocessPlan plan;
  PreprocessReport report;
  plan.thresholds = options.thresholds;
  const Index n = train.n_rows();

  // (1) Columns with too much missingness.
  std::vector<Index> pipeline_idx;
  for (Index j = 0; j < train.n_cols(); ++j) {
    Index miss = 0;
    for (Index i = 0; i < n; ++i) {
      if (is_missing(train.features(i, j))) ++miss;
    }
    const Scalar frac = static_cast<Scalar>(miss) / static_cast<Scalar>(n);
    if (frac > plan.thresholds.miss_col) {
      report.dropped_columns_missingness.push_back(
          train.column_names[static_cast<std::size_t>(j)]);
    } else {
      pipeline_idx.push_back(j);
      plan.pipeline_columns.push_back(train.column_names[static_cast<std::size_t>(j)]);
      plan.pipeline_kinds.push_back(train.column_kinds[static_cast<std::size_t>(j)]);
    }
  }
  if (pipeline_idx.empty()) throw ValidationError("fit_preprocessor: empty predictor matrix");
  const Index p = static_cast<Index>(pipeline_idx.size());

  // (2) Training rows with too much missingness across the retained columns.
  std::vector<Index> kept_rows;
  for (Index i = 0; i < n; ++i) {
    Index miss = 0;
    for (Index j : pipeline_idx) {
      if (is_missing(train.features(i, j))) ++miss;
    }
    if (static_cast<Scalar>(miss) / static_cast<Scalar>(p) > plan.thresholds.miss_row) {
      report.dropped_rows_missingness.push_back(i);
    } else {
      kept_rows.push_back(i);
    }
  }
  if (kept_rows.empty()) throw ValidationError("fit_preprocessor: all training rows dropped");

  Matrix work(static_cast<Index>(kept_rows.size()), p);
  for (std::size_t i = 0; i < kept_rows.size(); ++i) {
    for (Index c = 0; c < p; ++c) {
      work(static_cast<Index>(i), c) = train.features(kept_rows[i], pipeline_idx[static_cast<std::size_t>(c)]);
    }
  }
  const Index m = work.rows();

  // Biochemical designation applies to retained continuous columns only.
  for (const std::string& name : options.biochemical_columns) {
    for (Index c = 0; c < p; ++c) {
      if (plan.pipeline_columns[static_cast<std::size_t>(c)] == name &&
          plan.pipeline_kinds[static_cast<std::size_t>(c)] == ColumnKind::Continuous) {
        plan.biochemical.push_back(name);
      }
    }
  }

  // (3)+(4) Zero replacement values (1/10 of the observed median, zeros
  // included), applied before the imputer is fit so fit matches apply.
  for (const std::string& name : plan.biochemical) {
    Index c = 0;
    while (plan.pipeline_columns[static_cast<std::size_t>(c)] != name) ++c;
    std::vector<Scalar> observed;
    for (Index i = 0; i < m; ++i) {
      if (!is_missing(work(i, c))) observed.push_back(work(i, c));
    }
    const Scalar repl = observed_median(observed) / 10.0;
    plan.zero_replacement[name] = repl;
    for (Index i = 0; i < m; ++i) {
      if (!is_missing(work(i, c)) && work(i, c) == 0.0) work(i, c) = repl;
    }
  }

  // Chained-equations imputer: columns in ascending missingness order,
  // three sweeps of fit-and-fill; the final sweep's trees are kept.
  plan.imputer.seed = seed;
  plan.imputer.column_order = plan.pipeline_columns;
  std::vector<std::vector<Index>> missing_rows(static_cast<std::size_t>(p));
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  {
    std::vector<Index> miss_count(static_cast<std::size_t>(p), 0);
    for (Index c = 0; c < p; ++c) {
      for (Index i = 0; i < m; ++i) {
        if (is_missing(work(i, c))) {
          ++miss_count[static_cast<std::size_t>(c)];
          missing_rows[static_cast<std::size_t>(c)].push_back(i);
        }
      }
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return miss_count[static_cast<std::size_t>(a)] < miss_count[static_cast<std::size_t>(b)];
    });
  }

  for (Index c : order) {
    ImputerColumn col;
    col.name = plan.pipeline_columns[static_cast<std::size_t>(c)];
    col.boolean = plan.pipeline_kinds[static_cast<std::size_t>(c)] == ColumnKind::Boolean;
    Scalar sum = 0, count = 0;
    for (Index i = 0; i < m; ++i) {
      if (!is_missing(work(i, c))) {
        sum += work(i, c);
        count += 1;
      }
    }
    const Scalar mean = count > 0 ? sum / count : 0;
    col.init_fill = col.boolean ? (mean > 0.5 ? 1.0 : 0.0) : mean;
    plan.imputer.columns.push_back(std::move(col));
  }

  Matrix filled = work;
  for (std::size_t c = 0; c < plan.imputer.columns.size(); ++c) {
    const Index j = order[static_cast<std::size_t>(c)];
    for (Index i : missing_rows[static_cast<std::size_t>(j)]) {
      filled(i, j) = plan.imputer.columns[c].init_fill;
    }
  }
  for (int sweep = 0; sweep < plan.imputer.sweeps; ++sweep) {
    for (std::size_t c = 0; c < plan.imputer.columns.size(); ++c) {
      const Index j = order[c];
      ImputerColumn& col = plan.imputer.columns[c];
      if (missing_rows[static_cast<std::size_t>(j)].empty()) {
        // Nothing to fill on train: a mean/majority leaf covers apply-time
        // missingness in this column.
        if (sweep == plan.imputer.sweeps - 1) col.tree = root_only_tree(col.init_fill);
        continue;
      }
      std::vector<Index> observed;
      for (Index i = 0; i < m; ++i) {
        if (!is_missing(work(i, j))) observed.push_back(i);
      }
      const Matrix preds = predictor_matrix(filled, j);
      Matrix obs_preds(static_cast<Index>(observed.size()), preds.cols());
      Vector obs_target(static_cast<Index>(observed.size()));
      for (std::size_t i = 0; i < observed.size(); ++i) {
        obs_preds.row(static_cast<Index>(i)) = preds.row(observed[i]);
        obs_target[static_cast<Index>(i)] = work(observed[i], j);
      }
      col.tree = fit_regression_tree(obs_preds, obs_target, col.boolean);
      for (Index i : missing_rows[static_cast<std::size_t>(j)]) {
        filled(i, j) = col.tree.predict(predictor_row(filled, i, j));
      }
    }
  }

  // Re-run the stored pipeline so the statistics below match apply() exactly.
  {
    Matrix replay = work;
    std::vector<Index> col_of(plan.imputer.columns.size());
    for (std::size_t c = 0; c < plan.imputer.columns.size(); ++c) col_of[c] = order[c];
    run_imputation(plan.imputer, col_of, &replay);
    filled = std::move(replay);
  }

  // (5) Scaling transforms for continuous columns; ln only when the training
  // column is strictly positive after zero replacement and imputation.
  std::vector<char> variance_dropped(static_cast<std::size_t>(p), 0);
  Matrix scaled = filled;
  for (Index c = 0; c < p; ++c) {
    if (plan.pipeline_kinds[static_cast<std::size_t>(c)] == ColumnKind::Boolean) continue;
    const bool positive = filled.col(c).minCoeff() > 0;
    Vector values = filled.col(c);
    if (positive) values = values.array().log().matrix();
    const Scalar mean = values.mean();
    const Scalar sd = sample_sd(values);
    // Constant up to rounding noise: scaling would only amplify that noise.
    if (!(sd > 1e-12 * std::max(Scalar{1}, std::abs(mean)))) {
      variance_dropped[static_cast<std::size_t>(c)] = 1;
      continue;
    }
    ColumnTransform tr;
    tr.kind = positive ? TransformKind::LogCenter : TransformKind::Center;
    tr.mean = mean;
    tr.sd = sd;
    plan.transforms[plan.pipeline_columns[static_cast<std::size_t>(c)]] = tr;
    scaled.col(c) = ((values.array() - mean) / sd).matrix();
  }

  // (7) Variance filter on the scaled matrix.
  std::vector<Index> survivors;
  for (Index c = 0; c < p; ++c) {
    Scalar variance;
    if (plan.pipeline_kinds[static_cast<std::size_t>(c)] == ColumnKind::Boolean) {
      const Scalar sd = sample_sd(scaled.col(c));
      variance = sd * sd;
    } else {
      variance = variance_dropped[static_cast<std::size_t>(c)] ? 0.0 : 1.0;
    }
    if (variance < plan.thresholds.var_min) {
      report.dropped_columns_variance.push_back(
          plan.pipeline_columns[static_cast<std::size_t>(c)]);
    } else {
      survivors.push_back(c);
    }
  }

  // (8) Correlation filter, lexicographic pair order, lower index kept.
  std::vector<char> alive(static_cast<std::size_t>(p), 0);
  for (Index c : survivors) alive[static_cast<std::size_t>(c)] = 1;
  for (std::size_t a = 0; a < survivors.size(); ++a) {
    const Index ca = survivors[a];
    if (!alive[static_cast<std::size_t>(ca)]) continue;
    for (std::size_t b = a + 1; b < survivors.size(); ++b) {
      const Index cb = survivors[b];
      if (!alive[static_cast<std::size_t>(cb)]) continue;
      const Vector& x = scaled.col(ca);
      const Vector& y = scaled.col(cb);
      const Scalar mx = x.mean(), my = y.mean();
      const Scalar sx = sample_sd(x), sy = sample_sd(y);
      if (!(sx > 0) || !(sy > 0)) continue;
      const Scalar cov =
          ((x.array() - mx) * (y.array() - my)).sum() / static_cast<Scalar>(m - 1);
      if (std::abs(cov / (sx * sy)) > plan.thresholds.corr_max) {
        alive[static_cast<std::size_t>(cb)] = 0;
        report.dropped_columns_correlation.push_back(
            plan.pipeline_columns[static_cast<std::size_t>(cb)]);
      }
    }
  }

  for (Index c = 0; c < p; ++c) {
    if (alive[static_cast<std::size_t>(c)]) {
      plan.kept_columns.push_back(plan.pipeline_columns[static_cast<std::size_t>(c)]);
    }
  }
  if (plan.kept_columns.empty()) {
    throw ValidationError("fit_preprocessor: empty predictor matrix");
  }
  return {std::move(plan), std::move(report)};
}

std::pair<SurvivalDataset, PreprocessReport> apply_preprocessor(
    const PreprocessPlan& plan, const SurvivalDataset& ds) {
  PreprocessReport report;
  const Index p = static_cast<Index>(plan.pipeline_columns.size());
  std::vector<Index> src(static_cast<std::size_t>(p));
  for (Index c = 0; c < p; ++c) {
    const Index j = ds.column_index(plan.pipeline_columns[static_cast<std::size_t>(c)]);
    if (j < 0) {
      throw ValidationError("apply_preprocessor: dataset lacks column '" +
                            plan.pipeline_columns[static_cast<std::size_t>(c)] + "'");
    }
    src[static_cast<std::size_t>(c)] = j;
  }

  const Index n = ds.n_rows();
  Matrix data(n, p);
  for (Index c = 0; c < p; ++c) data.col(c) = ds.features.col(src[static_cast<std::size_t>(c)]);

  for (const auto& [name, repl] : plan.zero_replacement) {
    for (Index c = 0; c < p; ++c) {
      if (plan.pipeline_columns[static_cast<std::size_t>(c)] != name) continue;
      for (Index i = 0; i < n; ++i) {
        if (!is_missing(data(i, c)) && data(i, c) == 0.0) data(i, c) = repl;
      }
    }
  }

  std::vector<Index> col_of(plan.imputer.columns.size());
  for (std::size_t k = 0; k < plan.imputer.columns.size(); ++k) {
    Index c = 0;
    while (plan.pipeline_columns[static_cast<std::size_t>(c)] != plan.imputer.columns[k].name) ++c;
    col_of[k] = c;
  }
  run_imputation(plan.imputer, col_of, &data);

  // Scale; rows feeding nonpositive values into a log transform are excluded.
  std::vector<char> drop_row(static_cast<std::size_t>(n), 0);
  for (Index c = 0; c < p; ++c) {
    const auto it = plan.transforms.find(plan.pipeline_columns[static_cast<std::size_t>(c)]);
    if (it == plan.transforms.end()) continue;
    const ColumnTransform& tr = it->second;
    for (Index i = 0; i < n; ++i) {
      Scalar v = data(i, c);
      if (tr.kind == TransformKind::LogCenter) {
        if (!(v > 0)) {
          if (!drop_row[static_cast<std::size_t>(i)]) {
            drop_row[static_cast<std::size_t>(i)] = 1;
            report.dropped_rows_nonpositive.push_back(i);
          }
          continue;
        }
        v = std::log(v);
      }
      data(i, c) = (v - tr.mean) / tr.sd;
    }
  }

  // Outlier exclusion on transformed biochemical columns.
  for (const std::string& name : plan.biochemical) {
    if (!plan.transforms.count(name)) continue;
    Index c = 0;
    while (plan.pipeline_columns[static_cast<std::size_t>(c)] != name) ++c;
    for (Index i = 0; i < n; ++i) {
      if (drop_row[static_cast<std::size_t>(i)]) continue;
      if (std::abs(data(i, c)) > plan.thresholds.outlier_sd) {
        drop_row[static_cast<std::size_t>(i)] = 2;
        report.dropped_rows_outlier.push_back(i);
      }
    }
  }

  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) {
    if (!drop_row[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  std::sort(report.dropped_rows_nonpositive.begin(), report.dropped_rows_nonpositive.end());
  std::sort(report.dropped_rows_outlier.begin(), report.dropped_rows_outlier.end());

  SurvivalDataset out;
  out.time.resize(static_cast<Index>(rows.size()));
  out.event.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.time[static_cast<Index>(i)] = ds.time[rows[i]];
    out.event[static_cast<Index>(i)] = ds.event[rows[i]];
  }
  out.features.resize(static_cast<Index>(rows.size()),
                      static_cast<Index>(plan.kept_columns.size()));
  Index k = 0;
  for (const std::string& name : plan.kept_columns) {
    Index c = 0;
    while (plan.pipeline_columns[static_cast<std::size_t>(c)] != name) ++c;
    out.column_names.push_back(name);
    out.column_kinds.push_back(plan.pipeline_kinds[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features(static_cast<Index>(i), k) = data(rows[i], c);
    }
    ++k;
  }
  return {std::move(out), std::move(report)};
}

SurvivalDataset impute(const ImputerModel& imputer, const SurvivalDataset& ds) {
  // Working matrix laid out exactly as the trees were fit.
  std::vector<Index> src(imputer.column_order.size());
  for (std::size_t c = 0; c < imputer.column_order.size(); ++c) {
    const Index j = ds.column_index(imputer.column_order[c]);
    if (j < 0) {
      throw ValidationError("impute: dataset lacks column '" + imputer.column_order[c] + "'");
    }
    src[c] = j;
  }
  Matrix data(ds.n_rows(), static_cast<Index>(src.size()));
  for (std::size_t c = 0; c < src.size(); ++c) {
    data.col(static_cast<Index>(c)) = ds.features.col(src[c]);
  }

  std::vector<Index> col_of(imputer.columns.size());
  for (std::size_t k = 0; k < imputer.columns.size(); ++k) {
    const auto it = std::find(imputer.column_order.begin(), imputer.column_order.end(),
                              imputer.columns[k].name);
    col_of[k] = static_cast<Index>(it - imputer.column_order.begin());
  }
  run_imputation(imputer, col_of, &data);

  SurvivalDataset out = ds;
  for (std::size_t c = 0; c < src.size(); ++c) {
    out.features.col(src[c]) = data.col(static_cast<Index>(c));
  }
  return out;
}

SurvivalDataset one_hot_encode(const SurvivalDataset& ds,
                               const std::vector<std::string>& factor_columns,
                               const std::map<std::string, std::vector<Scalar>>& levels,
                               int* unseen_counter) {
  SurvivalDataset out;
  out.time = ds.time;
  out.event = ds.event;
  const Index n = ds.n_rows();

  std::vector<Vector> new_cols;
  for (Index j = 0; j < ds.n_cols(); ++j) {
    const std::string& name = ds.column_names[static_cast<std::size_t>(j)];
    const bool is_factor =
        std::find(factor_columns.begin(), factor_columns.end(), name) != factor_columns.end();
    if (!is_factor) {
      out.column_names.push_back(name);
      out.column_kinds.push_back(ds.column_kinds[static_cast<std::size_t>(j)]);
      new_cols.push_back(ds.features.col(j));
      continue;
    }
    const auto it = levels.find(name);
    if (it == levels.end() || it->second.empty()) {
      throw ValidationError("one_hot_encode: no levels declared for '" + name + "'");
    }
    const std::vector<Scalar>& lv = it->second;
    // One column per level after the reference (the first level).
    std::vector<Vector> cols(lv.size() - 1, Vector::Zero(n));
    for (Index i = 0; i < n; ++i) {
      const Scalar v = ds.features(i, j);
      if (is_missing(v)) {
        for (auto& col : cols) col[i] = missing_value();
        continue;
      }
      bool seen = false;
      for (std::size_t k = 0; k < lv.size(); ++k) {
        if (v == lv[k]) {
          seen = true;
          if (k > 0) cols[k - 1][i] = 1.0;
          break;
        }
      }
      if (!seen && unseen_counter) ++(*unseen_counter);
    }
    for (std::size_t k = 1; k < lv.size(); ++k) {
      out.column_names.push_back(name + "_is_" + format_level(lv[k]));
      out.column_kinds.push_back(ColumnKind::Boolean);
      new_cols.push_back(std::move(cols[k - 1]));
    }
  }

  out.features.resize(n, static_cast<Index>(new_cols.size()));
  for (std::size_t c = 0; c < new_cols.size(); ++c) {
    out.features.col(static_cast<Index>(c)) = new_cols[c];
  }
  return out;
}

namespace {

nlohmann::json tree_to_json(const ImputerTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    nodes.push_back({{"feature", nd.feature},
                     {"threshold", nd.threshold},
                     {"left", nd.left},
                     {"right", nd.right},
                     {"value", nd.value}});
  }
  return {{"nodes", nodes}};
}

ImputerTree tree_from_json(const nlohmann::json& j) {
  ImputerTree tree;
  for (const auto& nd : j.at("nodes")) {
    tree.nodes.push_back({nd.at("feature").get<int>(), nd.at("threshold").get<Scalar>(),
                          nd.at("left").get<int>(), nd.at("right").get<int>(),
                          nd.at("value").get<Scalar>()});
  }
  return tree;
}

std::string kind_name(ColumnKind k) {
  return k == ColumnKind::Boolean ? "boolean" : "continuous";
}

ColumnKind kind_from_name(const std::string& s) {
  if (s == "boolean") return ColumnKind::Boolean;
  if (s == "continuous") return ColumnKind::Continuous;
  throw ValidationError("plan: unknown column kind '" + s + "'");
}

}  // namespace

nlohmann::json plan_to_json(const PreprocessPlan& plan) {
  nlohmann::json j;
  j["pipeline_columns"] = plan.pipeline_columns;
  nlohmann::json kinds = nlohmann::json::array();
  for (ColumnKind k : plan.pipeline_kinds) kinds.push_back(kind_name(k));
  j["pipeline_kinds"] = kinds;
  j["kept_columns"] = plan.kept_columns;
  nlohmann::json transforms;
  for (const auto& [name, tr] : plan.transforms) {
    transforms[name] = {
        {"kind", tr.kind == TransformKind::LogCenter ? "log_center" : "center"},
        {"mean", tr.mean},
        {"sd", tr.sd}};
  }
  j["transforms"] = transforms;
  j["zero_replacement"] = plan.zero_replacement;
  j["biochemical"] = plan.biochemical;
  j["thresholds"] = {{"var_min", plan.thresholds.var_min},
                     {"corr_max", plan.thresholds.corr_max},
                     {"miss_col", plan.thresholds.miss_col},
                     {"miss_row", plan.thresholds.miss_row},
                     {"outlier_sd", plan.thresholds.outlier_sd}};
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : plan.imputer.columns) {
    cols.push_back({{"name", col.name},
                    {"boolean", col.boolean},
                    {"init_fill", col.init_fill},
                    {"tree", tree_to_json(col.tree)}});
  }
  j["imputer"] = {{"sweeps", plan.imputer.sweeps},
                  {"seed", plan.imputer.seed},
                  {"column_order", plan.imputer.column_order},
                  {"columns", cols}};
  return j;
}

PreprocessPlan plan_from_json(const nlohmann::json& j) {
  PreprocessPlan plan;
  plan.pipeline_columns = j.at("pipeline_columns").get<std::vector<std::string>>();
  for (const auto& s : j.at("pipeline_kinds")) {
    plan.pipeline_kinds.push_back(kind_from_name(s.get<std::string>()));
  }
  plan.kept_columns = j.at("kept_columns").get<std::vector<std::string>>();
  for (const auto& [name, tr] : j.at("transforms").items()) {
    ColumnTransform t;
    t.kind = tr.at("kind").get<std::string>() == "log_center" ? TransformKind::LogCenter
                                                              : TransformKind::Center;
    t.mean = tr.at("mean").get<Scalar>();
    t.sd = tr.at("sd").get<Scalar>();
    plan.transforms[name] = t;
  }
  plan.zero_replacement =
      j.at("zero_replacement").get<std::map<std::string, Scalar>>();
  plan.biochemical = j.at("biochemical").get<std::vector<std::string>>();
  const auto& th = j.at("thresholds");
  plan.thresholds = {th.at("var_min").get<Scalar>(), th.at("corr_max").get<Scalar>(),
                     th.at("miss_col").get<Scalar>(), th.at("miss_row").get<Scalar>(),
                     th.at("outlier_sd").get<Scalar>()};
  plan.imputer.sweeps = j.at("imputer").at("sweeps").get<int>();
  plan.imputer.seed = j.at("imputer").at("seed").get<std::uint64_t>();
  plan.imputer.column_order =
      j.at("imputer").at("column_order").get<std::vector<std::string>>();
  for (const auto& col : j.at("imputer").at("columns")) {
    ImputerColumn ic;
    ic.name = col.at("name").get<std::string>();
    ic.boolean = col.at("boolean").get<bool>();
    ic.init_fill = col.at("init_fill").get<Scalar>();
    ic.tree = tree_from_json(col.at("tree"));
    plan.imputer.columns.push_back(std::move(ic));
  }
  return plan;
}

}  // namespace survbench
