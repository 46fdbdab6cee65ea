#ifndef SURVBENCH_PREPROCESS_HPP
#define SURVBENCH_PREPROCESS_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "survbench/dataset.hpp"

namespace survbench {

enum class TransformKind {
  LogCenter,  // ln, then center/scale with train statistics
  Center,     // center/scale only; used when the train column is not positive
};

struct ColumnTransform {
  TransformKind kind = TransformKind::Center;
  Scalar mean = 0;
  Scalar sd = 1;  // > 0 for every recorded transform
};

/// Single SSE regression tree used by the chained-equations imputer
/// (boolean targets get majority-vote leaves).
struct ImputerTree {
  struct Node {
    int feature = -1;  // index into the predictor columns (target removed)
    Scalar threshold = 0;
    int left = -1;
    int right = -1;
    Scalar value = 0;
  };
  std::vector<Node> nodes;

  Scalar predict(const Vector& predictor_row) const;
};

struct ImputerColumn {
  std::string name;
  bool boolean = false;
  Scalar init_fill = 0;  // train mean (continuous) or majority (boolean)
  ImputerTree tree;
};

struct ImputerModel {
  std::vector<ImputerColumn> columns;      // visit order: ascending train missingness
  std::vector<std::string> column_order;   // predictor layout the trees were fit on
  int sweeps = 3;
  std::uint64_t seed = 0;
};

struct PreprocessThresholds {
  Scalar var_min = 0.01;
  Scalar corr_max = 0.99;
  Scalar miss_col = 0.20;
  Scalar miss_row = 0.20;
  Scalar outlier_sd = 5.0;
};

struct PreprocessPlan {
  std::vector<std::string> pipeline_columns;  // post-missingness set, imputer universe
  std::vector<ColumnKind> pipeline_kinds;
  std::vector<std::string> kept_columns;      // final predictors, original order
  std::map<std::string, ColumnTransform> transforms;   // continuous pipeline columns
  std::map<std::string, Scalar> zero_replacement;      // biochemical columns
  std::vector<std::string> biochemical;                // declared and retained
  ImputerModel imputer;
  PreprocessThresholds thresholds;
};

struct PreprocessReport {
  std::vector<std::string> dropped_columns_missingness;
  std::vector<Index> dropped_rows_missingness;   // fit-time only, train row indices
  std::vector<Index> dropped_rows_outlier;       // apply-time, input row indices
  std::vector<Index> dropped_rows_nonpositive;   // apply-time: log column <= 0
  std::vector<std::string> dropped_columns_variance;
  std::vector<std::string> dropped_columns_correlation;
};

struct PreprocessOptions {
  std::vector<std::string> biochemical_columns;
  PreprocessThresholds thresholds;
};

/// Fits the full pipeline on a training fold: missingness exclusion, chained
/// imputation, zero replacement, scaling, variance and correlation filters.
/// The plan depends on the training rows only.
std::pair<PreprocessPlan, PreprocessReport> fit_preprocessor(
    const SurvivalDataset& train, std::uint64_t seed,
    const PreprocessOptions& options = {});

/// zero replacement -> imputation -> scaling with train statistics -> row
/// exclusion (nonpositive log inputs, biochemical |z| > outlier_sd) -> subset
/// to kept columns. Output carries no missing values.
std::pair<SurvivalDataset, PreprocessReport> apply_preprocessor(
    const PreprocessPlan& plan, const SurvivalDataset& ds);

/// Fills every missing cell of the imputer's columns; observed cells pass
/// through unchanged.
SurvivalDataset impute(const ImputerModel& imputer, const SurvivalDataset& ds);

/// One boolean column per non-reference level; unseen categories map to all
/// zeros and bump *unseen_counter.
SurvivalDataset one_hot_encode(const SurvivalDataset& ds,
                               const std::vector<std::string>& factor_columns,
                               const std::map<std::string, std::vector<Scalar>>& levels,
                               int* unseen_counter = nullptr);

nlohmann::json plan_to_json(const PreprocessPlan& plan);
PreprocessPlan plan_from_json(const nlohmann::json& j);

}  // namespace survbench

#endif
