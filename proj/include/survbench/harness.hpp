#ifndef SURVBENCH_HARNESS_HPP
#define SURVBENCH_HARNESS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "survbench/dataset.hpp"
#include "survbench/metrics.hpp"
#include "survbench/models.hpp"
#include "survbench/preprocess.hpp"

namespace survbench {

struct CvSettings {
  int outer_k = 5;
  int inner_k = 5;
  std::uint64_t seed = 42;
};

struct MetricSettings {
  std::vector<Scalar> fractions{0.1, 0.2};
  Scalar tau_percentile = 95.0;       // of observed test times
  std::optional<Scalar> tau_override;
};

struct CostModel {
  Scalar price_per_hour = 1.0;
  std::vector<Scalar> thresholds{0.1, 0.01};  // currency per fit

  Scalar threshold_seconds(Scalar threshold) const {
    return threshold / price_per_hour * 3600.0;
  }
};

struct GridSpec {
  ModelKind kind = ModelKind::CoxPlain;
  std::vector<HyperParams> points;  // empty = the kind's default grid
};

struct FeatureSet {
  std::string name = "all";
  std::vector<std::string> columns;  // empty = every dataset column
};

struct ExperimentConfig {
  std::string csv_path;           // exactly one source: csv_path or synth
  std::optional<SynthSpec> synth;
  std::vector<FeatureSet> feature_sets{FeatureSet{}};
  std::vector<GridSpec> grids;
  CvSettings cv;
  MetricSettings metrics;
  CostModel cost;
  PreprocessOptions preprocess;
  int threads = 1;
};

struct FoldResult {
  ModelKind kind = ModelKind::CoxPlain;
  std::string feature_set;
  int outer_fold = 0;
  bool valid = true;
  std::string invalid_reason;
  HyperParams chosen_params;
  MetricReport metrics;
  Scalar fit_time_seconds = 0;        // final refit only
  Scalar preprocess_seconds = 0;      // fit + apply, reported separately
  Index n_train = 0, n_test = 0;
  Index n_events_train = 0, n_events_test = 0;
  Index size = 0;                     // dataset rows this run saw
};

struct BenchmarkReport {
  std::vector<FoldResult> folds;
  int total_fits = 0;
  Index dataset_rows = 0;
};

SurvivalDataset load_experiment_dataset(const ExperimentConfig& config);

/// Outer folds: preprocess on outer-train only, inner grid search on mean
/// Harrell's C (ties: lower complexity, then grid order), timed final refit,
/// full metric suite on outer-test. Deterministic for a fixed config.
BenchmarkReport run_nested_cv(const ExperimentConfig& config, const SurvivalDataset& ds);

/// Per (feature_set, fold) cell: rank 1 = highest Harrell's C, exact ties
/// share the mean of covered ranks.
nlohmann::json rank_models(const BenchmarkReport& report);

/// Pairwise paired t-tests across folds per feature set on the named metric;
/// one BH adjustment spans the whole matrix.
nlohmann::json compare_models(const BenchmarkReport& report, const std::string& metric);

/// Subsample-then-run for each size; fold results carry the size tag.
std::vector<BenchmarkReport> scaling_experiment(const ExperimentConfig& config,
                                                const std::vector<Index>& sizes,
                                                const SurvivalDataset& ds);

/// Per-fold metric values in report order (the long CSV's metric column).
std::map<std::string, Scalar> metric_values(const FoldResult& fold);

std::string results_csv(const BenchmarkReport& report);
std::string timing_csv(const BenchmarkReport& report);
std::string cost_thresholds_csv(const CostModel& cost);
nlohmann::json summary_json(const BenchmarkReport& report);

/// results.csv, summary.json and timing.csv under out_dir. The timing file
/// holds every wall-clock value; the other two are byte-identical across
/// reruns of one config.
void write_report_files(const BenchmarkReport& report, const ExperimentConfig& config,
                        const std::string& out_dir);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);

}  // namespace survbench

#endif
