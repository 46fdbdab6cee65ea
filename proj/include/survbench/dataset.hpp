#ifndef SURVBENCH_DATASET_HPP
#define SURVBENCH_DATASET_HPP

#include <string>
#include <variant>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

enum class ColumnKind { Continuous, Boolean };

/// Feature matrix plus per-row observation time and event indicator.
/// Missing feature cells are NaN; time and event are never missing.
struct SurvivalDataset {
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  Matrix features;  // n_rows x n_cols, column order matches names
  Vector time;      // strictly positive
  IntVector event;  // 0 or 1

  Index n_rows() const { return time.size(); }
  Index n_cols() const { return static_cast<Index>(column_names.size()); }

  /// Index of a named column, or -1.
  Index column_index(const std::string& name) const;

  /// Throws ValidationError if any invariant is broken (row counts, time > 0,
  /// event in {0,1}, unique names, booleans only 0/1/missing).
  void validate() const;

  SurvivalDataset select_rows(const std::vector<Index>& rows) const;
  SurvivalDataset select_columns(const std::vector<std::string>& names) const;
};

struct FoldAssignment {
  Index n_rows = 0;
  int k = 0;
  std::vector<int> fold_of;  // one entry per row, values in [0, k)

  std::vector<Index> test_rows(int fold) const;
  std::vector<Index> train_rows(int fold) const;
};

struct LinearRisk {
  Vector beta;
};
struct NonlinearRisk {};  // 1.5*x0*x1 + 1.0*(x2>0) + 0.5*xor(b0,b1), unit-variance scaled

struct SynthSpec {
  Index n_rows = 0;
  int n_continuous = 0;
  int n_boolean = 0;
  std::variant<LinearRisk, NonlinearRisk> risk = LinearRisk{};
  Scalar baseline_rate = 0.1;           // lambda of the exponential hazard
  Scalar target_event_fraction = 1.0;   // in (0,1]; 1 means no censoring
  std::uint64_t seed = 0;
};

struct SynthResult {
  SurvivalDataset data;
  Vector oracle_risk;  // the true eta per row
};

SurvivalDataset load_csv(const std::string& path);
void save_csv(const SurvivalDataset& ds, const std::string& path);

/// Deterministic uniform random partition; fold sizes differ by at most one.
FoldAssignment make_folds(Index n_rows, int k, std::uint64_t seed);

/// Simple random sample without replacement, original row order preserved.
SurvivalDataset subsample(const SurvivalDataset& ds, Index n, std::uint64_t seed);

/// Exponential proportional-hazards generator with uniform censoring whose
/// scale is calibrated by bisection on a pilot draw.
SynthResult generate_synthetic(const SynthSpec& spec);

}  // namespace survbench

#endif
