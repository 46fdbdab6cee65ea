#include "survbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <thread>

#include "survbench/rng.hpp"

namespace survbench {

namespace {

std::string format_value(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Scalar lower_percentile(std::vector<Scalar> values, Scalar pct) {
  std::sort(values.begin(), values.end());
  const Index n = static_cast<Index>(values.size());
  Index idx = static_cast<Index>(std::floor(pct / 100.0 * static_cast<Scalar>(n - 1)));
  idx = std::clamp<Index>(idx, 0, n - 1);
  return values[static_cast<std::size_t>(idx)];
}

std::string fraction_label(Scalar fraction) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "top%g", fraction * 100.0);
  return buf;
}

void run_tasks(int n_tasks, int threads, const std::function<void(int)>& task) {
  if (threads <= 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_tasks));
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, n_tasks);
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
        try {
          task(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct MatrixView {
  Matrix X;
  Vector time;
  IntVector event;
};

MatrixView to_matrix(const SurvivalDataset& ds) {
  return {ds.features, ds.time, ds.event};
}

/// Everything run_nested_cv produces for one (feature_set, outer fold) cell.
struct CellResult {
  std::vector<FoldResult> per_grid;
  int fits = 0;
};

CellResult run_cell(const ExperimentConfig& config, const SurvivalDataset& ds_fs,
                    const FoldAssignment& folds, std::size_t fs_index, int outer) {
  const FeatureSet& fs = config.feature_sets[fs_index];
  CellResult cell;

  auto invalid_all = [&](const std::string& reason) {
    for (const GridSpec& grid : config.grids) {
      FoldResult fr;
      fr.kind = grid.kind;
      fr.feature_set = fs.name;
      fr.outer_fold = outer;
      fr.valid = false;
      fr.invalid_reason = reason;
      fr.size = ds_fs.n_rows();
      cell.per_grid.push_back(std::move(fr));
    }
  };

  const SurvivalDataset train = ds_fs.select_rows(folds.train_rows(outer));
  const SurvivalDataset test = ds_fs.select_rows(folds.test_rows(outer));
  if (test.event.sum() == 0) {
    invalid_all("zero test events");
    return cell;
  }
  if (train.event.sum() == 0) {
    invalid_all("zero train events");
    return cell;
  }

  const std::uint64_t cell_seed =
      mix_seed(config.cv.seed, fs_index * 1000 + static_cast<std::uint64_t>(outer));

  SurvivalDataset train_p, test_p;
  Scalar preprocess_seconds = 0;
  try {
    const auto pre_start = std::chrono::steady_clock::now();
    const auto [plan, fit_report] =
        fit_preprocessor(train, mix_seed(cell_seed, 1), config.preprocess);
    train_p = apply_preprocessor(plan, train).first;
    test_p = apply_preprocessor(plan, test).first;
    preprocess_seconds =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - pre_start)
            .count();
  } catch (const std::runtime_error& e) {
    invalid_all(std::string("preprocessing failed: ") + e.what());
    return cell;
  }

  if (train_p.n_rows() == 0 || train_p.event.sum() == 0) {
    invalid_all("preprocessing left no usable training rows");
    return cell;
  }
  if (test_p.n_rows() == 0 || test_p.event.sum() == 0) {
    invalid_all("preprocessing left no test events");
    return cell;
  }

  const MatrixView tr = to_matrix(train_p);
  const MatrixView te = to_matrix(test_p);
  const FoldAssignment inner =
      make_folds(train_p.n_rows(), config.cv.inner_k, mix_seed(cell_seed, 2));

  const Scalar tau = config.metrics.tau_override.value_or(lower_percentile(
      std::vector<Scalar>(te.time.data(), te.time.data() + te.time.size()),
      config.metrics.tau_percentile));

  // Inner fold views, shared by every grid point.
  struct InnerFold {
    MatrixView fit, score;
  };
  std::vector<InnerFold> inner_folds;
  inner_folds.reserve(static_cast<std::size_t>(config.cv.inner_k));
  for (int j = 0; j < config.cv.inner_k; ++j) {
    auto gather = [&](const std::vector<Index>& rows) {
      MatrixView mv;
      mv.X.resize(static_cast<Index>(rows.size()), tr.X.cols());
      mv.time.resize(static_cast<Index>(rows.size()));
      mv.event.resize(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        mv.X.row(static_cast<Index>(r)) = tr.X.row(rows[r]);
        mv.time[static_cast<Index>(r)] = tr.time[rows[r]];
        mv.event[static_cast<Index>(r)] = tr.event[rows[r]];
      }
      return mv;
    };
    inner_folds.push_back({gather(inner.train_rows(j)), gather(inner.test_rows(j))});
  }

  for (std::size_t g = 0; g < config.grids.size(); ++g) {
    const GridSpec& grid = config.grids[g];
    const std::vector<HyperParams> points =
        grid.points.empty() ? default_grid(grid.kind) : grid.points;

    FoldResult fr;
    fr.kind = grid.kind;
    fr.feature_set = fs.name;
    fr.outer_fold = outer;
    fr.size = ds_fs.n_rows();
    fr.preprocess_seconds = preprocess_seconds;
    fr.n_train = train_p.n_rows();
    fr.n_test = test_p.n_rows();
    fr.n_events_train = train_p.event.sum();
    fr.n_events_test = test_p.event.sum();

    // Inner grid search on mean Harrell's C.
    std::size_t best_point = 0;
    Scalar best_score = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t pt = 0; pt < points.size(); ++pt) {
      Scalar score_sum = 0;
      int score_count = 0;
      for (int j = 0; j < config.cv.inner_k; ++j) {
        const InnerFold& fold = inner_folds[static_cast<std::size_t>(j)];
        try {
          const auto model = fit_model(
              grid.kind, points[pt], fold.fit.X, fold.fit.time, fold.fit.event,
              train_p.column_names,
              mix_seed(cell_seed, 100 + g * 100000 + pt * 100 + static_cast<std::size_t>(j)));
          ++cell.fits;
          score_sum += harrell_c_fast(fold.score.time, fold.score.event,
                                      model->predict_risk(fold.score.X));
          ++score_count;
        } catch (const NumericalError&) {
          ++cell.fits;  // the attempt still counts as a fit
        } catch (const ValidationError&) {
          ++cell.fits;
        }
      }
      if (score_count == 0) continue;
      const Scalar mean_score = score_sum / static_cast<Scalar>(score_count);
      const bool better =
          mean_score > best_score ||
          (mean_score == best_score &&
           complexity(grid.kind, points[pt]) < complexity(grid.kind, points[best_point]));
      if (better) {
        best_score = mean_score;
        best_point = pt;
      }
    }
    fr.chosen_params = points[best_point];

    try {
      const auto fit_start = std::chrono::steady_clock::now();
      const auto model = fit_model(grid.kind, points[best_point], tr.X, tr.time,
                                   tr.event, train_p.column_names,
                                   mix_seed(cell_seed, 10 + g));
      fr.fit_time_seconds =
          std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - fit_start)
              .count();
      ++cell.fits;

      const Vector risk_test = model->predict_risk(te.X);
      const Vector risk_train = model->predict_risk(tr.X);

      fr.metrics.harrell_c = harrell_c_fast(te.time, te.event, risk_test);
      fr.metrics.uno_c = uno_c(tr.time, tr.event, te.time, te.event, risk_test, tau);
      fr.metrics.delta_c =
          delta_c(harrell_c_fast(tr.time, tr.event, risk_train), fr.metrics.harrell_c);
      for (Scalar fraction : config.metrics.fractions) {
        fr.metrics.group[fraction] =
            top_fraction_metrics(te.time, te.event, risk_test, fraction, tau);
      }
      fr.metrics.fit_time_seconds = fr.fit_time_seconds;
    } catch (const std::runtime_error& e) {
      fr.valid = false;
      fr.invalid_reason = e.what();
    }
    cell.per_grid.push_back(std::move(fr));
  }
  return cell;
}

}  // namespace

SurvivalDataset load_experiment_dataset(const ExperimentConfig& config) {
  if (config.synth.has_value()) return generate_synthetic(*config.synth).data;
  if (config.csv_path.empty()) {
    throw ValidationError("config: either a csv path or a synthetic spec is required");
  }
  return load_csv(config.csv_path);
}

BenchmarkReport run_nested_cv(const ExperimentConfig& config, const SurvivalDataset& ds) {
  if (config.grids.empty()) throw ValidationError("config: at least one model grid");
  if (config.cv.outer_k < 2 || config.cv.inner_k < 2) {
    throw ValidationError("config: outer_k and inner_k must be at least 2");
  }

  BenchmarkReport report;
  report.dataset_rows = ds.n_rows();
  const FoldAssignment folds = make_folds(ds.n_rows(), config.cv.outer_k, config.cv.seed);

  // One task per (feature set, outer fold); slots keep assembly order fixed.
  const int n_tasks = static_cast<int>(config.feature_sets.size()) * config.cv.outer_k;
  std::vector<CellResult> cells(static_cast<std::size_t>(n_tasks));
  std::vector<SurvivalDataset> subsets;
  subsets.reserve(config.feature_sets.size());
  for (const FeatureSet& fs : config.feature_sets) {
    subsets.push_back(fs.columns.empty() ? ds : ds.select_columns(fs.columns));
  }

  run_tasks(n_tasks, config.threads, [&](int task) {
    const std::size_t fs_index =
        static_cast<std::size_t>(task) / static_cast<std::size_t>(config.cv.outer_k);
    const int outer = task % config.cv.outer_k;
    cells[static_cast<std::size_t>(task)] =
        run_cell(config, subsets[fs_index], folds, fs_index, outer);
  });

  for (auto& cell : cells) {
    report.total_fits += cell.fits;
    for (auto& fr : cell.per_grid) report.folds.push_back(std::move(fr));
  }
  return report;
}

std::map<std::string, Scalar> metric_values(const FoldResult& fold) {
  std::map<std::string, Scalar> out;
  out["harrell_c"] = fold.metrics.harrell_c;
  out["uno_c"] = fold.metrics.uno_c;
  out["delta_c"] = fold.metrics.delta_c;
  for (const auto& [fraction, gm] : fold.metrics.group) {
    const std::string tag = fraction_label(fraction);
    out["sensitivity_" + tag] = gm.sensitivity;
    out["specificity_" + tag] = gm.specificity;
    out["fpr_" + tag] = gm.fpr;
    out["fnr_" + tag] = gm.fnr;
    out["hazard_ratio_" + tag] = gm.hazard_ratio;
    out["delta_rmst_" + tag] = gm.delta_rmst;
    out["logrank_p_" + tag] = gm.logrank_p;
  }
  return out;
}

nlohmann::json rank_models(const BenchmarkReport& report) {
  // Cells: (feature_set, fold) -> model -> C
  std::map<std::pair<std::string, int>, std::vector<std::pair<std::string, Scalar>>> cells;
  for (const FoldResult& fr : report.folds) {
    if (!fr.valid) continue;
    cells[{fr.feature_set, fr.outer_fold}].emplace_back(to_string(fr.kind),
                                                        fr.metrics.harrell_c);
  }

  nlohmann::json rows = nlohmann::json::array();
  std::map<std::string, std::map<std::string, std::pair<Scalar, int>>> mean_acc;
  for (const auto& [key, entries] : cells) {
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return entries[a].second > entries[b].second;
    });
    // Mean of covered ranks for exact ties.
    std::vector<Scalar> rank(entries.size(), 0);
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j < order.size() && entries[order[j]].second == entries[order[i]].second) ++j;
      const Scalar shared = (static_cast<Scalar>(i + 1) + static_cast<Scalar>(j)) / 2.0;
      for (std::size_t q = i; q < j; ++q) rank[order[q]] = shared;
      i = j;
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
      rows.push_back({{"model", entries[e].first},
                      {"feature_set", key.first},
                      {"fold", key.second},
                      {"rank", rank[e]}});
      auto& acc = mean_acc[key.first][entries[e].first];
      acc.first += rank[e];
      acc.second += 1;
    }
  }

  nlohmann::json mean_rank;
  for (const auto& [fs, models] : mean_acc) {
    for (const auto& [model, acc] : models) {
      mean_rank[fs][model] = acc.first / static_cast<Scalar>(acc.second);
    }
  }
  return {{"rows", rows}, {"mean_rank", mean_rank}};
}

nlohmann::json compare_models(const BenchmarkReport& report, const std::string& metric) {
  // Per feature set: model -> fold -> value
  std::map<std::string, std::map<std::string, std::map<int, Scalar>>> values;
  for (const FoldResult& fr : report.folds) {
    if (!fr.valid) continue;
    const auto vals = metric_values(fr);
    const auto it = vals.find(metric);
    if (it == vals.end()) throw ValidationError("compare_models: unknown metric " + metric);
    values[fr.feature_set][to_string(fr.kind)][fr.outer_fold] = it->second;
  }

  struct PairEntry {
    std::string feature_set;
    std::size_t i, j;
    Scalar p;
  };
  std::vector<PairEntry> entries;
  nlohmann::json out;

  for (const auto& [fs, models] : values) {
    std::vector<std::string> names;
    for (const auto& [name, _] : models) names.push_back(name);
    const std::size_t k = names.size();
    std::vector<std::vector<Scalar>> p(k, std::vector<Scalar>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        std::vector<Scalar> a, b;
        for (const auto& [fold, va] : models.at(names[i])) {
          const auto& mb = models.at(names[j]);
          const auto itb = mb.find(fold);
          if (itb != mb.end()) {
            a.push_back(va);
            b.push_back(itb->second);
          }
        }
        if (a.size() < 2) {
          throw ValidationError("compare_models: fewer than 2 shared folds for " +
                                names[i] + " vs " + names[j]);
        }
        const TTestResult t = paired_t_test(a, b);
        p[i][j] = p[j][i] = t.p;
        entries.push_back({fs, i, j, t.p});
      }
    }
    out[fs]["models"] = names;
    out[fs]["p"] = p;
  }

  // One BH pass over every pairwise test in the matrix.
  std::vector<Scalar> pvec;
  pvec.reserve(entries.size());
  for (const auto& e : entries) pvec.push_back(e.p);
  const std::vector<Scalar> qvec = bh_fdr(pvec);

  for (auto& [fs, block] : out.items()) {
    const std::size_t k = block["models"].size();
    std::vector<std::vector<Scalar>> q(k, std::vector<Scalar>(k, 1.0));
    block["q"] = q;
  }
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& en = entries[e];
    out[en.feature_set]["q"][en.i][en.j] = qvec[e];
    out[en.feature_set]["q"][en.j][en.i] = qvec[e];
  }
  return out;
}

std::vector<BenchmarkReport> scaling_experiment(const ExperimentConfig& config,
                                                const std::vector<Index>& sizes,
                                                const SurvivalDataset& ds) {
  std::vector<BenchmarkReport> out;
  for (Index size : sizes) {
    if (size > ds.n_rows()) {
      throw ValidationError("scaling: size " + std::to_string(size) +
                            " exceeds the dataset (" + std::to_string(ds.n_rows()) + ")");
    }
    const SurvivalDataset sub =
        subsample(ds, size, mix_seed(config.cv.seed, static_cast<std::uint64_t>(size)));
    out.push_back(run_nested_cv(config, sub));
  }
  return out;
}

std::string results_csv(const BenchmarkReport& report) {
  std::string csv = "model,feature_set,fold,metric,value\n";
  for (const FoldResult& fr : report.folds) {
    if (!fr.valid) continue;
    for (const auto& [metric, value] : metric_values(fr)) {
      csv += to_string(fr.kind);
      csv += ',';
      csv += fr.feature_set;
      csv += ',';
      csv += std::to_string(fr.outer_fold);
      csv += ',';
      csv += metric;
      csv += ',';
      csv += format_value(value);
      csv += '\n';
    }
  }
  return csv;
}

std::string timing_csv(const BenchmarkReport& report) {
  std::string csv = "model,feature_set,size,fold,seconds\n";
  std::map<std::pair<std::string, int>, Scalar> preprocess_rows;
  for (const FoldResult& fr : report.folds) {
    preprocess_rows[{fr.feature_set, fr.outer_fold}] = fr.preprocess_seconds;
    if (!fr.valid) continue;
    csv += to_string(fr.kind);
    csv += ',';
    csv += fr.feature_set;
    csv += ',';
    csv += std::to_string(fr.size);
    csv += ',';
    csv += std::to_string(fr.outer_fold);
    csv += ',';
    csv += format_value(fr.fit_time_seconds);
    csv += '\n';
  }
  for (const auto& [key, seconds] : preprocess_rows) {
    csv += "preprocess,";
    csv += key.first;
    csv += ',';
    csv += std::to_string(report.dataset_rows);
    csv += ',';
    csv += std::to_string(key.second);
    csv += ',';
    csv += format_value(seconds);
    csv += '\n';
  }
  return csv;
}

std::string cost_thresholds_csv(const CostModel& cost) {
  std::string csv = "threshold,price_per_hour,seconds\n";
  for (Scalar threshold : cost.thresholds) {
    csv += format_value(threshold);
    csv += ',';
    csv += format_value(cost.price_per_hour);
    csv += ',';
    csv += format_value(cost.threshold_seconds(threshold));
    csv += '\n';
  }
  return csv;
}

nlohmann::json summary_json(const BenchmarkReport& report) {
  nlohmann::json j;
  j["dataset_rows"] = report.dataset_rows;
  j["total_fits"] = report.total_fits;

  // Aggregates: mean and normal-approximation 95% CI across valid folds.
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<Scalar>>>> acc;
  for (const FoldResult& fr : report.folds) {
    if (!fr.valid) continue;
    for (const auto& [metric, value] : metric_values(fr)) {
      acc[fr.feature_set][to_string(fr.kind)][metric].push_back(value);
    }
  }
  nlohmann::json aggregates;
  for (const auto& [fs, models] : acc) {
    for (const auto& [model, metrics] : models) {
      for (const auto& [metric, vals] : metrics) {
        const Scalar k = static_cast<Scalar>(vals.size());
        Scalar mean = 0;
        for (Scalar v : vals) mean += v;
        mean /= k;
        Scalar ss = 0;
        for (Scalar v : vals) ss += (v - mean) * (v - mean);
        const Scalar sd = vals.size() > 1 ? std::sqrt(ss / (k - 1)) : 0.0;
        const Scalar half = 1.96 * sd / std::sqrt(k);
        aggregates[fs][model][metric] = {{"mean", mean},
                                         {"ci_lo", mean - half},
                                         {"ci_hi", mean + half},
                                         {"k", vals.size()}};
      }
    }
  }
  j["aggregates"] = aggregates;
  j["ranks"] = rank_models(report);
  try {
    j["q_values"] = compare_models(report, "harrell_c");
  } catch (const ValidationError&) {
    j["q_values"] = nullptr;  // single model or single fold: nothing to compare
  }

  nlohmann::json invalid = nlohmann::json::array();
  nlohmann::json chosen = nlohmann::json::array();
  for (const FoldResult& fr : report.folds) {
    if (!fr.valid) {
      invalid.push_back({{"model", to_string(fr.kind)},
                         {"feature_set", fr.feature_set},
                         {"fold", fr.outer_fold},
                         {"reason", fr.invalid_reason}});
    } else {
      chosen.push_back({{"model", to_string(fr.kind)},
                        {"feature_set", fr.feature_set},
                        {"fold", fr.outer_fold},
                        {"params", fr.chosen_params},
                        {"n_train", fr.n_train},
                        {"n_test", fr.n_test},
                        {"n_events_train", fr.n_events_train},
                        {"n_events_test", fr.n_events_test}});
    }
  }
  j["invalid_folds"] = invalid;
  j["chosen"] = chosen;
  return j;
}

void write_report_files(const BenchmarkReport& report, const ExperimentConfig& config,
                        const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(out_dir + "/" + name, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + out_dir + "/" + name);
    out << content;
  };
  write("results.csv", results_csv(report));
  write("timing.csv", timing_csv(report));
  write("cost_thresholds.csv", cost_thresholds_csv(config.cost));
  nlohmann::json summary = summary_json(report);
  summary["config"] = config_to_json(config);
  write("summary.json", summary.dump(2) + "\n");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  if (!j.is_object()) throw ValidationError("config: JSON object expected");

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.contains("csv")) config.csv_path = d.at("csv").get<std::string>();
    if (d.contains("synthetic")) config.synth = synth_spec_from_json(d.at("synthetic"));
  }
  if (config.csv_path.empty() && !config.synth.has_value()) {
    throw ValidationError("config: dataset.csv or dataset.synthetic is required");
  }
  if (!config.csv_path.empty() && config.synth.has_value()) {
    throw ValidationError("config: choose one of dataset.csv and dataset.synthetic");
  }

  if (j.contains("feature_sets")) {
    config.feature_sets.clear();
    for (const auto& [name, cols] : j.at("feature_sets").items()) {
      FeatureSet fs;
      fs.name = name;
      if (!cols.is_null()) fs.columns = cols.get<std::vector<std::string>>();
      config.feature_sets.push_back(std::move(fs));
    }
    if (config.feature_sets.empty()) {
      throw ValidationError("config: feature_sets may not be empty");
    }
  }

  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty()) {
    throw ValidationError("config: a nonempty models array is required");
  }
  for (const auto& m : j.at("models")) {
    GridSpec grid;
    grid.kind = model_kind_from_string(m.at("kind").get<std::string>());
    if (m.contains("grid")) {
      grid.points = expand_grid(grid.kind, m.at("grid"));
    } else if (m.contains("params")) {
      grid.points.push_back(m.at("params"));
    }
    config.grids.push_back(std::move(grid));
  }

  if (j.contains("cv")) {
    const auto& cv = j.at("cv");
    config.cv.outer_k = cv.value("outer_k", 5);
    config.cv.inner_k = cv.value("inner_k", 5);
    config.cv.seed = cv.value("seed", std::uint64_t{42});
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    if (m.contains("fractions")) {
      config.metrics.fractions = m.at("fractions").get<std::vector<Scalar>>();
    }
    config.metrics.tau_percentile = m.value("tau_percentile", 95.0);
    if (m.contains("tau")) config.metrics.tau_override = m.at("tau").get<Scalar>();
  }
  if (j.contains("cost")) {
    const auto& c = j.at("cost");
    config.cost.price_per_hour = c.value("price_per_hour", 1.0);
    if (c.contains("thresholds")) {
      config.cost.thresholds = c.at("thresholds").get<std::vector<Scalar>>();
    }
    if (!(config.cost.price_per_hour > 0)) {
      throw ValidationError("config: cost.price_per_hour must be positive");
    }
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    if (p.contains("biochemical_columns")) {
      config.preprocess.biochemical_columns =
          p.at("biochemical_columns").get<std::vector<std::string>>();
    }
  }
  config.threads = j.value("threads", 1);
  if (config.threads < 1) throw ValidationError("config: threads must be >= 1");
  return config;
}

SynthSpec synth_spec_from_json(const nlohmann::json& s) {
  SynthSpec spec;
  spec.n_rows = s.at("n_rows").get<Index>();
  spec.n_continuous = s.value("n_continuous", 0);
  spec.n_boolean = s.value("n_boolean", 0);
  const std::string kind = s.at("risk").at("kind").get<std::string>();
  if (kind == "linear") {
    LinearRisk lin;
    lin.beta = Vector::Zero(spec.n_continuous + spec.n_boolean);
    const auto& beta = s.at("risk").at("beta");
    if (static_cast<Index>(beta.size()) != lin.beta.size()) {
      throw ValidationError("synthetic spec: beta length must equal feature count");
    }
    for (Index i = 0; i < lin.beta.size(); ++i) lin.beta[i] = beta.at(i).get<Scalar>();
    spec.risk = lin;
  } else if (kind == "nonlinear") {
    spec.risk = NonlinearRisk{};
  } else {
    throw ValidationError("synthetic spec: risk kind must be linear or nonlinear");
  }
  spec.baseline_rate = s.value("baseline_rate", 0.1);
  spec.target_event_fraction = s.value("target_event_fraction", 1.0);
  spec.seed = s.value("seed", std::uint64_t{0});
  return spec;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  nlohmann::json risk;
  if (const auto* lin = std::get_if<LinearRisk>(&s.risk)) {
    nlohmann::json beta = nlohmann::json::array();
    for (Index i = 0; i < lin->beta.size(); ++i) beta.push_back(lin->beta[i]);
    risk = {{"kind", "linear"}, {"beta", beta}};
  } else {
    risk = {{"kind", "nonlinear"}};
  }
  return {{"n_rows", s.n_rows},
          {"n_continuous", s.n_continuous},
          {"n_boolean", s.n_boolean},
          {"risk", risk},
          {"baseline_rate", s.baseline_rate},
          {"target_event_fraction", s.target_event_fraction},
          {"seed", s.seed}};
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  if (config.synth.has_value()) {
    j["dataset"]["synthetic"] = synth_spec_to_json(*config.synth);
  } else {
    j["dataset"]["csv"] = config.csv_path;
  }
  nlohmann::json feature_sets;
  for (const FeatureSet& fs : config.feature_sets) {
    feature_sets[fs.name] =
        fs.columns.empty() ? nlohmann::json(nullptr) : nlohmann::json(fs.columns);
  }
  j["feature_sets"] = feature_sets;
  nlohmann::json models = nlohmann::json::array();
  for (const GridSpec& grid : config.grids) {
    nlohmann::json m;
    m["kind"] = to_string(grid.kind);
    if (!grid.points.empty()) m["points"] = grid.points;
    models.push_back(std::move(m));
  }
  j["models"] = models;
  j["cv"] = {{"outer_k", config.cv.outer_k},
             {"inner_k", config.cv.inner_k},
             {"seed", config.cv.seed}};
  nlohmann::json metrics = {{"fractions", config.metrics.fractions},
                            {"tau_percentile", config.metrics.tau_percentile}};
  if (config.metrics.tau_override) metrics["tau"] = *config.metrics.tau_override;
  j["metrics"] = metrics;
  j["cost"] = {{"price_per_hour", config.cost.price_per_hour},
               {"thresholds", config.cost.thresholds}};
  j["preprocess"] = {{"biochemical_columns", config.preprocess.biochemical_columns}};
  // threads is an execution knob, not part of the experiment identity; the
  // echoed config stays byte-identical across worker counts.
  return j;
}

}  // namespace survbench
