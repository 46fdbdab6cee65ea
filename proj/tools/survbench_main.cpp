#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "survbench/harness.hpp"

namespace {

using namespace survbench;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << content;
}

std::string num(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int run_synth(const std::string& spec_path, const std::string& out_path,
              const std::string& oracle_path) {
  const SynthSpec spec = synth_spec_from_json(read_json(spec_path));
  const SynthResult result = generate_synthetic(spec);
  save_csv(result.data, out_path);
  if (!oracle_path.empty()) {
    std::string csv = "oracle_risk\n";
    for (Index i = 0; i < result.oracle_risk.size(); ++i) {
      csv += num(result.oracle_risk[i]);
      csv += '\n';
    }
    write_text(oracle_path, csv);
  }
  std::cout << "command=synth rows=" << result.data.n_rows()
            << " events=" << result.data.event.sum() << " out=" << out_path << "\n";
  return 0;
}

int run_preprocess(const std::string& train_path, const std::string& apply_path,
                   const std::string& plan_path, const std::string& out_path,
                   const std::vector<std::string>& biochemical, std::uint64_t seed) {
  PreprocessPlan plan;
  std::string fitted = "0";
  if (!train_path.empty()) {
    PreprocessOptions options;
    options.biochemical_columns = biochemical;
    const SurvivalDataset train = load_csv(train_path);
    auto [p, report] = fit_preprocessor(train, seed, options);
    plan = std::move(p);
    write_text(plan_path, plan_to_json(plan).dump(2) + "\n");
    fitted = "1";
    std::cerr << "fit: kept " << plan.kept_columns.size() << " of "
              << train.n_cols() << " columns, dropped "
              << report.dropped_rows_missingness.size() << " training rows\n";
  } else {
    plan = plan_from_json(read_json(plan_path));
  }

  std::string applied = "";
  Index out_rows = 0;
  if (!apply_path.empty()) {
    if (out_path.empty()) {
      throw ValidationError("preprocess: --out is required with --apply");
    }
    const SurvivalDataset ds = load_csv(apply_path);
    auto [processed, report] = apply_preprocessor(plan, ds);
    save_csv(processed, out_path);
    out_rows = processed.n_rows();
    applied = out_path;
    std::cerr << "apply: excluded " << report.dropped_rows_outlier.size()
              << " outlier rows, " << report.dropped_rows_nonpositive.size()
              << " nonpositive rows\n";
  }
  std::cout << "command=preprocess fitted=" << fitted << " plan=" << plan_path
            << " kept_columns=" << plan.kept_columns.size();
  if (!applied.empty()) std::cout << " out=" << applied << " rows=" << out_rows;
  std::cout << "\n";
  return 0;
}

int run_fit(const std::string& kind_name, const std::string& params_path,
            const std::string& data_path, const std::string& out_path,
            std::uint64_t seed) {
  const ModelKind kind = model_kind_from_string(kind_name);
  const HyperParams params =
      params_path.empty() ? HyperParams::object() : read_json(params_path);
  const SurvivalDataset ds = load_csv(data_path);
  if (!ds.features.allFinite()) {
    throw ValidationError("fit: data still has missing values; run preprocess first");
  }
  const auto model =
      fit_model(kind, params, ds.features, ds.time, ds.event, ds.column_names, seed);
  write_text(out_path, model->to_json().dump() + "\n");
  std::cout << "command=fit model=" << kind_name << " n=" << ds.n_rows()
            << " p=" << ds.n_cols() << " out=" << out_path << "\n";
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 double tau_flag, const std::vector<double>& fractions,
                 const std::string& train_path) {
  const auto model = model_from_json(read_json(model_path));
  const SurvivalDataset ds = load_csv(data_path);
  const Vector risk = model->predict_risk(ds.features);

  Scalar tau = tau_flag;
  if (!(tau > 0)) {
    std::vector<Scalar> times(ds.time.data(), ds.time.data() + ds.time.size());
    std::sort(times.begin(), times.end());
    Index idx = static_cast<Index>(std::floor(0.95 * static_cast<Scalar>(ds.n_rows() - 1)));
    tau = times[static_cast<std::size_t>(std::clamp<Index>(idx, 0, ds.n_rows() - 1))];
  }

  std::ostringstream line;
  line << "command=evaluate n=" << ds.n_rows() << " events=" << ds.event.sum()
       << " tau=" << num(tau);
  line << " harrell_c=" << num(harrell_c_fast(ds.time, ds.event, risk));

  if (!train_path.empty()) {
    const SurvivalDataset train = load_csv(train_path);
    const Vector train_risk = model->predict_risk(train.features);
    const Scalar c_train = harrell_c_fast(train.time, train.event, train_risk);
    const Scalar c_test = harrell_c_fast(ds.time, ds.event, risk);
    line << " uno_c=" << num(uno_c(train.time, train.event, ds.time, ds.event, risk, tau));
    line << " delta_c=" << num(delta_c(c_train, c_test));
  } else {
    // Without a training split the evaluation data doubles as the censoring
    // reference for Uno's C.
    line << " uno_c=" << num(uno_c(ds.time, ds.event, ds.time, ds.event, risk, tau));
  }

  for (double fraction : fractions) {
    char tag[24];
    std::snprintf(tag, sizeof(tag), "top%g", fraction * 100.0);
    try {
      const GroupMetrics gm =
          top_fraction_metrics(ds.time, ds.event, risk, fraction, tau);
      line << " sensitivity_" << tag << "=" << num(gm.sensitivity)
           << " specificity_" << tag << "=" << num(gm.specificity)
           << " fpr_" << tag << "=" << num(gm.fpr) << " fnr_" << tag << "="
           << num(gm.fnr) << " hazard_ratio_" << tag << "=" << num(gm.hazard_ratio)
           << " delta_rmst_" << tag << "=" << num(gm.delta_rmst) << " logrank_p_"
           << tag << "=" << num(gm.logrank_p);
    } catch (const ValidationError& e) {
      std::cerr << "group metrics at fraction " << fraction
                << " unavailable: " << e.what() << "\n";
    }
  }
  std::cout << line.str() << "\n";
  return 0;
}

int run_cv(const std::string& config_path, const std::string& out_dir, int threads) {
  ExperimentConfig config = config_from_json(read_json(config_path));
  if (threads > 0) config.threads = threads;
  const SurvivalDataset ds = load_experiment_dataset(config);
  const BenchmarkReport report = run_nested_cv(config, ds);
  write_report_files(report, config, out_dir);
  int invalid = 0;
  for (const auto& fr : report.folds) {
    if (!fr.valid) ++invalid;
  }
  std::cout << "command=cv rows=" << report.dataset_rows << " fits=" << report.total_fits
            << " folds=" << report.folds.size() << " invalid=" << invalid
            << " out=" << out_dir << "\n";
  return 0;
}

int run_scale(const std::string& config_path, const std::vector<Index>& sizes,
              const std::string& out_dir, int threads) {
  ExperimentConfig config = config_from_json(read_json(config_path));
  if (threads > 0) config.threads = threads;
  if (sizes.empty()) throw ValidationError("scale: at least one size");
  const SurvivalDataset ds = load_experiment_dataset(config);
  const std::vector<BenchmarkReport> reports = scaling_experiment(config, sizes, ds);

  std::filesystem::create_directories(out_dir);
  std::string timing = "model,feature_set,size,fold,seconds\n";
  int total_fits = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const std::string sub = out_dir + "/size_" + std::to_string(sizes[s]);
    write_report_files(reports[s], config, sub);
    total_fits += reports[s].total_fits;
    for (const auto& fr : reports[s].folds) {
      if (!fr.valid) continue;
      timing += to_string(fr.kind);
      timing += ',';
      timing += fr.feature_set;
      timing += ',';
      timing += std::to_string(fr.size);
      timing += ',';
      timing += std::to_string(fr.outer_fold);
      timing += ',';
      timing += num(fr.fit_time_seconds);
      timing += '\n';
    }
  }
  write_text(out_dir + "/timing.csv", timing);
  write_text(out_dir + "/cost_thresholds.csv", cost_thresholds_csv(config.cost));
  std::cout << "command=scale sizes=" << sizes.size() << " fits=" << total_fits
            << " out=" << out_dir << "\n";
  return 0;
}

int run_report(const std::string& in_dir, const std::string& format) {
  std::ifstream in(in_dir + "/results.csv");
  if (!in) throw ValidationError("report: cannot open " + in_dir + "/results.csv");
  std::string line;
  std::getline(in, line);  // header
  // (model, feature_set, metric) -> values across folds
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<Scalar>> acc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ValidationError("report: malformed results.csv");
    acc[{fields[0], fields[1], fields[3]}].push_back(std::stod(fields[4]));
  }

  struct Row {
    std::string model, feature_set, metric;
    Scalar mean, ci_lo, ci_hi;
    std::size_t k;
  };
  std::vector<Row> rows;
  for (const auto& [key, values] : acc) {
    Scalar mean = 0;
    for (Scalar v : values) mean += v;
    mean /= static_cast<Scalar>(values.size());
    Scalar ss_ = 0;
    for (Scalar v : values) ss_ += (v - mean) * (v - mean);
    const Scalar sd =
        values.size() > 1 ? std::sqrt(ss_ / static_cast<Scalar>(values.size() - 1)) : 0;
    const Scalar half = 1.96 * sd / std::sqrt(static_cast<Scalar>(values.size()));
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), mean,
                    mean - half, mean + half, values.size()});
  }

  if (format == "csv") {
    std::cout << "model,feature_set,metric,mean,ci_lo,ci_hi,k\n";
    for (const Row& r : rows) {
      std::cout << r.model << ',' << r.feature_set << ',' << r.metric << ','
                << num(r.mean) << ',' << num(r.ci_lo) << ',' << num(r.ci_hi) << ','
                << r.k << "\n";
    }
  } else if (format == "json") {
    nlohmann::json j;
    for (const Row& r : rows) {
      j[r.feature_set][r.model][r.metric] = {
          {"mean", r.mean}, {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi}, {"k", r.k}};
    }
    std::cout << j.dump(2) << "\n";
  } else {
    throw ValidationError("report: format must be csv or json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survbench: survival models, metrics and benchmark harness"};
  app.require_subcommand(1);

  std::string spec_path, out_path, oracle_path;
  auto* synth = app.add_subcommand("synth", "generate a synthetic survival dataset");
  synth->add_option("--spec", spec_path, "synthetic spec JSON")->required();
  synth->add_option("--out", out_path, "output CSV")->required();
  synth->add_option("--oracle", oracle_path, "also write the true risk per row");

  std::string train_path, apply_path, plan_path, pre_out;
  std::vector<std::string> biochemical;
  std::uint64_t pre_seed = 42;
  auto* preprocess = app.add_subcommand("preprocess", "fit and/or apply a preprocessing plan");
  preprocess->add_option("--train", train_path, "training fold CSV (fits the plan)");
  preprocess->add_option("--apply", apply_path, "CSV to transform with the plan");
  preprocess->add_option("--plan", plan_path, "plan JSON (written when fitting, read otherwise)")
      ->required();
  preprocess->add_option("--out", pre_out, "output CSV for --apply");
  preprocess->add_option("--biochemical", biochemical, "biochemical column names")
      ->delimiter(',');
  preprocess->add_option("--seed", pre_seed, "imputer seed");

  std::string fit_kind, fit_params, fit_data, fit_out;
  std::uint64_t fit_seed = 42;
  auto* fit = app.add_subcommand("fit", "fit one model on a preprocessed CSV");
  fit->add_option("--model", fit_kind, "model kind")->required();
  fit->add_option("--params", fit_params, "hyperparameter JSON");
  fit->add_option("--data", fit_data, "training CSV")->required();
  fit->add_option("--out", fit_out, "model JSON output")->required();
  fit->add_option("--seed", fit_seed, "fit seed");

  std::string eval_model, eval_data, eval_train;
  double eval_tau = 0;
  std::vector<double> eval_fractions{0.1, 0.2};
  auto* evaluate = app.add_subcommand("evaluate", "score a fitted model on a CSV");
  evaluate->add_option("--model", eval_model, "model JSON")->required();
  evaluate->add_option("--data", eval_data, "evaluation CSV")->required();
  evaluate->add_option("--tau", eval_tau, "metric horizon (default: 95th time percentile)");
  evaluate->add_option("--fractions", eval_fractions, "top-risk fractions")->delimiter(',');
  evaluate->add_option("--train", eval_train, "training CSV for Uno's C and delta C");

  std::string cv_config, cv_out;
  int cv_threads = 0;
  auto* cv = app.add_subcommand("cv", "nested cross-validation benchmark");
  cv->add_option("--config", cv_config, "experiment config JSON")->required();
  cv->add_option("--out", cv_out, "output directory")->required();
  cv->add_option("--threads", cv_threads, "worker threads (default from config)");

  std::string scale_config, scale_out;
  std::vector<Index> scale_sizes;
  int scale_threads = 0;
  auto* scale = app.add_subcommand("scale", "sample-size scaling experiment");
  scale->add_option("--config", scale_config, "experiment config JSON")->required();
  scale->add_option("--sizes", scale_sizes, "subsample sizes")->delimiter(',')->required();
  scale->add_option("--out", scale_out, "output directory")->required();
  scale->add_option("--threads", scale_threads, "worker threads (default from config)");

  std::string report_in, report_format = "csv";
  auto* report = app.add_subcommand("report", "aggregate a results directory");
  report->add_option("--in", report_in, "cv/scale output directory")->required();
  report->add_option("--format", report_format, "csv or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(spec_path, out_path, oracle_path);
    if (preprocess->parsed()) {
      if (train_path.empty() && apply_path.empty()) {
        throw ValidationError("preprocess: nothing to do, give --train and/or --apply");
      }
      return run_preprocess(train_path, apply_path, plan_path, pre_out, biochemical,
                            pre_seed);
    }
    if (fit->parsed()) return run_fit(fit_kind, fit_params, fit_data, fit_out, fit_seed);
    if (evaluate->parsed()) {
      return run_evaluate(eval_model, eval_data, eval_tau, eval_fractions, eval_train);
    }
    if (cv->parsed()) return run_cv(cv_config, cv_out, cv_threads);
    if (scale->parsed()) return run_scale(scale_config, scale_sizes, scale_out, scale_threads);
    if (report->parsed()) return run_report(report_in, report_format);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
