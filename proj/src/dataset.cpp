#include "survbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "survbench/rng.hpp"

namespace survbench {

Index SurvivalDataset::column_index(const std::string& name) const {
  for (Index j = 0; j < n_cols(); ++j) {
    if (column_names[static_cast<std::size_t>(j)] == name) return j;
  }
  return -1;
}

void SurvivalDataset::validate() const {
  const Index n = n_rows();
  if (features.rows() != n || event.size() != n) {
    throw ValidationError("dataset: row counts of features/time/event disagree");
  }
  if (features.cols() != n_cols() ||
      column_kinds.size() != column_names.size()) {
    throw ValidationError("dataset: column metadata sizes disagree");
  }
  std::set<std::string> seen;
  for (const auto& name : column_names) {
    if (!seen.insert(name).second) {
      throw ValidationError("dataset: duplicate column name '" + name + "'");
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!(time[i] > 0)) {
      throw ValidationError("dataset: time must be > 0 at row " + std::to_string(i));
    }
    if (event[i] != 0 && event[i] != 1) {
      throw ValidationError("dataset: event must be 0 or 1 at row " + std::to_string(i));
    }
  }
  for (Index j = 0; j < n_cols(); ++j) {
    if (column_kinds[static_cast<std::size_t>(j)] != ColumnKind::Boolean) continue;
    for (Index i = 0; i < n; ++i) {
      const Scalar v = features(i, j);
      if (!is_missing(v) && v != 0.0 && v != 1.0) {
        throw ValidationError("dataset: boolean column '" +
                              column_names[static_cast<std::size_t>(j)] +
                              "' holds a non 0/1 value at row " + std::to_string(i));
      }
    }
  }
}

SurvivalDataset SurvivalDataset::select_rows(const std::vector<Index>& rows) const {
  SurvivalDataset out;
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  const Index m = static_cast<Index>(rows.size());
  out.features.resize(m, n_cols());
  out.time.resize(m);
  out.event.resize(m);
  for (Index i = 0; i < m; ++i) {
    out.features.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
    out.time[i] = time[rows[static_cast<std::size_t>(i)]];
    out.event[i] = event[rows[static_cast<std::size_t>(i)]];
  }
  return out;
}

SurvivalDataset SurvivalDataset::select_columns(const std::vector<std::string>& names) const {
  SurvivalDataset out;
  out.time = time;
  out.event = event;
  out.features.resize(n_rows(), static_cast<Index>(names.size()));
  Index k = 0;
  for (const auto& name : names) {
    const Index j = column_index(name);
    if (j < 0) throw ValidationError("dataset: no column named '" + name + "'");
    out.column_names.push_back(name);
    out.column_kinds.push_back(column_kinds[static_cast<std::size_t>(j)]);
    out.features.col(k++) = features.col(j);
  }
  return out;
}

std::vector<Index> FoldAssignment::test_rows(int fold) const {
  std::vector<Index> out;
  for (Index i = 0; i < n_rows; ++i) {
    if (fold_of[static_cast<std::size_t>(i)] == fold) out.push_back(i);
  }
  return out;
}

std::vector<Index> FoldAssignment::train_rows(int fold) const {
  std::vector<Index> out;
  for (Index i = 0; i < n_rows; ++i) {
    if (fold_of[static_cast<std::size_t>(i)] != fold) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Scalar parse_number(const std::string& field, Index row, const std::string& col) {
  Scalar v = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("csv: row " + std::to_string(row) + ", column '" + col +
                          "': cannot parse '" + field + "' as a number");
  }
  return v;
}

void format_number(std::string& out, Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

SurvivalDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: '" + path + "' is empty");
  const std::vector<std::string> header = split_line(line);

  Index time_col = -1, event_col = -1;
  std::vector<Index> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "time") {
      time_col = static_cast<Index>(j);
    } else if (header[j] == "event") {
      event_col = static_cast<Index>(j);
    } else {
      feature_cols.push_back(static_cast<Index>(j));
      feature_names.push_back(header[j]);
    }
  }
  if (time_col < 0 || event_col < 0) {
    throw ValidationError("csv: '" + path + "' must have 'time' and 'event' columns");
  }

  std::vector<std::vector<Scalar>> cols(feature_cols.size());
  std::vector<Scalar> times;
  std::vector<int> events;
  Index row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() && in.eof()) break;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("csv: row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    const std::string& tf = fields[static_cast<std::size_t>(time_col)];
    const std::string& ef = fields[static_cast<std::size_t>(event_col)];
    if (tf.empty() || ef.empty()) {
      throw ValidationError("csv: row " + std::to_string(row) +
                            ": time/event may not be missing");
    }
    const Scalar t = parse_number(tf, row, "time");
    if (!(t > 0)) {
      throw ValidationError("csv: row " + std::to_string(row) + ": time must be > 0");
    }
    const Scalar e = parse_number(ef, row, "event");
    if (e != 0.0 && e != 1.0) {
      throw ValidationError("csv: row " + std::to_string(row) + ": event must be 0 or 1");
    }
    times.push_back(t);
    events.push_back(static_cast<int>(e));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string& f = fields[static_cast<std::size_t>(feature_cols[k])];
      cols[k].push_back(f.empty() ? missing_value()
                                  : parse_number(f, row, feature_names[k]));
    }
  }

  SurvivalDataset ds;
  ds.column_names = feature_names;
  const Index n = static_cast<Index>(times.size());
  ds.time = Eigen::Map<const Vector>(times.data(), n);
  ds.event = Eigen::Map<const IntVector>(events.data(), n);
  ds.features.resize(n, static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    ds.features.col(static_cast<Index>(k)) =
        Eigen::Map<const Vector>(cols[k].data(), n);
    // Boolean iff every observed value is 0 or 1.
    bool boolean = true;
    for (Scalar v : cols[k]) {
      if (!is_missing(v) && v != 0.0 && v != 1.0) {
        boolean = false;
        break;
      }
    }
    ds.column_kinds.push_back(boolean ? ColumnKind::Boolean : ColumnKind::Continuous);
  }
  ds.validate();
  return ds;
}

void save_csv(const SurvivalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("csv: cannot write '" + path + "'");
  std::string line = "time,event";
  for (const auto& name : ds.column_names) {
    line += ',';
    line += name;
  }
  line += '\n';
  out << line;
  for (Index i = 0; i < ds.n_rows(); ++i) {
    line.clear();
    format_number(line, ds.time[i]);
    line += ',';
    line += std::to_string(ds.event[i]);
    for (Index j = 0; j < ds.n_cols(); ++j) {
      line += ',';
      const Scalar v = ds.features(i, j);
      if (!is_missing(v)) format_number(line, v);
    }
    line += '\n';
    out << line;
  }
}

FoldAssignment make_folds(Index n_rows, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("make_folds: k must be at least 2");
  if (static_cast<Index>(k) > n_rows) {
    throw ValidationError("make_folds: k exceeds the number of rows");
  }
  std::vector<Index> perm(static_cast<std::size_t>(n_rows));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(perm);

  FoldAssignment fa;
  fa.n_rows = n_rows;
  fa.k = k;
  fa.fold_of.resize(static_cast<std::size_t>(n_rows));
  for (std::size_t j = 0; j < perm.size(); ++j) {
    fa.fold_of[static_cast<std::size_t>(perm[j])] = static_cast<int>(j % static_cast<std::size_t>(k));
  }
  return fa;
}

SurvivalDataset subsample(const SurvivalDataset& ds, Index n, std::uint64_t seed) {
  if (n < 1 || n > ds.n_rows()) {
    throw ValidationError("subsample: n must be in [1, n_rows]");
  }
  std::vector<Index> perm(static_cast<std::size_t>(ds.n_rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first n entries are the sample.
  for (Index i = 0; i < n; ++i) {
    const std::uint64_t j =
        i + rng.uniform_int(static_cast<std::uint64_t>(ds.n_rows() - i));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> rows(perm.begin(), perm.begin() + n);
  std::sort(rows.begin(), rows.end());  // keep original relative order
  return ds.select_rows(rows);
}

namespace {

struct SynthDraw {
  Matrix features;
  Vector eta;
  Vector t_uniform;  // inverse-transform uniforms for event times
  Vector c_uniform;  // uniforms for censoring times
};

void validate_spec(const SynthSpec& spec) {
  if (spec.n_rows < 1) throw ValidationError("synthetic: n_rows must be positive");
  if (!(spec.target_event_fraction > 0) || spec.target_event_fraction > 1) {
    throw ValidationError("synthetic: target_event_fraction must lie in (0,1]");
  }
  if (!(spec.baseline_rate > 0)) {
    throw ValidationError("synthetic: baseline_rate must be positive");
  }
  if (const auto* lin = std::get_if<LinearRisk>(&spec.risk)) {
    if (lin->beta.size() != spec.n_continuous + spec.n_boolean) {
      throw ValidationError("synthetic: beta length must equal feature count");
    }
  } else {
    if (spec.n_continuous < 3 || spec.n_boolean < 2) {
      throw ValidationError(
          "synthetic: nonlinear risk needs at least 3 continuous and 2 boolean features");
    }
  }
}

SynthDraw draw_sample(const SynthSpec& spec, Index n, Rng& rng) {
  SynthDraw d;
  const Index p = spec.n_continuous + spec.n_boolean;
  d.features.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < spec.n_continuous; ++j) d.features(i, j) = rng.normal();
    for (int j = 0; j < spec.n_boolean; ++j) {
      d.features(i, spec.n_continuous + j) = static_cast<Scalar>(rng.bernoulli(0.5));
    }
  }
  if (const auto* lin = std::get_if<LinearRisk>(&spec.risk)) {
    d.eta = d.features * lin->beta;
  } else {
    d.eta.resize(n);
    const Index b0 = spec.n_continuous;
    for (Index i = 0; i < n; ++i) {
      const Scalar x0 = d.features(i, 0), x1 = d.features(i, 1), x2 = d.features(i, 2);
      const bool bx = d.features(i, b0) != d.features(i, b0 + 1);
      d.eta[i] = 1.5 * x0 * x1 + 1.0 * (x2 > 0 ? 1.0 : 0.0) + 0.5 * (bx ? 1.0 : 0.0);
    }
    const Scalar mean = d.eta.mean();
    const Scalar sd = n > 1 ? std::sqrt((d.eta.array() - mean).square().sum() / Scalar(n - 1)) : 0.0;
    if (sd > 0) d.eta = ((d.eta.array() - mean) / sd).matrix();
  }
  d.t_uniform.resize(n);
  for (Index i = 0; i < n; ++i) d.t_uniform[i] = rng.uniform01();
  d.c_uniform.resize(n);
  for (Index i = 0; i < n; ++i) d.c_uniform[i] = rng.uniform01();
  return d;
}

Vector event_times(const SynthSpec& spec, const SynthDraw& d) {
  return (-d.t_uniform.array().log() /
          (spec.baseline_rate * d.eta.array().exp()))
      .matrix();
}

/// Calibrates the censoring scale so that mean[T <= U*c] hits the target.
Scalar calibrate_censoring_scale(const Vector& t, const Vector& u, Scalar target) {
  auto realized = [&](Scalar c) {
    Index hits = 0;
    for (Index i = 0; i < t.size(); ++i) {
      if (t[i] <= u[i] * c) ++hits;
    }
    return static_cast<Scalar>(hits) / static_cast<Scalar>(t.size());
  };
  Scalar lo = 1e-12, hi = 1.0;
  int guard = 0;
  while (realized(hi) < target && guard++ < 200) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    if (realized(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
  validate_spec(spec);

  Scalar censor_scale = 0;
  const bool censored = spec.target_event_fraction < 1.0;
  if (censored) {
    Rng pilot_rng(mix_seed(spec.seed, 0x706c6f74ULL));
    const Index pilot_n = std::max<Index>(spec.n_rows, 20000);
    const SynthDraw pilot = draw_sample(spec, pilot_n, pilot_rng);
    censor_scale = calibrate_censoring_scale(event_times(spec, pilot),
                                             pilot.c_uniform,
                                             spec.target_event_fraction);
  }

  Rng rng(spec.seed);
  const SynthDraw d = draw_sample(spec, spec.n_rows, rng);
  const Vector t = event_times(spec, d);

  SynthResult out;
  out.oracle_risk = d.eta;
  SurvivalDataset& ds = out.data;
  ds.features = d.features;
  for (int j = 0; j < spec.n_continuous; ++j) {
    ds.column_names.push_back("x" + std::to_string(j));
    ds.column_kinds.push_back(ColumnKind::Continuous);
  }
  for (int j = 0; j < spec.n_boolean; ++j) {
    ds.column_names.push_back("b" + std::to_string(j));
    ds.column_kinds.push_back(ColumnKind::Boolean);
  }
  ds.time.resize(spec.n_rows);
  ds.event.resize(spec.n_rows);
  for (Index i = 0; i < spec.n_rows; ++i) {
    if (censored) {
      const Scalar c = d.c_uniform[i] * censor_scale;
      ds.time[i] = std::min(t[i], c);
      ds.event[i] = t[i] <= c ? 1 : 0;
    } else {
      ds.time[i] = t[i];
      ds.event[i] = 1;
    }
  }
  ds.validate();
  return out;
}

}  // namespace survbench
