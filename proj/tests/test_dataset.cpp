#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "survbench/dataset.hpp"
#include "survbench/metrics.hpp"

using namespace survbench;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_csv parses a small file") {
  const std::string path =
      write_temp("ds_small.csv", "time,event,x\n1.0,1,0.5\n2.0,0,0.7\n");
  const SurvivalDataset ds = load_csv(path);
  CHECK(ds.n_rows() == 2);
  CHECK(ds.n_cols() == 1);
  CHECK(ds.column_names[0] == "x");
  CHECK(ds.column_kinds[0] == ColumnKind::Continuous);
  CHECK(ds.time[0] == 1.0);
  CHECK(ds.event[1] == 0);
  CHECK(ds.features(1, 0) == 0.7);
}

TEST_CASE("load_csv keeps missing cells and row count") {
  const std::string path =
      write_temp("ds_missing.csv", "time,event,x\n1.0,1,\n2.0,0,0.7\n");
  const SurvivalDataset ds = load_csv(path);
  CHECK(ds.n_rows() == 2);
  CHECK(is_missing(ds.features(0, 0)));
  CHECK(ds.features(1, 0) == 0.7);
}

TEST_CASE("load_csv infers boolean columns from observed values") {
  const std::string path =
      write_temp("ds_bool.csv", "time,event,b,x\n1,1,0,1\n2,0,1,2\n3,1,,1\n");
  const SurvivalDataset ds = load_csv(path);
  CHECK(ds.column_kinds[0] == ColumnKind::Boolean);
  CHECK(ds.column_kinds[1] == ColumnKind::Continuous);
}

TEST_CASE("load_csv validation errors") {
  CHECK_THROWS_AS(load_csv(write_temp("ds_t.csv", "time,event,x\n-1,1,0.5\n")),
                  ValidationError);
  CHECK_THROWS_AS(load_csv(write_temp("ds_e.csv", "time,event,x\n1,2,0.5\n")),
                  ValidationError);
  CHECK_THROWS_AS(load_csv(write_temp("ds_short.csv", "time,event,x\n1,1\n")),
                  ValidationError);
  CHECK_THROWS_AS(load_csv(write_temp("ds_nohdr.csv", "t,e,x\n1,1,0.5\n")),
                  ValidationError);
  // row number appears in the message
  try {
    load_csv(write_temp("ds_row.csv", "time,event,x\n1,1,0.5\n-2,1,0.5\n"));
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("csv round trip is bit exact") {
  SurvivalDataset ds;
  ds.column_names = {"x", "b"};
  ds.column_kinds = {ColumnKind::Continuous, ColumnKind::Boolean};
  ds.features.resize(3, 2);
  ds.features << 0.1234567890123456789, 1, missing_value(), 0, -1e-17, 1;
  ds.time.resize(3);
  ds.time << 1.5, 2.25, 3.125;
  ds.event.resize(3);
  ds.event << 1, 0, 1;

  const std::string path =
      (std::filesystem::temp_directory_path() / "roundtrip.csv").string();
  save_csv(ds, path);
  const SurvivalDataset back = load_csv(path);
  REQUIRE(back.n_rows() == 3);
  for (Index i = 0; i < 3; ++i) {
    CHECK(back.time[i] == ds.time[i]);
    CHECK(back.event[i] == ds.event[i]);
    for (Index j = 0; j < 2; ++j) {
      if (is_missing(ds.features(i, j))) {
        CHECK(is_missing(back.features(i, j)));
      } else {
        CHECK(back.features(i, j) == ds.features(i, j));
      }
    }
  }
}

TEST_CASE("make_folds partitions evenly and deterministically") {
  const FoldAssignment fa = make_folds(10, 5, 7);
  std::vector<int> counts(5, 0);
  for (int f : fa.fold_of) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++counts[static_cast<std::size_t>(f)];
  }
  for (int c : counts) CHECK(c == 2);

  const FoldAssignment fa2 = make_folds(10, 5, 7);
  CHECK(fa.fold_of == fa2.fold_of);
  const FoldAssignment fa3 = make_folds(10, 5, 8);
  CHECK(fa.fold_of != fa3.fold_of);

  // sizes differ by at most one when k does not divide n
  const FoldAssignment fb = make_folds(11, 3, 1);
  std::vector<int> cb(3, 0);
  for (int f : fb.fold_of) ++cb[static_cast<std::size_t>(f)];
  const auto [mn, mx] = std::minmax_element(cb.begin(), cb.end());
  CHECK(*mx - *mn <= 1);

  CHECK_THROWS_AS(make_folds(3, 5, 0), ValidationError);
  CHECK_THROWS_AS(make_folds(10, 1, 0), ValidationError);
}

TEST_CASE("subsample keeps schema, order and uniqueness") {
  SynthSpec spec;
  spec.n_rows = 50;
  spec.n_continuous = 2;
  spec.n_boolean = 1;
  LinearRisk risk;
  risk.beta = Vector::Zero(3);
  spec.risk = risk;
  spec.seed = 3;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  SUBCASE("n equals n_rows preserves everything") {
    const SurvivalDataset all = subsample(ds, 50, 11);
    CHECK(all.time == ds.time);
    CHECK(all.features == ds.features);
  }
  SUBCASE("rows are a subset with multiplicity 1, original order") {
    const SurvivalDataset sub = subsample(ds, 20, 11);
    CHECK(sub.n_rows() == 20);
    std::set<Scalar> seen;
    Index prev = -1;
    for (Index i = 0; i < sub.n_rows(); ++i) {
      Index match = -1;
      for (Index r = 0; r < ds.n_rows(); ++r) {
        if (ds.time[r] == sub.time[i] && ds.features.row(r) == sub.features.row(i)) {
          match = r;
          break;
        }
      }
      REQUIRE(match >= 0);
      CHECK(match > prev);  // original relative order
      prev = match;
    }
  }
  SUBCASE("n = 1 works, errors out of range") {
    CHECK(subsample(ds, 1, 5).n_rows() == 1);
    CHECK_THROWS_AS(subsample(ds, 51, 5), ValidationError);
    CHECK_THROWS_AS(subsample(ds, 0, 5), ValidationError);
  }
}

TEST_CASE("generate_synthetic determinism and basics") {
  SynthSpec spec;
  spec.n_rows = 200;
  spec.n_continuous = 3;
  spec.n_boolean = 2;
  LinearRisk risk;
  risk.beta = Vector::Zero(5);
  risk.beta << 1.0, -0.5, 0.25, 0.5, -0.25;
  spec.risk = risk;
  spec.baseline_rate = 0.2;
  spec.target_event_fraction = 0.5;
  spec.seed = 99;

  const SynthResult a = generate_synthetic(spec);
  const SynthResult b = generate_synthetic(spec);
  CHECK(a.data.time == b.data.time);
  CHECK(a.data.event == b.data.event);
  CHECK(a.data.features == b.data.features);
  CHECK(a.oracle_risk == b.oracle_risk);
  for (Index i = 0; i < a.data.n_rows(); ++i) CHECK(a.data.time[i] > 0);
}

TEST_CASE("zero beta gives flat oracle risk and C = 0.5") {
  SynthSpec spec;
  spec.n_rows = 300;
  spec.n_continuous = 2;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(2);
  spec.risk = risk;
  spec.seed = 5;
  const SynthResult r = generate_synthetic(spec);
  CHECK(r.oracle_risk.minCoeff() == r.oracle_risk.maxCoeff());
  CHECK(harrell_c(r.data.time, r.data.event, r.oracle_risk) == doctest::Approx(0.5));
}

TEST_CASE("oracle risk discriminates when beta is nonzero, no censoring") {
  SynthSpec spec;
  spec.n_rows = 5000;
  spec.n_continuous = 2;
  spec.n_boolean = 1;
  LinearRisk risk;
  risk.beta = Vector::Zero(3);
  risk.beta << 0.8, -0.4, 0.5;
  spec.risk = risk;
  spec.target_event_fraction = 1.0;
  spec.seed = 17;
  const SynthResult r = generate_synthetic(spec);
  CHECK(r.data.event.sum() == 5000);
  CHECK(harrell_c_fast(r.data.time, r.data.event, r.oracle_risk) > 0.5);
}

TEST_CASE("censoring calibration hits the target event fraction") {
  SynthSpec spec;
  spec.n_rows = 10000;
  spec.n_continuous = 3;
  spec.n_boolean = 2;
  spec.risk = NonlinearRisk{};
  spec.baseline_rate = 0.1;
  spec.target_event_fraction = 0.3;
  spec.seed = 2024;
  const SynthResult r = generate_synthetic(spec);
  const Scalar fraction =
      static_cast<Scalar>(r.data.event.sum()) / static_cast<Scalar>(r.data.n_rows());
  CHECK(fraction == doctest::Approx(0.3).epsilon(0.0667));  // within +-0.02
}

TEST_CASE("synthetic spec validation") {
  SynthSpec spec;
  spec.n_rows = 10;
  spec.n_continuous = 1;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(2);  // wrong length
  spec.risk = risk;
  CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);

  spec.risk = NonlinearRisk{};  // needs 3 continuous + 2 boolean
  CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);

  LinearRisk ok;
  ok.beta = Vector::Zero(1);
  spec.risk = ok;
  spec.target_event_fraction = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
}
