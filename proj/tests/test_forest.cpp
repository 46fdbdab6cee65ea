#include <doctest.h>

#include "survbench/dataset.hpp"
#include "survbench/forest.hpp"
#include "survbench/metrics.hpp"

using namespace survbench;

TEST_CASE("logrank split statistic anchors") {
  SUBCASE("identical experience scores zero") {
    const std::vector<Scalar> t{1, 2, 3};
    const std::vector<int> e{1, 0, 1};
    CHECK(logrank_split_statistic(t, e, t, e) == doctest::Approx(0.0));
  }
  SUBCASE("separated groups") {
    CHECK(logrank_split_statistic({1, 2}, {1, 1}, {3, 4}, {1, 1}) ==
          doctest::Approx(49.0 / 17.0).epsilon(1e-12));
    // symmetric in the group order
    CHECK(logrank_split_statistic({3, 4}, {1, 1}, {1, 2}, {1, 1}) ==
          doctest::Approx(49.0 / 17.0).epsilon(1e-12));
  }
  SUBCASE("no events means zero variance and zero statistic") {
    CHECK(logrank_split_statistic({1, 2}, {0, 0}, {3, 4}, {0, 0}) ==
          doctest::Approx(0.0));
  }
  SUBCASE("empty side is an error") {
    CHECK_THROWS_AS(logrank_split_statistic({}, {}, {1}, {1}), ValidationError);
  }
}

TEST_CASE("logrank split agrees with the two-sample test statistic") {
  // independent implementation cross-check on random splits
  SynthSpec spec;
  spec.n_rows = 60;
  spec.n_continuous = 1;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Ones(1);
  spec.risk = risk;
  spec.target_event_fraction = 0.6;
  spec.seed = 77;
  const SurvivalDataset ds = generate_synthetic(spec).data;
  for (Index cut : {15, 30, 45}) {
    std::vector<Scalar> tl, tr;
    std::vector<int> el, er;
    Vector vl(cut), vr(ds.n_rows() - cut);
    IntVector il(cut), ir(ds.n_rows() - cut);
    for (Index i = 0; i < ds.n_rows(); ++i) {
      if (i < cut) {
        tl.push_back(ds.time[i]);
        el.push_back(ds.event[i]);
        vl[i] = ds.time[i];
        il[i] = ds.event[i];
      } else {
        tr.push_back(ds.time[i]);
        er.push_back(ds.event[i]);
        vr[i - cut] = ds.time[i];
        ir[i - cut] = ds.event[i];
      }
    }
    const Scalar split_stat = logrank_split_statistic(tl, el, tr, er);
    const LogrankResult test_stat = logrank_test(vl, il, vr, ir);
    CHECK(split_stat == doctest::Approx(test_stat.statistic).epsilon(1e-12));
  }
}

TEST_CASE("nelson-aalen hand anchor") {
  const std::vector<Scalar> grid{1, 2, 3};
  const std::vector<Scalar> chf = nelson_aalen({1, 2, 3}, {1, 1, 1}, grid);
  REQUIRE(chf.size() == 3);
  CHECK(chf[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(chf[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(chf[2] == doctest::Approx(11.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("hand-built root tree scores the summed nelson-aalen") {
  RsfModel model;
  model.event_time_grid = {1, 2, 3};
  model.n_features = 2;
  RsfTree tree;
  RsfNode root;
  root.chf = nelson_aalen({1, 2, 3}, {1, 1, 1}, model.event_time_grid);
  tree.nodes.push_back(root);
  model.trees.push_back(tree);

  const Matrix X = Matrix::Random(4, 2);
  const Vector scores = predict_mortality(model, X);
  for (Index i = 0; i < 4; ++i) {
    CHECK(scores[i] == doctest::Approx(3.0).epsilon(1e-12));  // 1/3 + 5/6 + 11/6
  }

  // duplicating a tree changes nothing (averaging)
  model.trees.push_back(tree);
  CHECK(predict_mortality(model, X)[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("root-only forest assigns one shared score") {
  SynthSpec spec;
  spec.n_rows = 80;
  spec.n_continuous = 2;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Ones(2);
  spec.risk = risk;
  spec.target_event_fraction = 0.7;
  spec.seed = 5;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  RsfHyperparams hp;
  hp.n_estimators = 3;
  hp.max_depth = 0;  // leaves only
  hp.seed = 1;
  const RsfModel model = fit_rsf(ds.features, ds.time, ds.event, hp);
  const Vector scores = predict_mortality(model, ds.features);
  for (Index i = 1; i < scores.size(); ++i) {
    CHECK(scores[i] == doctest::Approx(scores[0]));
  }
}

TEST_CASE("forests are deterministic given the seed") {
  SynthSpec spec;
  spec.n_rows = 150;
  spec.n_continuous = 3;
  spec.n_boolean = 1;
  LinearRisk risk;
  risk.beta = Vector::Zero(4);
  risk.beta << 1.0, -0.5, 0.2, 0.4;
  spec.risk = risk;
  spec.target_event_fraction = 0.6;
  spec.seed = 6;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  RsfHyperparams hp;
  hp.n_estimators = 10;
  hp.max_depth = 3;
  hp.min_node_size = 10;
  hp.seed = 42;
  const RsfModel a = fit_rsf(ds.features, ds.time, ds.event, hp);
  const RsfModel b = fit_rsf(ds.features, ds.time, ds.event, hp);
  CHECK(predict_mortality(a, ds.features) == predict_mortality(b, ds.features));

  hp.seed = 43;
  const RsfModel c = fit_rsf(ds.features, ds.time, ds.event, hp);
  CHECK(predict_mortality(a, ds.features) != predict_mortality(c, ds.features));
}

TEST_CASE("leaf and ensemble hazards are non-decreasing over the grid") {
  SynthSpec spec;
  spec.n_rows = 200;
  spec.n_continuous = 2;
  spec.n_boolean = 1;
  LinearRisk risk;
  risk.beta = Vector::Zero(3);
  risk.beta << 0.7, 0.7, 0.3;
  spec.risk = risk;
  spec.target_event_fraction = 0.5;
  spec.seed = 9;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  RsfHyperparams hp;
  hp.n_estimators = 5;
  hp.max_depth = 4;
  hp.min_node_size = 15;
  hp.seed = 3;
  const RsfModel model = fit_rsf(ds.features, ds.time, ds.event, hp);
  for (const RsfTree& tree : model.trees) {
    for (const RsfNode& node : tree.nodes) {
      if (node.feature >= 0) continue;
      REQUIRE(node.chf.size() == model.event_time_grid.size());
      for (std::size_t k = 1; k < node.chf.size(); ++k) {
        CHECK(node.chf[k] >= node.chf[k - 1]);
      }
    }
  }
}

TEST_CASE("a strong single feature dominates the root splits") {
  SynthSpec spec;
  spec.n_rows = 300;
  spec.n_continuous = 4;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(4);
  risk.beta[0] = 2.5;  // only x0 carries signal
  spec.risk = risk;
  spec.target_event_fraction = 0.8;
  spec.seed = 31;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  RsfHyperparams hp;
  hp.n_estimators = 100;
  hp.max_depth = 2;
  hp.min_node_size = 20;
  hp.mtry = 3;
  hp.seed = 17;
  const RsfModel model = fit_rsf(ds.features, ds.time, ds.event, hp);
  int x0_roots = 0;
  for (const RsfTree& tree : model.trees) {
    if (!tree.nodes.empty() && tree.nodes[0].feature == 0) ++x0_roots;
  }
  CHECK(x0_roots > 50);
}
