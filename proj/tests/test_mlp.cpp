#include <doctest.h>

#include <cmath>

#include "survbench/dataset.hpp"
#include "survbench/mlp.hpp"
#include "survbench/rng.hpp"

using namespace survbench;

namespace {

void zero_network(MlpModel* model) {
  for (auto& d : model->dense) {
    d.weight.setZero();
    d.bias.setZero();
  }
  model->output_weight.setZero();
}

SurvivalDataset linear_synth(Index n, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_rows = n;
  spec.n_continuous = 4;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(4);
  risk.beta << 1.0, -0.8, 0.5, 0.0;
  spec.risk = risk;
  spec.target_event_fraction = 0.7;
  spec.seed = seed;
  return generate_synthetic(spec).data;
}

}  // namespace

TEST_CASE("init is deterministic and shaped correctly") {
  MlpHyperparams hp;
  hp.num_layers = 3;
  hp.layer_size = 8;
  hp.seed = 7;
  const MlpModel a = init_mlp(5, hp);
  const MlpModel b = init_mlp(5, hp);
  REQUIRE(a.dense.size() == 3);
  CHECK(a.dense[0].weight.rows() == 8);
  CHECK(a.dense[0].weight.cols() == 5);
  CHECK(a.dense[1].weight.cols() == 8);
  CHECK(a.output_weight.size() == 8);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(a.dense[l].weight == b.dense[l].weight);
    CHECK(a.dense[l].bias.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(a.bn[l].gamma.minCoeff() == 1.0);
    CHECK(a.bn[l].running_var.minCoeff() == 1.0);
  }
  hp.seed = 8;
  const MlpModel c = init_mlp(5, hp);
  CHECK(a.dense[0].weight != c.dense[0].weight);
}

TEST_CASE("zero network maps everything to zero") {
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 4;
  MlpModel model = init_mlp(3, hp);
  zero_network(&model);
  const Matrix X = Matrix::Random(6, 3);
  const Vector eta = predict(model, X);
  CHECK(eta.size() == 6);
  CHECK(eta.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("zero network loss equals the eta=0 baseline on the 3-row toy") {
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 4;
  MlpModel model = init_mlp(2, hp);
  zero_network(&model);
  Matrix X(3, 2);
  X << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6;
  Vector time(3);
  time << 1, 2, 3;
  IntVector event = IntVector::Ones(3);
  CHECK(mlp_loss(model, X, time, event) ==
        doctest::Approx(1.791759469228055 / 3.0).epsilon(1e-12));
}

TEST_CASE("first adam step with unit gradient moves by about -lr") {
  Vector param = Vector::Zero(3);
  Vector grad = Vector::Ones(3);
  Vector m = Vector::Zero(3), v = Vector::Zero(3);
  adam_step(param, grad, m, v, 1, 0.001);
  for (Index i = 0; i < 3; ++i) {
    CHECK(param[i] == doctest::Approx(-0.001).epsilon(1e-6));
  }
}

TEST_CASE("backprop matches central finite differences in eval mode") {
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 4;
  hp.seed = 13;
  MlpModel model = init_mlp(3, hp);
  // non-trivial running statistics and batch-norm parameters
  Rng rng(99);
  for (auto& bn : model.bn) {
    for (Index i = 0; i < bn.gamma.size(); ++i) {
      bn.gamma[i] = 0.8 + 0.4 * rng.uniform01();
      bn.beta[i] = 0.2 * rng.normal();
      bn.running_mean[i] = 0.3 * rng.normal();
      bn.running_var[i] = 0.5 + rng.uniform01();
    }
  }

  const Index n = 32;
  Matrix X(n, 3);
  Vector time(n);
  IntVector event(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
    time[i] = 1.0 + static_cast<Scalar>(rng.uniform_int(10));
    event[i] = rng.uniform01() < 0.3 ? 0 : 1;
  }

  const MlpGradients grads = mlp_loss_gradients(model, X, time, event);
  const Scalar h = 1e-5;
  auto fd_check = [&](Scalar* param, Scalar analytic) {
    const Scalar saved = *param;
    *param = saved + h;
    const Scalar up = mlp_loss(model, X, time, event);
    *param = saved - h;
    const Scalar down = mlp_loss(model, X, time, event);
    *param = saved;
    const Scalar fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(std::abs(fd), 1.0));
  };

  for (std::size_t l = 0; l < model.dense.size(); ++l) {
    for (Index i = 0; i < model.dense[l].weight.rows(); ++i) {
      for (Index j = 0; j < model.dense[l].weight.cols(); ++j) {
        fd_check(&model.dense[l].weight(i, j), grads.d_weight[l](i, j));
      }
      fd_check(&model.dense[l].bias[i], grads.d_bias[l][i]);
      fd_check(&model.bn[l].gamma[i], grads.d_gamma[l][i]);
      fd_check(&model.bn[l].beta[i], grads.d_beta[l][i]);
    }
  }
  for (Index i = 0; i < model.output_weight.size(); ++i) {
    fd_check(&model.output_weight[i], grads.d_output_weight[i]);
  }
}

TEST_CASE("evaluation is invariant to batch composition") {
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 8;
  hp.seed = 21;
  hp.max_epochs = 5;
  const SurvivalDataset ds = linear_synth(120, 3);
  const MlpModel model = fit_mlp(ds.features, ds.time, ds.event, hp);

  const Vector all = predict(model, ds.features);
  for (Index i = 0; i < ds.n_rows(); ++i) {
    const Vector one = predict(model, ds.features.row(i));
    CHECK(std::abs(one[0] - all[i]) < 1e-9);
  }
}

TEST_CASE("repeated prediction is identical and fitting is deterministic") {
  const SurvivalDataset ds = linear_synth(150, 4);
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 8;
  hp.seed = 5;
  hp.max_epochs = 10;
  const MlpModel a = fit_mlp(ds.features, ds.time, ds.event, hp);
  const MlpModel b = fit_mlp(ds.features, ds.time, ds.event, hp);
  CHECK(predict(a, ds.features) == predict(b, ds.features));
  CHECK(predict(a, ds.features) == predict(a, ds.features));
}

TEST_CASE("training reduces the loss on clear linear signal") {
  const SurvivalDataset ds = linear_synth(800, 11);
  MlpHyperparams hp;
  hp.num_layers = 2;
  hp.layer_size = 16;
  hp.seed = 19;
  hp.max_epochs = 60;
  hp.batch_size = 256;
  const MlpModel model = fit_mlp(ds.features, ds.time, ds.event, hp);
  REQUIRE(model.epoch_loss.size() >= 2);
  CHECK(model.epoch_loss.back() < model.epoch_loss.front() - 0.01);
}

TEST_CASE("stratified batching keeps events in every batch") {
  // heavy censoring and small batches would starve unstratified batches
  SynthSpec spec;
  spec.n_rows = 200;
  spec.n_continuous = 2;
  spec.n_boolean = 0;
  LinearRisk risk;
  risk.beta = Vector::Zero(2);
  risk.beta << 0.5, -0.5;
  spec.risk = risk;
  spec.target_event_fraction = 0.15;
  spec.seed = 23;
  const SurvivalDataset ds = generate_synthetic(spec).data;

  MlpHyperparams hp;
  hp.num_layers = 1;
  hp.layer_size = 4;
  hp.batch_size = 20;
  hp.max_epochs = 5;
  hp.seed = 2;
  const MlpModel model = fit_mlp(ds.features, ds.time, ds.event, hp);
  CHECK(model.zero_event_batches == 0);
}

TEST_CASE("batches without events are skipped and counted") {
  // 2 events across 5 batches: stratification cannot cover every batch
  Matrix X = Matrix::Random(50, 2);
  Vector time(50);
  IntVector event = IntVector::Zero(50);
  for (Index i = 0; i < 50; ++i) time[i] = 1.0 + static_cast<Scalar>(i);
  event[3] = 1;
  event[27] = 1;

  MlpHyperparams hp;
  hp.num_layers = 1;
  hp.layer_size = 4;
  hp.batch_size = 10;
  hp.max_epochs = 2;
  hp.seed = 9;
  const MlpModel model = fit_mlp(X, time, event, hp);
  CHECK(model.zero_event_batches == 2 * 3);  // 3 empty batches per epoch
  CHECK(model.epoch_loss.size() == 2);       // training still completed
}

TEST_CASE("single-row prediction uses running statistics") {
  MlpHyperparams hp;
  hp.num_layers = 1;
  hp.layer_size = 4;
  hp.seed = 3;
  MlpModel model = init_mlp(2, hp);
  Matrix row(1, 2);
  row << 0.5, -0.5;
  const Vector out = predict(model, row);
  CHECK(out.size() == 1);
  CHECK(std::isfinite(out[0]));
}

TEST_CASE("mlp input validation") {
  MlpHyperparams hp;
  CHECK_THROWS_AS(init_mlp(0, hp), ValidationError);
  hp.dropout = 1.0;
  CHECK_THROWS_AS(init_mlp(3, hp), ValidationError);
  hp.dropout = 0.2;
  hp.num_layers = 0;
  CHECK_THROWS_AS(init_mlp(3, hp), ValidationError);

  MlpHyperparams ok;
  const MlpModel model = init_mlp(3, ok);
  Matrix wrong(2, 5);
  CHECK_THROWS_AS(predict(model, wrong), ValidationError);
}
