#ifndef SURVBENCH_MLP_HPP
#define SURVBENCH_MLP_HPP

#include <string>
#include <vector>

#include "survbench/common.hpp"

namespace survbench {

struct MlpHyperparams {
  int num_layers = 2;
  int layer_size = 64;
  Scalar learning_rate = 0.001;
  Scalar dropout = 0.2;       // in [0,1)
  int batch_size = 50000;     // capped at n
  int lr_patience = 5;        // reduce-on-plateau epochs; stop after 2 reductions
  int max_epochs = 200;
  std::uint64_t seed = 0;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

struct BatchNormLayer {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;  // stays positive; momentum 0.9
};

/// Blocks of dense -> batch norm -> ReLU -> dropout, then a bias-free linear
/// map to the scalar risk score. Evaluation mode uses running statistics and
/// no dropout.
struct MlpModel {
  std::vector<DenseLayer> dense;
  std::vector<BatchNormLayer> bn;
  Vector output_weight;
  std::vector<std::string> feature_names;
  std::vector<Scalar> epoch_loss;  // full-train eval loss per epoch
  int zero_event_batches = 0;

  Index input_size() const { return dense.empty() ? 0 : dense.front().weight.cols(); }
};

/// Gradients of the eval-mode loss for every parameter, same shapes as the model.
struct MlpGradients {
  std::vector<Matrix> d_weight;
  std::vector<Vector> d_bias;
  std::vector<Vector> d_gamma;
  std::vector<Vector> d_beta;
  Vector d_output_weight;
};

/// Glorot-uniform weights from the seeded generator; biases 0, batch-norm
/// scale 1 / shift 0, running mean 0 / variance 1.
MlpModel init_mlp(Index p, const MlpHyperparams& hp);

/// Minibatch negative mean partial log-likelihood (risk sets within the
/// batch), Adam updates, reduce-on-plateau learning rate. Batches are
/// stratified on event status so each one carries events.
MlpModel fit_mlp(const Matrix& X, const Vector& time, const IntVector& event,
                 const MlpHyperparams& hp, std::vector<std::string> feature_names = {});

/// Evaluation-mode forward pass.
Vector predict(const MlpModel& model, const Matrix& X);

/// Eval-mode loss (-l/n) and its backpropagated parameter gradients;
/// the finite-difference checks drive this entry point.
Scalar mlp_loss(const MlpModel& model, const Matrix& X, const Vector& time,
                const IntVector& event);
MlpGradients mlp_loss_gradients(const MlpModel& model, const Matrix& X,
                                const Vector& time, const IntVector& event);

/// One Adam update (decay 0.9/0.999, stabilizer 1e-8, bias correction at
/// step t >= 1).
template <typename T>
void adam_step(T& param, const T& grad, T& m, T& v, int t, Scalar lr) {
  m = 0.9 * m + 0.1 * grad;
  v = (0.999 * v.array() + 0.001 * grad.array().square()).matrix();
  const Scalar m_corr = 1.0 - std::pow(0.9, t);
  const Scalar v_corr = 1.0 - std::pow(0.999, t);
  param.array() -=
      lr * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + 1e-8);
}

}  // namespace survbench

#endif
