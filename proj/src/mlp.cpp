#include "survbench/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survbench/cox_objective.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

constexpr Scalar kBnEps = 1e-5;

struct LayerCache {
  Matrix input;      // activation entering the dense layer
  Matrix pre_bn;     // dense output
  Matrix xhat;       // normalized pre-activation
  Vector inv_std;    // 1/sqrt(var + eps) actually used
  Matrix relu_out;   // after ReLU
  Matrix mask;       // dropout keep mask (already scaled); empty in eval mode
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix final_activation;
};

enum class Mode { Train, Eval };

Vector forward(const MlpModel& model, const Matrix& X, Mode mode, Scalar dropout,
               Rng* rng, ForwardCache* cache, std::vector<BatchNormLayer>* bn_update) {
  const std::size_t n_layers = model.dense.size();
  Matrix a = X;
  if (cache) cache->layers.resize(n_layers);

  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& dense = model.dense[l];
    const BatchNormLayer& bn = model.bn[l];
    Matrix z = a * dense.weight.transpose();
    z.rowwise() += dense.bias.transpose();

    Vector mean, var;
    if (mode == Mode::Train) {
      const Scalar m = static_cast<Scalar>(z.rows());
      mean = z.colwise().mean();
      var = (z.rowwise() - mean.transpose()).array().square().colwise().sum() / m;
      if (bn_update) {
        BatchNormLayer& upd = (*bn_update)[l];
        upd.running_mean = 0.9 * upd.running_mean + 0.1 * mean;
        upd.running_var = 0.9 * upd.running_var + 0.1 * var;
      }
    } else {
      mean = bn.running_mean;
      var = bn.running_var;
    }
    const Vector inv_std = (var.array() + kBnEps).rsqrt();
    Matrix xhat = (z.rowwise() - mean.transpose()).array().rowwise() *
                  inv_std.transpose().array();
    Matrix y = xhat.array().rowwise() * bn.gamma.transpose().array();
    y.rowwise() += bn.beta.transpose();

    Matrix r = y.cwiseMax(0.0);
    Matrix out = r;
    Matrix mask;
    if (mode == Mode::Train && dropout > 0) {
      const Scalar keep = 1.0 - dropout;
      mask.resize(r.rows(), r.cols());
      for (Index i = 0; i < r.rows(); ++i) {
        for (Index j = 0; j < r.cols(); ++j) {
          mask(i, j) = rng->uniform01() < keep ? 1.0 / keep : 0.0;
        }
      }
      out = r.cwiseProduct(mask);
    }

    if (cache) {
      LayerCache& lc = cache->layers[l];
      lc.input = std::move(a);
      lc.pre_bn = std::move(z);
      lc.xhat = std::move(xhat);
      lc.inv_std = inv_std;
      lc.relu_out = std::move(r);
      lc.mask = std::move(mask);
    }
    a = std::move(out);
  }

  if (cache) cache->final_activation = a;
  return a * model.output_weight;
}

MlpGradients zero_gradients(const MlpModel& model) {
  MlpGradients g;
  for (const DenseLayer& d : model.dense) {
    g.d_weight.push_back(Matrix::Zero(d.weight.rows(), d.weight.cols()));
    g.d_bias.push_back(Vector::Zero(d.bias.size()));
  }
  for (const BatchNormLayer& bn : model.bn) {
    g.d_gamma.push_back(Vector::Zero(bn.gamma.size()));
    g.d_beta.push_back(Vector::Zero(bn.beta.size()));
  }
  g.d_output_weight = Vector::Zero(model.output_weight.size());
  return g;
}

/// Backward pass through the cached forward; train mode backpropagates the
/// batch statistics, eval mode treats them as constants.
MlpGradients backward(const MlpModel& model, const ForwardCache& cache,
                      const Vector& d_eta, Mode mode) {
  MlpGradients g = zero_gradients(model);
  g.d_output_weight = cache.final_activation.transpose() * d_eta;
  Matrix da = d_eta * model.output_weight.transpose();

  for (std::size_t l = model.dense.size(); l-- > 0;) {
    const LayerCache& lc = cache.layers[l];
    const BatchNormLayer& bn = model.bn[l];

    if (lc.mask.size() > 0) da = da.cwiseProduct(lc.mask);
    Matrix dy = (lc.relu_out.array() > 0).cast<Scalar>() * da.array();

    g.d_gamma[l] = dy.cwiseProduct(lc.xhat).colwise().sum();
    g.d_beta[l] = dy.colwise().sum();

    Matrix dxhat = dy.array().rowwise() * bn.gamma.transpose().array();
    Matrix dz;
    if (mode == Mode::Train) {
      const Scalar m = static_cast<Scalar>(dy.rows());
      const Vector sum_dxhat = dxhat.colwise().sum();
      const Vector sum_dxhat_xhat = dxhat.cwiseProduct(lc.xhat).colwise().sum();
      dz = ((dxhat * m).rowwise() - sum_dxhat.transpose()).array() -
           (lc.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array());
      dz = dz.array().rowwise() * (lc.inv_std.transpose().array() / m);
    } else {
      dz = dxhat.array().rowwise() * lc.inv_std.transpose().array();
    }

    g.d_weight[l] = dz.transpose() * lc.input;
    g.d_bias[l] = dz.colwise().sum();
    da = dz * model.dense[l].weight;
  }
  return g;
}

}  // namespace

MlpModel init_mlp(Index p, const MlpHyperparams& hp) {
  if (p < 1) throw ValidationError("mlp: need at least one feature");
  if (hp.num_layers < 1) throw ValidationError("mlp: num_layers must be >= 1");
  if (hp.dropout < 0 || hp.dropout >= 1) {
    throw ValidationError("mlp: dropout must lie in [0,1)");
  }
  Rng rng(hp.seed);
  MlpModel model;
  Index fan_in = p;
  for (int l = 0; l < hp.num_layers; ++l) {
    const Index fan_out = hp.layer_size;
    const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
    DenseLayer dense;
    dense.weight.resize(fan_out, fan_in);
    for (Index i = 0; i < fan_out; ++i) {
      for (Index j = 0; j < fan_in; ++j) dense.weight(i, j) = rng.uniform(-limit, limit);
    }
    dense.bias = Vector::Zero(fan_out);
    model.dense.push_back(std::move(dense));

    BatchNormLayer bn;
    bn.gamma = Vector::Ones(fan_out);
    bn.beta = Vector::Zero(fan_out);
    bn.running_mean = Vector::Zero(fan_out);
    bn.running_var = Vector::Ones(fan_out);
    model.bn.push_back(std::move(bn));
    fan_in = fan_out;
  }
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(fan_in + 1));
  model.output_weight.resize(fan_in);
  for (Index j = 0; j < fan_in; ++j) model.output_weight[j] = rng.uniform(-limit, limit);
  return model;
}

Vector predict(const MlpModel& model, const Matrix& X) {
  if (X.cols() != model.input_size()) {
    throw ValidationError("mlp predict: feature count mismatch");
  }
  return forward(model, X, Mode::Eval, 0.0, nullptr, nullptr, nullptr);
}

Scalar mlp_loss(const MlpModel& model, const Matrix& X, const Vector& time,
                const IntVector& event) {
  const RiskSetIndex idx = build_risk_index(time, event);
  const Vector eta = predict(model, X);
  return -partial_log_likelihood(idx, eta) / static_cast<Scalar>(X.rows());
}

MlpGradients mlp_loss_gradients(const MlpModel& model, const Matrix& X,
                                const Vector& time, const IntVector& event) {
  const RiskSetIndex idx = build_risk_index(time, event);
  ForwardCache cache;
  const Vector eta =
      forward(model, X, Mode::Eval, 0.0, nullptr, &cache, nullptr);
  const ObjectiveOutput obj = grad_hess(idx, eta);
  const Vector d_eta = -obj.grad / static_cast<Scalar>(X.rows());
  return backward(model, cache, d_eta, Mode::Eval);
}

MlpModel fit_mlp(const Matrix& X, const Vector& time, const IntVector& event,
                 const MlpHyperparams& hp, std::vector<std::string> feature_names) {
  if (!X.allFinite()) throw ValidationError("mlp: X contains missing values");
  if (X.rows() != time.size()) throw ValidationError("mlp: X row count mismatch");
  const Index n = X.rows();
  const RiskSetIndex full_idx = build_risk_index(time, event);

  MlpModel model = init_mlp(X.cols(), hp);
  model.feature_names = std::move(feature_names);

  // Adam state per tensor; one shared step counter.
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b, m_g, v_g, m_be, v_be;
  for (const DenseLayer& d : model.dense) {
    m_w.push_back(Matrix::Zero(d.weight.rows(), d.weight.cols()));
    v_w.push_back(Matrix::Zero(d.weight.rows(), d.weight.cols()));
    m_b.push_back(Vector::Zero(d.bias.size()));
    v_b.push_back(Vector::Zero(d.bias.size()));
  }
  for (const BatchNormLayer& bn : model.bn) {
    m_g.push_back(Vector::Zero(bn.gamma.size()));
    v_g.push_back(Vector::Zero(bn.gamma.size()));
    m_be.push_back(Vector::Zero(bn.beta.size()));
    v_be.push_back(Vector::Zero(bn.beta.size()));
  }
  Vector m_out = Vector::Zero(model.output_weight.size());
  Vector v_out = Vector::Zero(model.output_weight.size());

  std::vector<Index> event_rows, censored_rows;
  for (Index i = 0; i < n; ++i) (event[i] ? event_rows : censored_rows).push_back(i);

  Rng rng(mix_seed(hp.seed, 0x747261696eULL));
  const Index batch_size = std::min<Index>(hp.batch_size, n);
  const int n_batches = static_cast<int>((n + batch_size - 1) / batch_size);

  Scalar lr = hp.learning_rate;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  int stall = 0, reductions = 0, adam_t = 0;

  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    rng.shuffle(event_rows);
    rng.shuffle(censored_rows);

    for (int b = 0; b < n_batches; ++b) {
      std::vector<Index> batch;
      for (std::size_t i = static_cast<std::size_t>(b); i < event_rows.size();
           i += static_cast<std::size_t>(n_batches)) {
        batch.push_back(event_rows[i]);
      }
      const std::size_t batch_events = batch.size();
      for (std::size_t i = static_cast<std::size_t>(b); i < censored_rows.size();
           i += static_cast<std::size_t>(n_batches)) {
        batch.push_back(censored_rows[i]);
      }
      if (batch_events == 0) {
        ++model.zero_event_batches;
        continue;
      }

      const Index bs = static_cast<Index>(batch.size());
      Matrix xb(bs, X.cols());
      Vector tb(bs);
      IntVector eb(bs);
      for (Index i = 0; i < bs; ++i) {
        xb.row(i) = X.row(batch[static_cast<std::size_t>(i)]);
        tb[i] = time[batch[static_cast<std::size_t>(i)]];
        eb[i] = event[batch[static_cast<std::size_t>(i)]];
      }

      ForwardCache cache;
      const Vector eta =
          forward(model, xb, Mode::Train, hp.dropout, &rng, &cache, &model.bn);
      const RiskSetIndex batch_idx = build_risk_index(tb, eb);
      const ObjectiveOutput obj = grad_hess(batch_idx, eta);
      const Vector d_eta = -obj.grad / static_cast<Scalar>(bs);
      const MlpGradients g = backward(model, cache, d_eta, Mode::Train);

      ++adam_t;
      for (std::size_t l = 0; l < model.dense.size(); ++l) {
        adam_step(model.dense[l].weight, g.d_weight[l], m_w[l], v_w[l], adam_t, lr);
        adam_step(model.dense[l].bias, g.d_bias[l], m_b[l], v_b[l], adam_t, lr);
        adam_step(model.bn[l].gamma, g.d_gamma[l], m_g[l], v_g[l], adam_t, lr);
        adam_step(model.bn[l].beta, g.d_beta[l], m_be[l], v_be[l], adam_t, lr);
      }
      adam_step(model.output_weight, g.d_output_weight, m_out, v_out, adam_t, lr);
    }

    const Vector eta_full = predict(model, X);
    const Scalar loss =
        -partial_log_likelihood(full_idx, eta_full) / static_cast<Scalar>(n);
    model.epoch_loss.push_back(loss);

    if (loss < best_loss) {
      best_loss = loss;
      stall = 0;
    } else if (++stall >= hp.lr_patience) {
      lr *= 0.1;
      stall = 0;
      if (++reductions >= 2) break;
    }
  }
  return model;
}

}  // namespace survbench
