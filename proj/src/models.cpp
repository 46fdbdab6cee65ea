#include "survbench/models.hpp"

#include <cmath>

#include "survbench/cox_linear.hpp"
#include "survbench/forest.hpp"
#include "survbench/gbt.hpp"
#include "survbench/mlp.hpp"

namespace survbench {

namespace {

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& x : j) v[i++] = x.get<Scalar>();
  return v;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<Scalar>();
  }
  return m;
}

class LinearCoxFitted : public FittedModel {
 public:
  LinearCoxFitted(ModelKind kind, CoxModel model) : kind_(kind), model_(std::move(model)) {}

  Vector predict_risk(const Matrix& X) const override {
    return survbench::predict_risk(model_, X);
  }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["feature_names"] = model_.feature_names;
    j["beta"] = vector_to_json(model_.beta);
    nlohmann::json baseline = nlohmann::json::array();
    for (const auto& [t, h] : model_.baseline) baseline.push_back({t, h});
    j["baseline"] = baseline;
    return j;
  }

  ModelKind kind() const override { return kind_; }

 private:
  ModelKind kind_;
  CoxModel model_;
};

class GbtFitted : public FittedModel {
 public:
  GbtFitted(ModelKind kind, GbtModel model) : kind_(kind), model_(std::move(model)) {}

  Vector predict_risk(const Matrix& X) const override { return predict(model_, X); }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["feature_names"] = model_.feature_names;
    j["n_features"] = model_.n_features;
    j["learning_rate"] = model_.learning_rate;
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& tree : model_.trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const TreeNode& nd : tree.nodes) {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value}});
      }
      trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j;
  }

  ModelKind kind() const override { return kind_; }

  const GbtModel& model() const { return model_; }

 private:
  ModelKind kind_;
  GbtModel model_;
};

class RsfFitted : public FittedModel {
 public:
  explicit RsfFitted(RsfModel model) : model_(std::move(model)) {}

  Vector predict_risk(const Matrix& X) const override {
    return predict_mortality(model_, X);
  }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["kind"] = to_string(ModelKind::Rsf);
    j["feature_names"] = model_.feature_names;
    j["n_features"] = model_.n_features;
    j["event_time_grid"] = model_.event_time_grid;
    nlohmann::json trees = nlohmann::json::array();
    for (const RsfTree& tree : model_.trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const RsfNode& nd : tree.nodes) {
        nlohmann::json node = {{"feature", nd.feature},
                               {"threshold", nd.threshold},
                               {"left", nd.left},
                               {"right", nd.right}};
        if (nd.feature < 0) node["chf"] = nd.chf;
        nodes.push_back(std::move(node));
      }
      trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j;
  }

  ModelKind kind() const override { return ModelKind::Rsf; }

 private:
  RsfModel model_;
};

class MlpFitted : public FittedModel {
 public:
  explicit MlpFitted(MlpModel model) : model_(std::move(model)) {}

  Vector predict_risk(const Matrix& X) const override { return predict(model_, X); }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["kind"] = to_string(ModelKind::Mlp);
    j["feature_names"] = model_.feature_names;
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < model_.dense.size(); ++l) {
      layers.push_back({{"weight", matrix_to_json(model_.dense[l].weight)},
                        {"bias", vector_to_json(model_.dense[l].bias)},
                        {"gamma", vector_to_json(model_.bn[l].gamma)},
                        {"beta", vector_to_json(model_.bn[l].beta)},
                        {"running_mean", vector_to_json(model_.bn[l].running_mean)},
                        {"running_var", vector_to_json(model_.bn[l].running_var)}});
    }
    j["layers"] = std::move(layers);
    j["output_weight"] = vector_to_json(model_.output_weight);
    return j;
  }

  ModelKind kind() const override { return ModelKind::Mlp; }

 private:
  MlpModel model_;
};

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::CoxPlain: return "cox_plain";
    case ModelKind::CoxRidge: return "cox_ridge";
    case ModelKind::CoxLasso: return "cox_lasso";
    case ModelKind::CoxElasticNet: return "cox_elastic_net";
    case ModelKind::Rsf: return "rsf";
    case ModelKind::GbtLeafWise: return "gbt_leaf_wise";
    case ModelKind::GbtDepthWise: return "gbt_depth_wise";
    case ModelKind::Mlp: return "mlp";
  }
  throw ValidationError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "cox_plain") return ModelKind::CoxPlain;
  if (name == "cox_ridge") return ModelKind::CoxRidge;
  if (name == "cox_lasso") return ModelKind::CoxLasso;
  if (name == "cox_elastic_net") return ModelKind::CoxElasticNet;
  if (name == "rsf") return ModelKind::Rsf;
  if (name == "gbt_leaf_wise") return ModelKind::GbtLeafWise;
  if (name == "gbt_depth_wise") return ModelKind::GbtDepthWise;
  if (name == "mlp") return ModelKind::Mlp;
  throw ValidationError("unknown model kind '" + name + "'");
}

std::unique_ptr<FittedModel> fit_model(ModelKind kind, const HyperParams& params,
                                       const Matrix& X, const Vector& time,
                                       const IntVector& event,
                                       const std::vector<std::string>& feature_names,
                                       std::uint64_t seed) {
  switch (kind) {
    case ModelKind::CoxPlain: {
      // The minimal-ridge "unpenalized" fit; alpha applies to the summed
      // log-likelihood directly.
      const Scalar alpha = params.value("alpha", 1e-6);
      CoxModel model = fit_cox_newton(X, time, event, alpha,
                                      params.value("max_iter", 100),
                                      params.value("tol", 1e-9));
      model.feature_names = feature_names;
      model.baseline = breslow_baseline(model, X, time, event);
      return std::make_unique<LinearCoxFitted>(kind, std::move(model));
    }
    case ModelKind::CoxRidge: {
      // Grid alphas penalize the mean log-likelihood; the Newton solver works
      // on the sum, hence the factor n.
      const Scalar alpha = params.value("alpha", 1e-3);
      CoxModel model = fit_cox_newton(X, time, event,
                                      alpha * static_cast<Scalar>(X.rows()),
                                      params.value("max_iter", 100),
                                      params.value("tol", 1e-9));
      model.feature_names = feature_names;
      model.baseline = breslow_baseline(model, X, time, event);
      return std::make_unique<LinearCoxFitted>(kind, std::move(model));
    }
    case ModelKind::CoxLasso:
    case ModelKind::CoxElasticNet: {
      PenaltySpec penalty;
      penalty.alpha = params.value("alpha", 1e-3);
      penalty.l1_ratio =
          kind == ModelKind::CoxLasso ? 1.0 : params.value("l1_ratio", 0.5);
      CoxModel model = fit_cox_coordinate_descent(X, time, event, penalty,
                                                  params.value("max_iter", 100),
                                                  params.value("tol", 1e-7));
      model.feature_names = feature_names;
      model.baseline = breslow_baseline(model, X, time, event);
      return std::make_unique<LinearCoxFitted>(kind, std::move(model));
    }
    case ModelKind::Rsf: {
      RsfHyperparams hp;
      hp.n_estimators = params.value("n_estimators", 100);
      hp.max_depth = params.value("max_depth", 7);
      hp.min_node_size = params.value("min_node_size", 20);
      hp.mtry = params.value("mtry", 0);
      hp.seed = seed;
      return std::make_unique<RsfFitted>(fit_rsf(X, time, event, hp, feature_names));
    }
    case ModelKind::GbtLeafWise:
    case ModelKind::GbtDepthWise: {
      GbtHyperparams hp;
      hp.n_estimators = params.value("n_estimators", 100);
      hp.policy = kind == ModelKind::GbtLeafWise
                      ? GrowthPolicy::leaf_wise(params.value("num_leaves", 31))
                      : GrowthPolicy::depth_wise(params.value("max_depth", 3));
      hp.learning_rate = params.value("learning_rate", 0.1);
      hp.min_leaf = params.value("min_leaf", 10);
      hp.lambda_l2 = params.value("lambda_l2", 1.0);
      hp.seed = seed;
      return std::make_unique<GbtFitted>(kind, fit_gbt(X, time, event, hp, feature_names));
    }
    case ModelKind::Mlp: {
      MlpHyperparams hp;
      hp.num_layers = params.value("num_layers", 2);
      hp.layer_size = params.value("layer_size", 64);
      hp.learning_rate = params.value("learning_rate", 0.001);
      hp.dropout = params.value("dropout", 0.2);
      hp.batch_size = params.value("batch_size", 50000);
      hp.lr_patience = params.value("lr_patience", 5);
      hp.max_epochs = params.value("max_epochs", 200);
      hp.seed = seed;
      return std::make_unique<MlpFitted>(fit_mlp(X, time, event, hp, feature_names));
    }
  }
  throw ValidationError("unknown model kind");
}

std::unique_ptr<FittedModel> model_from_json(const nlohmann::json& j) {
  const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case ModelKind::CoxPlain:
    case ModelKind::CoxRidge:
    case ModelKind::CoxLasso:
    case ModelKind::CoxElasticNet: {
      CoxModel model;
      model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      model.beta = vector_from_json(j.at("beta"));
      for (const auto& step : j.at("baseline")) {
        model.baseline.emplace_back(step.at(0).get<Scalar>(), step.at(1).get<Scalar>());
      }
      return std::make_unique<LinearCoxFitted>(kind, std::move(model));
    }
    case ModelKind::GbtLeafWise:
    case ModelKind::GbtDepthWise: {
      GbtModel model;
      model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      model.n_features = j.at("n_features").get<Index>();
      model.learning_rate = j.at("learning_rate").get<Scalar>();
      for (const auto& tree_json : j.at("trees")) {
        Tree tree;
        for (const auto& nd : tree_json.at("nodes")) {
          tree.nodes.push_back({nd.at("feature").get<int>(),
                                nd.at("threshold").get<Scalar>(),
                                nd.at("left").get<int>(), nd.at("right").get<int>(),
                                nd.at("value").get<Scalar>()});
        }
        model.trees.push_back(std::move(tree));
      }
      return std::make_unique<GbtFitted>(kind, std::move(model));
    }
    case ModelKind::Rsf: {
      RsfModel model;
      model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      model.n_features = j.at("n_features").get<Index>();
      model.event_time_grid = j.at("event_time_grid").get<std::vector<Scalar>>();
      for (const auto& tree_json : j.at("trees")) {
        RsfTree tree;
        for (const auto& nd : tree_json.at("nodes")) {
          RsfNode node;
          node.feature = nd.at("feature").get<int>();
          node.threshold = nd.at("threshold").get<Scalar>();
          node.left = nd.at("left").get<int>();
          node.right = nd.at("right").get<int>();
          if (node.feature < 0) node.chf = nd.at("chf").get<std::vector<Scalar>>();
          tree.nodes.push_back(std::move(node));
        }
        model.trees.push_back(std::move(tree));
      }
      return std::make_unique<RsfFitted>(std::move(model));
    }
    case ModelKind::Mlp: {
      MlpModel model;
      model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      for (const auto& layer : j.at("layers")) {
        DenseLayer dense;
        dense.weight = matrix_from_json(layer.at("weight"));
        dense.bias = vector_from_json(layer.at("bias"));
        model.dense.push_back(std::move(dense));
        BatchNormLayer bn;
        bn.gamma = vector_from_json(layer.at("gamma"));
        bn.beta = vector_from_json(layer.at("beta"));
        bn.running_mean = vector_from_json(layer.at("running_mean"));
        bn.running_var = vector_from_json(layer.at("running_var"));
        model.bn.push_back(std::move(bn));
      }
      model.output_weight = vector_from_json(j.at("output_weight"));
      return std::make_unique<MlpFitted>(std::move(model));
    }
  }
  throw ValidationError("unknown model kind in JSON");
}

namespace {

std::vector<Scalar> logspace_alphas() {
  // np.logspace(-3, 0, 5)
  std::vector<Scalar> out;
  for (int i = 0; i < 5; ++i) out.push_back(std::pow(10.0, -3.0 + 0.75 * i));
  return out;
}

}  // namespace

std::vector<HyperParams> default_grid(ModelKind kind) {
  std::vector<HyperParams> grid;
  switch (kind) {
    case ModelKind::CoxPlain:
      grid.push_back({{"alpha", 1e-6}});
      break;
    case ModelKind::CoxRidge:
    case ModelKind::CoxLasso:
      for (Scalar a : logspace_alphas()) grid.push_back({{"alpha", a}});
      break;
    case ModelKind::CoxElasticNet:
      for (int r = 1; r <= 10; ++r) {
        for (Scalar a : logspace_alphas()) {
          grid.push_back({{"l1_ratio", 0.1 * r}, {"alpha", a}});
        }
      }
      break;
    case ModelKind::Rsf:
    case ModelKind::GbtDepthWise:
      for (int n : {50, 100, 200}) {
        for (int d : {3, 7, 10}) {
          grid.push_back({{"n_estimators", n}, {"max_depth", d}});
        }
      }
      break;
    case ModelKind::GbtLeafWise:
      for (int n : {50, 100, 200}) {
        for (int l : {7, 127, 1023}) {
          grid.push_back({{"n_estimators", n}, {"num_leaves", l}});
        }
      }
      break;
    case ModelKind::Mlp:
      for (int l : {2, 3, 5}) {
        for (int s : {16, 64, 256}) {
          grid.push_back({{"num_layers", l}, {"layer_size", s}});
        }
      }
      break;
  }
  return grid;
}

std::vector<HyperParams> expand_grid(ModelKind kind, const nlohmann::json& lists) {
  (void)kind;
  std::vector<HyperParams> grid;
  grid.push_back(HyperParams::object());
  // nlohmann keeps object keys sorted, so the expansion order is
  // deterministic: alphabetical knobs, later knobs fastest.
  for (const auto& [knob, values] : lists.items()) {
    std::vector<HyperParams> next;
    for (const auto& point : grid) {
      if (values.is_array()) {
        for (const auto& v : values) {
          HyperParams p = point;
          p[knob] = v;
          next.push_back(std::move(p));
        }
      } else {
        HyperParams p = point;
        p[knob] = values;
        next.push_back(std::move(p));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

Scalar complexity(ModelKind kind, const HyperParams& params) {
  switch (kind) {
    case ModelKind::Rsf:
    case ModelKind::GbtDepthWise: {
      const Scalar n = params.value("n_estimators", 100);
      const Scalar d = params.value("max_depth", 3);
      return n * (std::pow(2.0, d) - 1.0);
    }
    case ModelKind::GbtLeafWise: {
      const Scalar n = params.value("n_estimators", 100);
      const Scalar l = params.value("num_leaves", 31);
      return n * l;
    }
    case ModelKind::Mlp: {
      const Scalar l = params.value("num_layers", 2);
      const Scalar s = params.value("layer_size", 64);
      return l * s * s;
    }
    default:
      return 0;
  }
}

}  // namespace survbench
