#ifndef SURVBENCH_MODELS_HPP
#define SURVBENCH_MODELS_HPP

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "survbench/common.hpp"

namespace survbench {

enum class ModelKind {
  CoxPlain,
  CoxRidge,
  CoxLasso,
  CoxElasticNet,
  Rsf,
  GbtLeafWise,
  GbtDepthWise,
  Mlp,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

using HyperParams = nlohmann::json;

/// A fitted model of any kind: rows in, one risk score per row out
/// (higher = riskier).
class FittedModel {
 public:
  virtual ~FittedModel() = default;
  virtual Vector predict_risk(const Matrix& X) const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual ModelKind kind() const = 0;
};

std::unique_ptr<FittedModel> fit_model(ModelKind kind, const HyperParams& params,
                                       const Matrix& X, const Vector& time,
                                       const IntVector& event,
                                       const std::vector<std::string>& feature_names,
                                       std::uint64_t seed);

std::unique_ptr<FittedModel> model_from_json(const nlohmann::json& j);

/// Built-in default hyperparameter grid per model family.
std::vector<HyperParams> default_grid(ModelKind kind);

/// Cartesian expansion of {"knob": [values...]} lists over the kind's
/// default fixed parameters; later knobs vary fastest, in listed order.
std::vector<HyperParams> expand_grid(ModelKind kind, const nlohmann::json& lists);

/// Approximate model complexity: trees use n_estimators x leaf budget
/// (2^max_depth - 1 for depth-wise growth), the network uses
/// num_layers x layer_size^2. Linear models count 0.
Scalar complexity(ModelKind kind, const HyperParams& params);

}  // namespace survbench

#endif
