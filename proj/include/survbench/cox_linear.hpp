#ifndef SURVBENCH_COX_LINEAR_HPP
#define SURVBENCH_COX_LINEAR_HPP

#include <string>
#include <utility>
#include <vector>

#include "survbench/common.hpp"
#include "survbench/cox_objective.hpp"

namespace survbench {

/// penalty = alpha * (l1_ratio * |beta|_1 + (1 - l1_ratio)/2 * |beta|_2^2),
/// applied to the negative MEAN partial log-likelihood.
struct PenaltySpec {
  Scalar alpha = 0;
  Scalar l1_ratio = 0;
};

struct CoxModel {
  Vector beta;
  std::vector<std::string> feature_names;
  std::vector<std::pair<Scalar, Scalar>> baseline;  // (time, cumulative hazard)
};

/// Per-iteration log of the penalized log-likelihood; every accepted Newton
/// step strictly increases it.
struct NewtonTrace {
  std::vector<Scalar> penalized_ll;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton ascent of l(beta) - ridge_alpha/2 * |beta|^2 with the full
/// dense Hessian. ridge_alpha = 1e-6 stands in for the unpenalized fit.
CoxModel fit_cox_newton(const Matrix& X, const Vector& time, const IntVector& event,
                        Scalar ridge_alpha, int max_iter = 100, Scalar tol = 1e-9,
                        NewtonTrace* trace = nullptr);

/// Cyclic coordinate descent on the local quadratic model from grad_hess,
/// re-expanded by an outer IRLS loop; soft-thresholding handles the L1 part.
/// Minimizes -l(beta)/n + penalty. Note the ridge mapping: this objective
/// times n equals the fit_cox_newton objective with ridge_alpha = n * alpha
/// at l1_ratio = 0.
CoxModel fit_cox_coordinate_descent(const Matrix& X, const Vector& time,
                                    const IntVector& event, const PenaltySpec& penalty,
                                    int max_iter = 100, Scalar tol = 1e-7);

/// Breslow cumulative baseline hazard on the fitting sample.
std::vector<std::pair<Scalar, Scalar>> breslow_baseline(const CoxModel& model,
                                                        const Matrix& X,
                                                        const Vector& time,
                                                        const IntVector& event);

Vector predict_risk(const CoxModel& model, const Matrix& X);

/// Largest alpha (at the given l1_ratio > 0) for which the lasso/elastic-net
/// solution is exactly zero: max |null-model score| / (n * l1_ratio).
Scalar lasso_alpha_max(const Matrix& X, const Vector& time, const IntVector& event,
                       Scalar l1_ratio);

}  // namespace survbench

#endif
