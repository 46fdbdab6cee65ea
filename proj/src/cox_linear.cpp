#include "survbench/cox_linear.hpp"

#include <algorithm>
#include <cmath>

namespace survbench {

namespace {

constexpr Scalar kEps = 1e-12;

void check_matrix(const Matrix& X, const Vector& time) {
  if (X.rows() != time.size()) {
    throw ValidationError("cox fit: X row count does not match time");
  }
  if (!X.allFinite()) {
    throw ValidationError("cox fit: X contains missing or non-finite values");
  }
}

/// Full (dense) Hessian of -l with respect to beta, via one descending sweep
/// maintaining suffix sums of w, w*x and w*x*x^T.
Matrix full_hessian(const RiskSetIndex& idx, const Matrix& X, const Vector& eta) {
  const Index p = X.cols();
  Scalar max_eta = eta.maxCoeff();
  Matrix H = Matrix::Zero(p, p);
  Matrix m_suffix = Matrix::Zero(p, p);
  Vector v_suffix = Vector::Zero(p);
  Scalar s_suffix = 0;

  for (std::size_t g = idx.tie_groups.size(); g-- > 0;) {
    const auto& grp = idx.tie_groups[g];
    for (Index q = grp.end; q-- > grp.begin;) {
      const Index row = idx.inverse_order[static_cast<std::size_t>(q)];
      const Scalar w = std::exp(std::max(eta[row] - max_eta, -30.0));
      const auto x = X.row(row).transpose();
      m_suffix.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
      v_suffix += w * x;
      s_suffix += w;
    }
    if (grp.n_events > 0) {
      const Scalar inv = 1.0 / (s_suffix + kEps);
      const Scalar d = static_cast<Scalar>(grp.n_events);
      H.triangularView<Eigen::Lower>() += d * inv * m_suffix;
      H.selfadjointView<Eigen::Lower>().rankUpdate(v_suffix, -d * inv * inv);
    }
  }
  return H.selfadjointView<Eigen::Lower>();
}

}  // namespace

CoxModel fit_cox_newton(const Matrix& X, const Vector& time, const IntVector& event,
                        Scalar ridge_alpha, int max_iter, Scalar tol,
                        NewtonTrace* trace) {
  check_matrix(X, time);
  if (ridge_alpha < 0) throw ValidationError("cox newton: ridge_alpha must be >= 0");
  const RiskSetIndex idx = build_risk_index(time, event);
  const Index p = X.cols();

  Vector beta = Vector::Zero(p);
  Vector eta = Vector::Zero(X.rows());
  Scalar pll = partial_log_likelihood(idx, eta) - 0.5 * ridge_alpha * beta.squaredNorm();
  if (trace) {
    trace->penalized_ll.clear();
    trace->penalized_ll.push_back(pll);
  }

  bool converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    const ObjectiveOutput obj = grad_hess(idx, eta);
    const Vector score = X.transpose() * obj.grad - ridge_alpha * beta;
    if (score.lpNorm<Eigen::Infinity>() < tol) {
      converged = true;
      break;
    }

    Matrix H = full_hessian(idx, X, eta);
    H.diagonal().array() += ridge_alpha;
    const Vector step = H.ldlt().solve(score);
    if (!step.allFinite()) {
      throw NumericalError("cox newton: singular Hessian despite ridge", beta);
    }

    // Step halving until the penalized log-likelihood improves.
    Scalar scale = 1.0;
    Scalar new_pll = pll;
    Vector new_beta, new_eta;
    bool accepted = false;
    for (int h = 0; h <= 20; ++h) {
      new_beta = beta + scale * step;
      new_eta = X * new_beta;
      new_pll = partial_log_likelihood(idx, new_eta) -
                0.5 * ridge_alpha * new_beta.squaredNorm();
      if (new_pll > pll) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No ascent direction left; accept convergence only near a stationary point.
      if (score.lpNorm<Eigen::Infinity>() < std::sqrt(tol)) {
        converged = true;
        break;
      }
      throw NumericalError("cox newton: step halving failed to improve the objective",
                           beta);
    }

    const Scalar rel_change = std::abs(new_pll - pll) / (std::abs(pll) + 1.0);
    beta = new_beta;
    eta = new_eta;
    pll = new_pll;
    if (trace) trace->penalized_ll.push_back(pll);
    if (rel_change < tol) {
      converged = true;
      ++it;
      break;
    }
  }
  if (trace) {
    trace->iterations = it;
    trace->converged = converged;
  }
  if (!converged) {
    throw NumericalError("cox newton: no convergence after " +
                             std::to_string(max_iter) + " iterations",
                         beta);
  }

  CoxModel model;
  model.beta = beta;
  return model;
}

Scalar lasso_alpha_max(const Matrix& X, const Vector& time, const IntVector& event,
                       Scalar l1_ratio) {
  if (!(l1_ratio > 0)) throw ValidationError("alpha_max needs l1_ratio > 0");
  const RiskSetIndex idx = build_risk_index(time, event);
  const ObjectiveOutput obj = grad_hess(idx, Vector::Zero(X.rows()));
  const Vector score = X.transpose() * obj.grad;
  return score.lpNorm<Eigen::Infinity>() /
         (static_cast<Scalar>(X.rows()) * l1_ratio);
}

CoxModel fit_cox_coordinate_descent(const Matrix& X, const Vector& time,
                                    const IntVector& event, const PenaltySpec& penalty,
                                    int max_iter, Scalar tol) {
  check_matrix(X, time);
  if (penalty.l1_ratio < 0 || penalty.l1_ratio > 1) {
    throw ValidationError("coordinate descent: l1_ratio must lie in [0,1]");
  }
  if (penalty.l1_ratio > 0 && !(penalty.alpha > 0)) {
    throw ValidationError("coordinate descent: alpha must be > 0 when l1_ratio > 0");
  }
  const RiskSetIndex idx = build_risk_index(time, event);
  const Index n = X.rows();
  const Index p = X.cols();
  const Scalar r = penalty.l1_ratio;

  // Warm-started path from alpha_max down to the target when the L1 part is
  // active; a cold start solves small-alpha problems poorly.
  std::vector<Scalar> path;
  if (r > 0) {
    const Scalar a_max = lasso_alpha_max(X, time, event, r);
    if (penalty.alpha >= a_max) {
      CoxModel model;
      model.beta = Vector::Zero(p);
      return model;
    }
    const int steps = 10;
    for (int s = 1; s <= steps; ++s) {
      path.push_back(a_max * std::pow(penalty.alpha / a_max,
                                      static_cast<Scalar>(s) / steps));
    }
  } else {
    path.push_back(penalty.alpha);
  }

  Vector beta = Vector::Zero(p);
  Vector eta = Vector::Zero(n);

  for (Scalar alpha : path) {
    const Scalar l1 = alpha * r;
    const Scalar l2 = alpha * (1.0 - r);
    bool converged = false;
    for (int outer = 0; outer < max_iter; ++outer) {
      const ObjectiveOutput obj = grad_hess(idx, eta);
      const Vector g = -obj.grad / static_cast<Scalar>(n);  // gradient of -l/n
      const Vector h = obj.hess / static_cast<Scalar>(n);
      const Vector eta0 = eta;

      Vector curv(p);
      for (Index k = 0; k < p; ++k) curv[k] = (h.array() * X.col(k).array().square()).sum();

      Scalar outer_change = 0;
      for (int sweep = 0; sweep < 1000; ++sweep) {
        Scalar max_change = 0;
        for (Index k = 0; k < p; ++k) {
          const Scalar old = beta[k];
          const Scalar slope =
              (g.array() * X.col(k).array()).sum() +
              (h.array() * (eta - eta0).array() * X.col(k).array()).sum();
          const Scalar num = curv[k] * old - slope;
          const Scalar denom = curv[k] + l2;
          Scalar next = 0;
          if (denom > kEps) {
            const Scalar shrunk = std::max(std::abs(num) - l1, 0.0);
            next = (num > 0 ? shrunk : -shrunk) / denom;
          }
          if (next != old) {
            eta += (next - old) * X.col(k);
            beta[k] = next;
            max_change = std::max(max_change, std::abs(next - old));
          }
        }
        outer_change = std::max(outer_change, max_change);
        if (max_change < tol) break;
      }
      eta = X * beta;  // refresh against drift from incremental updates
      if (outer_change < tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericalError("coordinate descent: no convergence at alpha = " +
                               std::to_string(alpha),
                           beta);
    }
  }

  CoxModel model;
  model.beta = beta;
  return model;
}

std::vector<std::pair<Scalar, Scalar>> breslow_baseline(const CoxModel& model,
                                                        const Matrix& X,
                                                        const Vector& time,
                                                        const IntVector& event) {
  const Vector eta = predict_risk(model, X);
  const RiskSetIndex idx = build_risk_index(time, event);
  const Scalar max_eta = eta.maxCoeff();

  std::vector<Scalar> group_suffix(idx.tie_groups.size());
  Scalar suffix = 0;
  for (std::size_t g = idx.tie_groups.size(); g-- > 0;) {
    const auto& grp = idx.tie_groups[g];
    for (Index q = grp.end; q-- > grp.begin;) {
      suffix += std::exp(eta[idx.inverse_order[static_cast<std::size_t>(q)]] - max_eta);
    }
    group_suffix[g] = suffix;
  }

  std::vector<std::pair<Scalar, Scalar>> steps;
  Scalar cumulative = 0;
  for (std::size_t g = 0; g < idx.tie_groups.size(); ++g) {
    const auto& grp = idx.tie_groups[g];
    if (grp.n_events == 0) continue;
    const Index row = idx.inverse_order[static_cast<std::size_t>(grp.begin)];
    cumulative += static_cast<Scalar>(grp.n_events) /
                  (std::exp(max_eta) * group_suffix[g]);
    steps.emplace_back(time[row], cumulative);
  }
  return steps;
}

Vector predict_risk(const CoxModel& model, const Matrix& X) {
  if (X.cols() != model.beta.size()) {
    throw ValidationError("predict_risk: feature count mismatch (" +
                          std::to_string(X.cols()) + " columns vs " +
                          std::to_string(model.beta.size()) + " coefficients)");
  }
  return X * model.beta;
}

}  // namespace survbench
