#ifndef STE_LM_HPP
#define STE_LM_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ste {

struct LmOptions {
  int max_iters = 500;
  double rel_tol = 1e-10;  // stop when an accepted step improves cost by less than this fraction
  double step_tol = 1e-8;  // stop when an accepted step is this small relative to the parameters
  double initial_damping = 1e-3;
  double max_damping = 1e16;
};

struct LmResult {
  Eigen::VectorXd params;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  bool finite = false;
};

/// Levenberg-Marquardt with gain-ratio damping updates and diagonal scaling
/// by the running maximum of diag(J^T J).
///
/// Problem must provide
///   bool residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const;
///   bool residuals_and_jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) const;
/// where J = dr/dp and a false return marks a non-finite evaluation.
template <class Problem>
LmResult levenberg_marquardt(const Problem& problem, Eigen::VectorXd params, const LmOptions& opt) {
  LmResult out;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  if (!problem.residuals_and_jacobian(params, r, jac)) {
    out.params = std::move(params);
    out.cost = std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::Index n = params.size();
  double cost = r.squaredNorm();
  double damping = opt.initial_damping;
  double growth = 2.0;
  Eigen::VectorXd r_trial;
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd grad;
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(n);
  bool need_jacobian = false;

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    if (need_jacobian && !problem.residuals_and_jacobian(params, r, jac)) break;
    need_jacobian = false;
    hess.setZero();
    hess.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    grad.noalias() = jac.transpose() * r;
    scale = scale.cwiseMax(hess.diagonal());
    const double floor = std::max(1e-12 * scale.maxCoeff(), 1e-300);

    bool accepted = false;
    while (damping <= opt.max_damping) {
      Eigen::MatrixXd a = hess;
      for (Eigen::Index i = 0; i < n; ++i) a(i, i) += damping * std::max(scale(i), floor);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd step = ldlt.solve(-grad);
        if (step.allFinite()) {
          Eigen::VectorXd trial = params + step;
          if (problem.residuals(trial, r_trial)) {
            const double trial_cost = r_trial.squaredNorm();
            if (trial_cost < cost) {
              // reduction predicted by the local quadratic model
              const double predicted = -2.0 * step.dot(grad) - step.dot(hess * step);
              const double improvement = cost - trial_cost;
              const double gain = predicted > 0.0 ? improvement / predicted : 0.0;
              const double t = 2.0 * gain - 1.0;
              params = std::move(trial);
              cost = trial_cost;
              damping = std::max(damping * std::max(1.0 / 3.0, 1.0 - t * t * t), 1e-15);
              growth = 2.0;
              accepted = true;
              need_jacobian = true;
              if (improvement <= opt.rel_tol * cost ||
                  step.norm() <= opt.step_tol * (params.norm() + opt.step_tol))
                out.converged = true;
              break;
            }
          }
        }
      }
      damping *= growth;
      growth *= 2.0;
    }
    if (!accepted) {
      out.converged = true;  // no descent step exists at any damping
      break;
    }
    if (out.converged) {
      ++it;
      break;
    }
  }
  out.params = std::move(params);
  out.cost = cost;
  out.iterations = it;
  out.finite = std::isfinite(cost);
  return out;
}

}  // namespace ste

#endif  // STE_LM_HPP
