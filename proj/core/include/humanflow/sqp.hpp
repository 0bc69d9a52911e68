#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace hf {

/// Smooth inequality-constrained program with an exact convex quadratic
/// objective:
///   min 1/2 w'Qw + c'w + f0   s.t.  g(w) >= 0,  lo <= w <= hi.
/// Constraint values are evaluated in bulk; gradients row-by-row so the
/// solver can restrict itself to near-active constraints.
struct SqpProblem {
  long num_vars = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  double f0 = 0.0;
  Eigen::VectorXd lower, upper;

  long num_constraints = 0;
  std::function<void(const Eigen::VectorXd& w, Eigen::VectorXd& g)> eval_g;
  std::function<void(const Eigen::VectorXd& w, long i,
                     Eigen::Ref<Eigen::VectorXd> grad)>
      eval_grad;
};

struct SqpOptions {
  long max_iters = 150;
  long max_qp_iters = 300;
  double screen_margin = 0.3;     // constraints with g < margin enter the QP
  double bound_margin = 0.05;     // same, for box bounds on the variables
  double tol_step = 1e-9;
  double tol_violation = 1e-6;    // interior convergence target
  double feasibility_tol = 1e-4;  // post-check threshold
  double hessian_reg = 1e-8;
  double merit_mu_init = 10.0;
  double trust_radius = 3.0;  // cap on the step norm per iteration
};

struct SqpResult {
  Eigen::VectorXd w;
  bool feasible = false;    // post-check at feasibility_tol
  bool converged = false;
  double objective = 0.0;
  double max_violation = 0.0;
  long iterations = 0;
  std::string status;
};

/// SQP with an L1 merit line search. The QP subproblem uses the exact
/// objective Hessian (the objective is quadratic) and a primal active-set
/// method over screened linearized constraints; a Gauss-Newton restoration
/// step handles inconsistent linearizations and infeasible starts.
SqpResult solve_sqp(const SqpProblem& prob, const Eigen::VectorXd& w0,
                    const SqpOptions& opts = {});

}  // namespace hf
