#include "humanflow/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace hf {

namespace {

double objective_value(const SqpProblem& p, const Eigen::VectorXd& w) {
  return 0.5 * w.dot(p.Q * w) + p.c.dot(w) + p.f0;
}

double violation_l1(const Eigen::VectorXd& g) {
  double v = 0.0;
  for (long i = 0; i < g.size(); ++i) v += std::max(0.0, -g(i));
  return v;
}

double violation_max(const Eigen::VectorXd& g) {
  double v = 0.0;
  for (long i = 0; i < g.size(); ++i) v = std::max(v, -g(i));
  return v;
}

Eigen::VectorXd clamp_box(const SqpProblem& p, Eigen::VectorXd w) {
  if (p.lower.size()) w = w.cwiseMax(p.lower).cwiseMin(p.upper);
  return w;
}

/// Primal active-set QP over the free-variable subspace:
///   min 1/2 d'H d + q'd  s.t.  A d >= b.
/// Starts from the unconstrained minimizer, adds the most violated row,
/// drops rows with negative multipliers. Returns false if no consistent
/// working set was found within the cap.
bool solve_qp(const Eigen::LLT<Eigen::MatrixXd>& Hllt, const Eigen::VectorXd& q,
              const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
              long max_iters, Eigen::VectorXd& d, double& max_lambda) {
  const double tol = 1e-10;
  const Eigen::VectorXd d_free = Hllt.solve(-q);
  d = d_free;
  max_lambda = 0.0;
  if (A.rows() == 0) return true;

  std::vector<Eigen::VectorXd> hinv_rows(static_cast<size_t>(A.rows()));
  std::vector<bool> have(static_cast<size_t>(A.rows()), false);
  auto hinv_row = [&](long i) -> const Eigen::VectorXd& {
    if (!have[static_cast<size_t>(i)]) {
      hinv_rows[static_cast<size_t>(i)] = Hllt.solve(A.row(i).transpose());
      have[static_cast<size_t>(i)] = true;
    }
    return hinv_rows[static_cast<size_t>(i)];
  };

  std::vector<long> active;
  Eigen::VectorXd lambda;
  for (long it = 0; it < max_iters; ++it) {
    const long na = static_cast<long>(active.size());
    if (na > 0) {
      // Schur complement S lambda = b_act - A_act d_free.
      Eigen::MatrixXd S(na, na);
      Eigen::VectorXd rhs(na);
      for (long r = 0; r < na; ++r) {
        const Eigen::VectorXd& hr = hinv_row(active[static_cast<size_t>(r)]);
        for (long cidx = 0; cidx < na; ++cidx)
          S(r, cidx) = A.row(active[static_cast<size_t>(cidx)]).dot(hr);
        rhs(r) = b(active[static_cast<size_t>(r)]) -
                 A.row(active[static_cast<size_t>(r)]).dot(d_free);
      }
      S.diagonal().array() += 1e-12 * (1.0 + S.trace() / static_cast<double>(na));
      Eigen::LDLT<Eigen::MatrixXd> Sldlt(S);
      if (Sldlt.info() != Eigen::Success) return false;
      lambda = Sldlt.solve(rhs);
      if (!lambda.allFinite()) return false;
      d = d_free;
      for (long r = 0; r < na; ++r)
        d += lambda(r) * hinv_row(active[static_cast<size_t>(r)]);
    } else {
      d = d_free;
      lambda.resize(0);
    }

    long drop = -1;
    double most_neg = -tol;
    for (long r = 0; r < na; ++r)
      if (lambda(r) < most_neg) {
        most_neg = lambda(r);
        drop = r;
      }
    if (drop >= 0) {
      active.erase(active.begin() + drop);
      continue;
    }

    long add = -1;
    double worst = tol;
    for (long i = 0; i < A.rows(); ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double slack = A.row(i).dot(d) - b(i);
      if (-slack > worst) {
        worst = -slack;
        add = i;
      }
    }
    if (add < 0) {
      for (long r = 0; r < na; ++r) max_lambda = std::max(max_lambda, lambda(r));
      return true;
    }
    active.push_back(add);
  }
  return false;
}

}  // namespace

SqpResult solve_sqp(const SqpProblem& prob, const Eigen::VectorXd& w0,
                    const SqpOptions& opts) {
  const long m = prob.num_vars;
  Eigen::MatrixXd H = prob.Q;
  H.diagonal().array() += opts.hessian_reg;
  Eigen::LLT<Eigen::MatrixXd> Hllt_full(H);

  SqpResult res;
  res.w = clamp_box(prob, w0);

  Eigen::VectorXd g;
  auto eval_all = [&](const Eigen::VectorXd& w, Eigen::VectorXd& out) {
    if (prob.num_constraints > 0)
      prob.eval_g(w, out);
    else
      out.resize(0);
  };
  eval_all(res.w, g);

  double mu = opts.merit_mu_init;
  Eigen::VectorXd grad_row(m);
  const double bound_tol = 1e-10;

  for (long it = 0; it < opts.max_iters; ++it) {
    res.iterations = it + 1;
    const Eigen::VectorXd q = prob.Q * res.w + prob.c;

    // Screen near-active general constraints. Variables sitting at a box
    // bound get a unit bound row so the QP cannot push them outside; they
    // stay in the QP (never hard-fixed) because a violated constraint may
    // need to pull them back inward even when the objective pushes outward.
    std::vector<long> rows;
    for (long i = 0; i < g.size(); ++i)
      if (g(i) < opts.screen_margin) rows.push_back(i);
    std::vector<std::pair<long, double>> bound_rows;  // (column, sign)
    if (prob.lower.size())
      for (long i = 0; i < m; ++i) {
        if (res.w(i) - prob.lower(i) <= bound_tol) bound_rows.emplace_back(i, 1.0);
        if (prob.upper(i) - res.w(i) <= bound_tol) bound_rows.emplace_back(i, -1.0);
      }
    Eigen::MatrixXd A =
        Eigen::MatrixXd::Zero(static_cast<long>(rows.size() + bound_rows.size()), m);
    Eigen::VectorXd b(A.rows());
    for (size_t r = 0; r < rows.size(); ++r) {
      prob.eval_grad(res.w, rows[r], grad_row);
      A.row(static_cast<long>(r)) = grad_row.transpose();
      b(static_cast<long>(r)) = -g(rows[r]);
    }
    for (size_t r = 0; r < bound_rows.size(); ++r) {
      const long rr = static_cast<long>(rows.size() + r);
      A(rr, bound_rows[r].first) = bound_rows[r].second;
      b(rr) = 0.0;
    }

    Eigen::VectorXd d(m);
    double max_lambda = 0.0;
    bool qp_ok = solve_qp(Hllt_full, q, A, b, opts.max_qp_iters, d, max_lambda);
    if (qp_ok && !d.allFinite()) qp_ok = false;
    if (!qp_ok) {
      // Restoration: Gauss-Newton toward the linearized feasible set.
      Eigen::MatrixXd AtA = A.transpose() * A;
      AtA.diagonal().array() += 1e-6;
      d = AtA.ldlt().solve(A.transpose() * b.cwiseMax(0.0));
      if (!d.allFinite()) {
        res.status = "restoration failed";
        break;
      }
    }
    mu = std::min(std::max(mu, 2.0 * max_lambda + 1.0), 1e7);

    // Project the direction onto the box tangent cone: a variable sitting at
    // a bound with d pointing outward contributes nothing after clamping and
    // would poison the directional derivative.
    if (prob.lower.size())
      for (long i = 0; i < m; ++i) {
        if (res.w(i) - prob.lower(i) <= bound_tol && d(i) < 0.0) d(i) = 0.0;
        if (prob.upper(i) - res.w(i) <= bound_tol && d(i) > 0.0) d(i) = 0.0;
      }

    // L1 merit backtracking with projection onto the box.
    const double merit_cur = objective_value(prob, res.w) + mu * violation_l1(g);
    double dderiv = q.dot(d) - mu * violation_l1(g);
    if (dderiv > -1e-12 * (1.0 + std::abs(merit_cur)) && violation_l1(g) > 0.0) {
      // The projected QP direction is not a descent direction for the merit;
      // fall back to the projected merit gradient.
      Eigen::VectorXd mg = q;
      for (long i = 0; i < g.size(); ++i)
        if (g(i) < 0.0) {
          prob.eval_grad(res.w, i, grad_row);
          mg -= mu * grad_row;
        }
      d = -mg;
      if (prob.lower.size())
        for (long i = 0; i < m; ++i) {
          if (res.w(i) - prob.lower(i) <= bound_tol && d(i) < 0.0) d(i) = 0.0;
          if (prob.upper(i) - res.w(i) <= bound_tol && d(i) > 0.0) d(i) = 0.0;
        }
      const double dn = d.norm();
      if (dn > 1.0) d /= dn;
      dderiv = mg.dot(d);
    }
    double alpha = 1.0;
    const double dnorm = d.norm();
    if (opts.trust_radius > 0.0 && dnorm > opts.trust_radius)
      alpha = opts.trust_radius / dnorm;
    bool accepted = false;
    Eigen::VectorXd w_try, g_try;
    for (int ls = 0; ls < 40; ++ls) {
      w_try = clamp_box(prob, res.w + alpha * d);
      eval_all(w_try, g_try);
      const double merit_try =
          objective_value(prob, w_try) + mu * violation_l1(g_try);
      if (merit_try <= merit_cur + 1e-4 * alpha * std::min(dderiv, 0.0) &&
          merit_try <= merit_cur + 1e-12 * (1.0 + std::abs(merit_cur))) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.status = "line search stalled";
      break;
    }
    const double step_norm = (w_try - res.w).norm();
    res.w = w_try;
    g = g_try;
    if (step_norm < opts.tol_step && violation_max(g) < opts.tol_violation) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    if (step_norm < opts.tol_step) {
      res.status = "step tolerance at infeasible point";
      break;
    }
  }
  if (res.status.empty()) res.status = "iteration limit";

  eval_all(res.w, g);
  res.objective = objective_value(prob, res.w);
  res.max_violation = violation_max(g);
  res.feasible = res.max_violation <= opts.feasibility_tol;
  if (res.feasible && res.status == "iteration limit") res.status = "feasible";
  return res;
}

}  // namespace hf
