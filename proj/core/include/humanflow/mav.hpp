#pragma once

#include <Eigen/Dense>

namespace hf {

/// Linear MAV model: position/velocity driven by attitude and thrust,
/// second-order attitude response to reference angles. Yaw is handled
/// separately and excluded from the state.
struct MavParams {
  double gravity = 9.81;
  double drag_x = 0.1, drag_y = 0.1, drag_z = 0.1;  // 1/s
  double b1 = 16.0, b2 = 16.0, b3 = 16.0, b4 = 16.0;  // 1/s^2
  double dt = 0.1;         // sampling time, s
  long horizon = 20;       // control steps
  double thrust_max = 5.0;      // |tau| bound, m/s^2
  double attitude_max = 0.3;    // |theta_r|, |phi_r| bound, rad
  double velocity_max = 2.0;    // per-axis bound, m/s
  double safety_dist = 0.5;     // m
};

/// State layout: [p(3), v(3), theta, phi, theta_dot, phi_dot].
using MavStateVec = Eigen::Matrix<double, 10, 1>;
using MavInput = Eigen::Vector3d;  // [tau, theta_r, phi_r]

struct MavState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double pitch = 0.0, roll = 0.0;
  double pitch_rate = 0.0, roll_rate = 0.0;

  MavStateVec to_vec() const;
  static MavState from_vec(const MavStateVec& v);
};

/// Continuous-time matrices of the linear model.
void continuous_matrices(const MavParams& params,
                         Eigen::Matrix<double, 10, 10>& A,
                         Eigen::Matrix<double, 10, 3>& B);

struct DiscreteDynamics {
  Eigen::Matrix<double, 10, 10> A;
  Eigen::Matrix<double, 10, 3> B;
  long horizon = 0;
  double dt = 0.1;
  // Stacked over x_{0:T}:  x = Phi x0 + Gamma u,  Phi (10(T+1) x 10),
  // Gamma (10(T+1) x 3T).
  Eigen::MatrixXd Phi, Gamma;
};

/// Exact zero-order-hold discretization via the matrix exponential of the
/// augmented [[A, B], [0, 0]] system.
DiscreteDynamics discretize(const MavParams& params);

/// Step-by-step recursion; rows are x_0 .. x_T.
Eigen::MatrixXd rollout(const DiscreteDynamics& dyn, const MavStateVec& x0,
                        const Eigen::VectorXd& controls);

/// Stacked-form rollout (algebraically identical to the recursion).
Eigen::VectorXd rollout_stacked(const DiscreteDynamics& dyn,
                                const MavStateVec& x0,
                                const Eigen::VectorXd& controls);

/// RK4 integration of the continuous model with `substeps` per dt; the
/// verification oracle for `discretize`.
MavStateVec integrate_rk4(const MavParams& params, const MavStateVec& x0,
                          const MavInput& u, double dt, int substeps);

}  // namespace hf
