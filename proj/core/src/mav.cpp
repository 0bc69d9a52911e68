#include "humanflow/mav.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace hf {

MavStateVec MavState::to_vec() const {
  MavStateVec v;
  v << position, velocity, pitch, roll, pitch_rate, roll_rate;
  return v;
}

MavState MavState::from_vec(const MavStateVec& v) {
  MavState s;
  s.position = v.segment<3>(0);
  s.velocity = v.segment<3>(3);
  s.pitch = v(6);
  s.roll = v(7);
  s.pitch_rate = v(8);
  s.roll_rate = v(9);
  return s;
}

void continuous_matrices(const MavParams& p, Eigen::Matrix<double, 10, 10>& A,
                         Eigen::Matrix<double, 10, 3>& B) {
  A.setZero();
  B.setZero();
  A(0, 3) = A(1, 4) = A(2, 5) = 1.0;           // p_dot = v
  A(3, 6) = p.gravity;                         // x_ddot = g*theta - cx*vx
  A(3, 3) = -p.drag_x;
  A(4, 7) = -p.gravity;                        // y_ddot = -g*phi - cy*vy
  A(4, 4) = -p.drag_y;
  A(5, 5) = -p.drag_z;                         // z_ddot = tau - cz*vz
  A(6, 8) = 1.0;                               // theta_dot
  A(7, 9) = 1.0;                               // phi_dot
  A(8, 6) = -p.b1;                             // theta_ddot
  A(9, 7) = -p.b3;                             // phi_ddot
  B(5, 0) = 1.0;
  B(8, 1) = p.b2;
  B(9, 2) = p.b4;
}

DiscreteDynamics discretize(const MavParams& params) {
  Eigen::Matrix<double, 10, 10> Ac;
  Eigen::Matrix<double, 10, 3> Bc;
  continuous_matrices(params, Ac, Bc);

  Eigen::Matrix<double, 13, 13> aug = Eigen::Matrix<double, 13, 13>::Zero();
  aug.topLeftCorner<10, 10>() = Ac;
  aug.topRightCorner<10, 3>() = Bc;
  const Eigen::Matrix<double, 13, 13> expm = (aug * params.dt).exp();

  DiscreteDynamics dyn;
  dyn.A = expm.topLeftCorner<10, 10>();
  dyn.B = expm.topRightCorner<10, 3>();
  dyn.horizon = params.horizon;
  dyn.dt = params.dt;

  const long T = params.horizon;
  dyn.Phi.resize(10 * (T + 1), 10);
  dyn.Gamma.setZero(10 * (T + 1), 3 * T);
  Eigen::Matrix<double, 10, 10> Apow = Eigen::Matrix<double, 10, 10>::Identity();
  dyn.Phi.block<10, 10>(0, 0) = Apow;
  for (long k = 1; k <= T; ++k) {
    // Row block k reuses row block k-1: x_k = A x_{k-1} + B u_{k-1}.
    dyn.Phi.block<10, 10>(10 * k, 0) = dyn.A * dyn.Phi.block<10, 10>(10 * (k - 1), 0);
    dyn.Gamma.middleRows(10 * k, 10) = dyn.A * dyn.Gamma.middleRows(10 * (k - 1), 10);
    dyn.Gamma.block<10, 3>(10 * k, 3 * (k - 1)) = dyn.B;
  }
  (void)Apow;
  return dyn;
}

Eigen::MatrixXd rollout(const DiscreteDynamics& dyn, const MavStateVec& x0,
                        const Eigen::VectorXd& controls) {
  const long T = controls.size() / 3;
  Eigen::MatrixXd states(T + 1, 10);
  MavStateVec x = x0;
  states.row(0) = x.transpose();
  for (long k = 0; k < T; ++k) {
    x = dyn.A * x + dyn.B * controls.segment<3>(3 * k);
    states.row(k + 1) = x.transpose();
  }
  return states;
}

Eigen::VectorXd rollout_stacked(const DiscreteDynamics& dyn,
                                const MavStateVec& x0,
                                const Eigen::VectorXd& controls) {
  return dyn.Phi * x0 + dyn.Gamma * controls;
}

MavStateVec integrate_rk4(const MavParams& params, const MavStateVec& x0,
                          const MavInput& u, double dt, int substeps) {
  Eigen::Matrix<double, 10, 10> A;
  Eigen::Matrix<double, 10, 3> B;
  continuous_matrices(params, A, B);
  auto f = [&](const MavStateVec& x) -> MavStateVec { return A * x + B * u; };
  MavStateVec x = x0;
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) {
    const MavStateVec k1 = f(x);
    const MavStateVec k2 = f(x + 0.5 * h * k1);
    const MavStateVec k3 = f(x + 0.5 * h * k2);
    const MavStateVec k4 = f(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace hf
