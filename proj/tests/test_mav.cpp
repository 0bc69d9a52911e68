#include <doctest.h>

#include "humanflow/mav.hpp"
#include "humanflow/rng.hpp"

using namespace hf;

TEST_CASE("discretize: tiny sampling time is near identity") {
  MavParams p;
  p.dt = 1e-6;
  DiscreteDynamics dyn = discretize(p);
  CHECK((dyn.A - Eigen::Matrix<double, 10, 10>::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-4);
  CHECK(dyn.B.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("discretize: hover is an equilibrium") {
  MavParams p;
  DiscreteDynamics dyn = discretize(p);
  MavStateVec x = MavStateVec::Zero();
  MavStateVec next = dyn.A * x + dyn.B * Eigen::Vector3d::Zero();
  CHECK(next.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discretize matches 1000-substep RK4 on random state/input pairs") {
  MavParams p;
  DiscreteDynamics dyn = discretize(p);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    MavStateVec x;
    for (int i = 0; i < 10; ++i) x[i] = rng.normal();
    Eigen::Vector3d u(rng.uniform(-p.thrust_max, p.thrust_max),
                      rng.uniform(-p.attitude_max, p.attitude_max),
                      rng.uniform(-p.attitude_max, p.attitude_max));
    MavStateVec exact = dyn.A * x + dyn.B * u;
    MavStateVec fine = integrate_rk4(p, x, u, p.dt, 1000);
    CHECK((exact - fine).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("rollout: zero input from origin stays at origin") {
  MavParams p;
  DiscreteDynamics dyn = discretize(p);
  Eigen::MatrixXd xs = rollout(dyn, MavStateVec::Zero(),
                               Eigen::VectorXd::Zero(3 * p.horizon));
  CHECK(xs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rollout: constant thrust gives increasing climb rate") {
  MavParams p;
  DiscreteDynamics dyn = discretize(p);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(3 * p.horizon);
  for (long k = 0; k < p.horizon; ++k) u[3 * k] = 1.0;
  Eigen::MatrixXd xs = rollout(dyn, MavStateVec::Zero(), u);
  for (long k = 0; k < p.horizon; ++k) CHECK(xs(k + 1, 5) > xs(k, 5));
}

TEST_CASE("stacked rollout equals the recursion") {
  MavParams p;
  DiscreteDynamics dyn = discretize(p);
  Rng rng(32);
  MavStateVec x0;
  for (int i = 0; i < 10; ++i) x0[i] = rng.normal();
  Eigen::VectorXd u(3 * p.horizon);
  for (long i = 0; i < u.size(); ++i) u[i] = rng.normal();
  Eigen::MatrixXd rec = rollout(dyn, x0, u);
  Eigen::VectorXd stacked = rollout_stacked(dyn, x0, u);
  for (long k = 0; k <= p.horizon; ++k)
    for (int i = 0; i < 10; ++i)
      CHECK(std::abs(rec(k, i) - stacked[10 * k + i]) < 1e-12);
}

TEST_CASE("MavState vector round trip") {
  MavState s;
  s.position = {1, 2, 3};
  s.velocity = {0.1, 0.2, 0.3};
  s.pitch = 0.05;
  s.roll = -0.04;
  s.pitch_rate = 0.5;
  s.roll_rate = -0.6;
  MavState back = MavState::from_vec(s.to_vec());
  CHECK((back.to_vec() - s.to_vec()).cwiseAbs().maxCoeff() == 0.0);
}
