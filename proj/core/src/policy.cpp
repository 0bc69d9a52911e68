#include "humanflow/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace hf {

namespace {

/// World -> navigation frame: rotate xy by -yaw after subtracting the MAV
/// xy position; z stays world-referenced (scenes are grounded at z = 0).
Eigen::Vector3d to_nav_xy(const Eigen::Vector3d& q, const Eigen::Vector3d& p0,
                          double cy, double sy) {
  const double dx = q.x() - p0.x(), dy = q.y() - p0.y();
  return {cy * dx + sy * dy, -sy * dx + cy * dy, q.z()};
}

Eigen::Vector3d rotate_nav(const Eigen::Vector3d& v, double cy, double sy) {
  return {cy * v.x() + sy * v.y(), -sy * v.x() + cy * v.y(), v.z()};
}

void append_extras(std::vector<double>& data, const MavState& x0,
                   const Eigen::Vector3d& goal, double yaw,
                   const Eigen::Vector3d& human_root_nav) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const Eigen::Vector3d g_nav =
      rotate_nav(goal - x0.position, cy, sy);
  const Eigen::Vector3d v_nav = rotate_nav(x0.velocity, cy, sy);
  data.insert(data.end(),
              {g_nav.x(), g_nav.y(), g_nav.z(), v_nav.x(), v_nav.y(),
               v_nav.z(), x0.pitch, x0.roll, human_root_nav.x(),
               human_root_nav.y(), human_root_nav.z()});
}

MotionSequence window_to_nav(const MotionSequence& window, const Skeleton& skel,
                             const MavState& x0, double yaw) {
  MotionSequence filled = prefill_world(window, skel);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  for (long t = 0; t < filled.frames; ++t)
    for (long j = 0; j < filled.joints; ++j)
      filled.set_pos(t, j, to_nav_xy(filled.pos(t, j), x0.position, cy, sy));
  return filled;
}

}  // namespace

FlowPolicyObs build_obs(const MotionSequence& window, const OccupancyGrid* scene,
                        const MavState& x0, const Eigen::Vector3d& goal,
                        double yaw, const DiffusionModel& model,
                        const Skeleton& skel) {
  MotionSequence nav = window_to_nav(window, skel, x0, yaw);
  // The encoder is trained on root-anchored windows; anchor here and carry
  // the human's nav-frame offset through the extras instead.
  const Eigen::Vector3d root = nav.first_observed_root();
  for (long t = 0; t < nav.frames; ++t)
    for (long j = 0; j < nav.joints; ++j) {
      const Eigen::Vector3d p = nav.pos(t, j);
      nav.set_pos(t, j, {p.x() - root.x(), p.y() - root.y(), p.z()});
    }
  const Tensor z = model.codec().encode_noisy(motion_to_tensor(nav));

  FlowPolicyObs obs;
  obs.data = z.values();
  if (scene) {
    const Tensor zs =
        model.scene_encoder().forward(SceneEncoder::grid_to_tensor(*scene));
    obs.data.insert(obs.data.end(), zs.values().begin(), zs.values().end());
  } else {
    const long d_s = DenoiserConfig{}.d_s;
    obs.data.insert(obs.data.end(), static_cast<size_t>(d_s), 0.0);
  }
  append_extras(obs.data, x0, goal, yaw, root);
  return obs;
}

FlowPolicyObs build_obs_raw(const MotionSequence& window, const MavState& x0,
                            const Eigen::Vector3d& goal, double yaw,
                            const Skeleton& skel, long d_s) {
  const MotionSequence nav = window_to_nav(window, skel, x0, yaw);
  FlowPolicyObs obs;
  obs.data = nav.positions;
  obs.data.insert(obs.data.end(), static_cast<size_t>(d_s), 0.0);
  append_extras(obs.data, x0, goal, yaw, nav.first_observed_root());
  return obs;
}

FlowPolicy::FlowPolicy(const FlowPolicyConfig& cfg, const MavParams& mav,
                       ParamStore& ps, Rng& rng)
    : cfg_(cfg), mav_(mav) {
  if (cfg.horizon != mav.horizon)
    throw std::invalid_argument("flow policy: horizon mismatch");
  token_mlp_ = {Linear(ps, "policy.tok0", cfg.token_dim, 64, rng),
                Linear(ps, "policy.tok1", 64, 32, rng),
                Linear(ps, "policy.tok2", 32, 8, rng)};
  scene_mlp_ = {Linear(ps, "policy.sc0", cfg.d_s, 64, rng),
                Linear(ps, "policy.sc1", 64, 32, rng),
                Linear(ps, "policy.sc2", 32, 8, rng)};
  const long cond =
      cfg.action_dim() + cfg.tokens * 8 + 8 + cfg.extras() + cfg.time_features();
  head_ = {Linear(ps, "policy.h0", cond, 256, rng),
           Linear(ps, "policy.h1", 256, 128, rng),
           Linear(ps, "policy.h2", 128, 64, rng),
           Linear(ps, "policy.h3", 64, cfg.action_dim(), rng)};
  time_trunk_ = Linear(ps, "policy.tg", cfg.time_features(), 32, rng);
  gate_ = {Linear(ps, "policy.tg0", 32, 256, rng),
           Linear(ps, "policy.tg1", 32, 128, rng),
           Linear(ps, "policy.tg2", 32, 64, rng)};
}

Tensor FlowPolicy::run_mlp(const std::vector<Linear>& layers, const Tensor& x,
                           bool relu_last) const {
  Tensor h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size() || relu_last) h = relu(h);
  }
  return h;
}

Tensor FlowPolicy::velocity(const Tensor& y, const Tensor& obs,
                            const std::vector<double>& t) const {
  const long B = y.dim(0);
  if (obs.dim(1) != cfg_.obs_dim())
    throw std::invalid_argument("flow policy: observation width mismatch");
  if (t.size() != static_cast<size_t>(B))
    throw std::invalid_argument("flow policy: timestep count mismatch");

  const long seq_w = cfg_.tokens * cfg_.token_dim;
  Tensor seq = reshape(slice(obs, 1, 0, seq_w), {B, cfg_.tokens, cfg_.token_dim});
  seq = reshape(run_mlp(token_mlp_, seq, false), {B, cfg_.tokens * 8});
  const Tensor sc = run_mlp(scene_mlp_, slice(obs, 1, seq_w, cfg_.d_s), false);
  const Tensor extras = slice(obs, 1, seq_w + cfg_.d_s, cfg_.extras());
  // Fourier time features: a bare scalar t is too weak for the sharp
  // near-t=1 behavior of the optimal field.
  const long tf = cfg_.time_features();
  std::vector<double> tdata(static_cast<size_t>(B * tf));
  for (long b = 0; b < B; ++b) {
    const double ti = t[static_cast<size_t>(b)];
    double* row = tdata.data() + b * tf;
    row[0] = ti;
    for (int k = 0; 2 * k + 2 < tf; ++k) {
      const double w = std::pow(2.0, k) * 3.14159265358979323846 * ti;
      row[2 * k + 1] = std::sin(w);
      row[2 * k + 2] = std::cos(w);
    }
  }
  const Tensor tv = Tensor::from_data({B, tf}, std::move(tdata));
  const Tensor cond = concat({y, seq, sc, extras, tv}, 1);

  // Head with multiplicative time gating per hidden layer.
  const Tensor tg = relu(time_trunk_(tv));
  Tensor h = cond;
  for (size_t i = 0; i < head_.size(); ++i) {
    h = head_[i](h);
    if (i + 1 < head_.size()) {
      h = relu(h);
      h = add(h, mul(h, gate_[i](tg)));
    }
  }

  // Endpoint parameterization: the net predicts y(1); the field
  // (y1_hat - y)/(1-t) carries the stiff near-t=1 amplification
  // analytically instead of asking the MLP to learn it.
  std::vector<double> inv(static_cast<size_t>(B));
  for (long b = 0; b < B; ++b)
    inv[static_cast<size_t>(b)] =
        1.0 / std::max(1.0 - t[static_cast<size_t>(b)], 0.05);
  return mul(sub(h, y), Tensor::from_data({B, 1}, std::move(inv)));
}

Tensor FlowPolicy::fm_loss(const Tensor& obs, const Tensor& targets,
                           Rng& rng) const {
  const long B = targets.dim(0);
  const Tensor y0 = Tensor::randn(targets.shape(), rng);
  std::vector<double> t(static_cast<size_t>(B));
  for (auto& ti : t) ti = rng.uniform();
  std::vector<double> ct(t), c0(static_cast<size_t>(B));
  for (long b = 0; b < B; ++b) c0[static_cast<size_t>(b)] = 1.0 - t[static_cast<size_t>(b)];
  const Tensor y_t = add(mul(y0, Tensor::from_data({B, 1}, std::move(c0))),
                         mul(targets, Tensor::from_data({B, 1}, std::move(ct))));
  const Tensor v = velocity(y_t, obs, t);
  return mse(v, sub(targets, y0));
}

Eigen::VectorXd FlowPolicy::normalize(const Eigen::VectorXd& u) const {
  Eigen::VectorXd y(u.size());
  for (long k = 0; k * 3 < u.size(); ++k) {
    y[3 * k] = u[3 * k] / mav_.thrust_max;
    y[3 * k + 1] = u[3 * k + 1] / mav_.attitude_max;
    y[3 * k + 2] = u[3 * k + 2] / mav_.attitude_max;
  }
  return y;
}

Eigen::VectorXd FlowPolicy::denormalize(const Eigen::VectorXd& y) const {
  Eigen::VectorXd u(y.size());
  for (long k = 0; k * 3 < y.size(); ++k) {
    u[3 * k] = std::clamp(y[3 * k], -1.0, 1.0) * mav_.thrust_max;
    u[3 * k + 1] = std::clamp(y[3 * k + 1], -1.0, 1.0) * mav_.attitude_max;
    u[3 * k + 2] = std::clamp(y[3 * k + 2], -1.0, 1.0) * mav_.attitude_max;
  }
  return u;
}

std::vector<Eigen::Vector3d> FlowPolicy::act(const FlowPolicyObs& obs, Rng& rng,
                                             int steps) const {
  if (steps <= 0) steps = cfg_.flow_steps;
  if (obs.size() != cfg_.obs_dim())
    throw std::invalid_argument("flow policy: observation width mismatch");
  const long n = cfg_.action_dim();
  std::vector<double> y(static_cast<size_t>(n));
  for (auto& v : y) v = rng.normal();
  const Tensor o = Tensor::from_data({1, cfg_.obs_dim()},
                                     std::vector<double>(obs.data));
  const double h = 1.0 / static_cast<double>(steps);
  for (int s = 0; s < steps; ++s) {
    const Tensor yt = Tensor::from_data({1, n}, std::vector<double>(y));
    const Tensor v = velocity(yt, o, {s * h});
    for (long i = 0; i < n; ++i)
      y[static_cast<size_t>(i)] += h * v.data()[i];
  }
  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  const Eigen::VectorXd u = denormalize(yv);
  std::vector<Eigen::Vector3d> out;
  for (long k = 0; k < cfg_.horizon; ++k)
    out.emplace_back(u.segment<3>(3 * k));
  return out;
}

Tensor obs_batch(const std::vector<FlowPolicyObs>& obs) {
  if (obs.empty()) throw std::invalid_argument("obs_batch: empty");
  const long w = obs[0].size();
  std::vector<double> data;
  data.reserve(obs.size() * static_cast<size_t>(w));
  for (const auto& o : obs) {
    if (o.size() != w) throw std::invalid_argument("obs_batch: ragged widths");
    data.insert(data.end(), o.data.begin(), o.data.end());
  }
  return Tensor::from_data({static_cast<long>(obs.size()), w}, std::move(data));
}

}  // namespace hf
