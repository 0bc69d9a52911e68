#include "humanflow/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "humanflow/metrics.hpp"

namespace hf {

DdpmSchedule DdpmSchedule::make(long train_steps, long inference_steps,
                                double beta_start, double beta_end) {
  if (train_steps < 2 || inference_steps < 1 ||
      train_steps % inference_steps != 0)
    throw std::invalid_argument("ddpm schedule: bad step counts");
  DdpmSchedule s;
  s.train_steps = train_steps;
  s.inference_steps = inference_steps;
  s.beta.resize(static_cast<size_t>(train_steps));
  s.alpha.resize(static_cast<size_t>(train_steps));
  s.alpha_bar.resize(static_cast<size_t>(train_steps));
  double prod = 1.0;
  for (long t = 0; t < train_steps; ++t) {
    s.beta[static_cast<size_t>(t)] =
        beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                         static_cast<double>(train_steps - 1);
    s.alpha[static_cast<size_t>(t)] = 1.0 - s.beta[static_cast<size_t>(t)];
    prod *= s.alpha[static_cast<size_t>(t)];
    s.alpha_bar[static_cast<size_t>(t)] = prod;
  }
  return s;
}

std::vector<long> DdpmSchedule::inference_timesteps() const {
  const long stride = train_steps / inference_steps;
  std::vector<long> ts;
  for (long t = train_steps; t >= stride; t -= stride) ts.push_back(t);
  return ts;
}

// ---------------------------------------------------------------------------

SceneEncoder::SceneEncoder(ParamStore& ps, long d_s, Rng& rng) {
  c1_ = Conv3dLayer(ps, "scene.c1", 1, 8, rng);
  c2_ = Conv3dLayer(ps, "scene.c2", 8, 16, rng);
  c3_ = Conv3dLayer(ps, "scene.c3", 16, 32, rng);
  proj_ = Linear(ps, "scene.proj", 32, d_s, rng);
}

Tensor SceneEncoder::forward(const Tensor& grid) const {
  if (grid.ndim() != 5 || grid.dim(1) != 1)
    throw std::invalid_argument("scene encoder: need (B,1,D,H,W) input");
  Tensor x = relu(c1_(grid));
  x = relu(c2_(x));
  x = relu(c3_(x));
  x = mean_axes(x, {2, 3, 4});  // global average pool -> (B, 32)
  return proj_(x);
}

Tensor SceneEncoder::grid_to_tensor(const OccupancyGrid& grid) {
  std::vector<double> data(grid.states.size());
  for (size_t i = 0; i < grid.states.size(); ++i)
    data[i] = grid.states[i] == Voxel::Free
                  ? 0.0
                  : (grid.states[i] == Voxel::Occupied ? 1.0 : 0.5);
  return Tensor::from_data({1, 1, grid.nx, grid.ny, grid.nz}, std::move(data));
}

// ---------------------------------------------------------------------------

Denoiser::Denoiser(const CodecConfig& codec_cfg, const DenoiserConfig& cfg,
                   ParamStore& ps, Rng& rng)
    : codec_cfg_(codec_cfg), cfg_(cfg) {
  in_proj_ = Linear(ps, "den.in", 2 * codec_cfg.d_z, cfg.hidden, rng);
  out_proj_ = Linear(ps, "den.out", cfg.hidden, codec_cfg.d_z, rng);
  time_proj_ = Linear(ps, "den.time", cfg.hidden, cfg.hidden, rng);
  mask_table_ = ps.create("den.mask_embed", {2, cfg.hidden}, rng, 0.02);
  for (int l = 0; l < cfg.depth; ++l) {
    layers_.emplace_back(ps, "den.tf" + std::to_string(l), cfg.hidden,
                         cfg.heads, true, rng);
    film_.emplace_back(ps, "den.film" + std::to_string(l), cfg.d_s,
                       2 * cfg.hidden, rng);
  }
  pos_ = sinusoidal_positions(codec_cfg.latent_frames(), cfg.hidden);
}

Tensor Denoiser::forward(const Tensor& z_t, const Tensor& z_noisy,
                         const std::vector<long>& mask_ids,
                         const std::vector<long>& timesteps, long train_steps,
                         const Tensor* scene_latent) const {
  const long B = z_t.dim(0), Tl = z_t.dim(1);
  if (mask_ids.size() != static_cast<size_t>(B * Tl))
    throw std::invalid_argument("denoiser: mask id count mismatch");
  if (timesteps.size() != static_cast<size_t>(B))
    throw std::invalid_argument("denoiser: timestep count mismatch");

  Tensor x = in_proj_(concat({z_t, z_noisy}, 2));
  x = add(x, pos_);
  x = add(x, reshape(embedding(mask_table_, mask_ids), {B, Tl, cfg_.hidden}));
  const Tensor time_table =
      sinusoidal_positions(train_steps + 1, cfg_.hidden);
  Tensor tt = time_proj_(embedding(time_table, timesteps));
  x = add(x, reshape(tt, {B, 1, cfg_.hidden}));

  for (size_t l = 0; l < layers_.size(); ++l) {
    if (scene_latent) {
      const Tensor f = film_[l](*scene_latent);  // (B, 2*hidden)
      const Tensor scale = slice(f, 1, 0, cfg_.hidden);
      const Tensor shift = slice(f, 1, cfg_.hidden, cfg_.hidden);
      x = layers_[l].forward(x, &scale, &shift);
    } else {
      x = layers_[l].forward(x);
    }
  }
  return out_proj_(x);
}

// ---------------------------------------------------------------------------

namespace {

void translate_xy(MotionSequence& seq, double dx, double dy) {
  for (long t = 0; t < seq.frames; ++t)
    for (long j = 0; j < seq.joints; ++j) {
      const Eigen::Vector3d p = seq.pos(t, j);
      seq.set_pos(t, j, {p.x() + dx, p.y() + dy, p.z()});
    }
}

/// Majority-pooled observed/unobserved token per latent step.
std::vector<long> latent_mask_ids(const MotionSequence& seq, long latent_frames) {
  const long window = seq.frames / latent_frames;
  std::vector<long> ids(static_cast<size_t>(latent_frames));
  for (long lt = 0; lt < latent_frames; ++lt) {
    long observed = 0;
    for (long t = lt * window; t < (lt + 1) * window; ++t)
      if (seq.frame_observed(t)) ++observed;
    ids[static_cast<size_t>(lt)] = 2 * observed >= window ? 1 : 0;
  }
  return ids;
}

}  // namespace

MotionSequence prefill_world(const MotionSequence& observed,
                             const Skeleton& skel) {
  const Eigen::Vector3d root = observed.first_observed_root();
  MotionSequence canonical = observed;
  translate_xy(canonical, -root.x(), -root.y());
  MotionSequence filled = prefill(canonical, skel);
  translate_xy(filled, root.x(), root.y());
  return filled;
}

DiffusionModel::DiffusionModel(const CodecConfig& codec_cfg,
                               const DenoiserConfig& den_cfg, ParamStore& ps,
                               Rng& rng)
    : codec_(codec_cfg, ps, rng),
      scene_(ps, den_cfg.d_s, rng),
      den_(codec_cfg, den_cfg, ps, rng),
      sched_(DdpmSchedule::make()) {}

DiffusionLossTerms DiffusionModel::train_loss(
    const std::vector<TrainItem>& batch, const CorruptConfig& corrupt_cfg,
    Rng& rng, const Skeleton& skel, double xy_jitter) const {
  if (batch.empty()) throw std::invalid_argument("train_loss: empty batch");
  const CodecConfig& cc = codec_.config();
  const long B = static_cast<long>(batch.size());
  const long Tl = cc.latent_frames();

  std::vector<MotionSequence> clean_shifted, filled_shifted;
  std::vector<long> mask_ids, timesteps;
  std::vector<uint8_t> contacts;
  const auto& foot_ids = batch[0].clip->contacts.foot_joint_ids;
  bool all_scenes = true;
  for (const auto& item : batch) {
    const MotionClip& clip = *item.clip;
    MotionSequence corrupted = corrupt(skel, clip.poses, corrupt_cfg, rng,
                                       clip.seq.fps);
    const Eigen::Vector3d root = corrupted.first_observed_root();
    double jx = 0.0, jy = 0.0;
    if (xy_jitter > 0.0) {
      jx = rng.uniform(-xy_jitter, xy_jitter);
      jy = rng.uniform(-xy_jitter, xy_jitter);
    }
    translate_xy(corrupted, jx - root.x(), jy - root.y());
    MotionSequence clean = clip.seq;
    translate_xy(clean, jx - root.x(), jy - root.y());
    clean_shifted.push_back(std::move(clean));
    filled_shifted.push_back(prefill(corrupted, skel));
    const auto ids = latent_mask_ids(corrupted, Tl);
    mask_ids.insert(mask_ids.end(), ids.begin(), ids.end());
    timesteps.push_back(rng.uniform_int(1, sched_.train_steps));
    contacts.insert(contacts.end(), clip.contacts.contact.begin(),
                    clip.contacts.contact.end());
    if (!item.scene) all_scenes = false;
  }

  const Tensor h0 = motion_batch_to_tensor(clean_shifted);
  const Tensor h_fill = motion_batch_to_tensor(filled_shifted);
  const Tensor z0 = codec_.encode(h0);
  const Tensor z_noisy = codec_.encode_noisy(h_fill);

  // Forward noising at per-sample timesteps.
  std::vector<double> sa(static_cast<size_t>(B)), so(static_cast<size_t>(B));
  for (long b = 0; b < B; ++b) {
    const double ab =
        sched_.alpha_bar[static_cast<size_t>(timesteps[static_cast<size_t>(b)] - 1)];
    sa[static_cast<size_t>(b)] = std::sqrt(ab);
    so[static_cast<size_t>(b)] = std::sqrt(1.0 - ab);
  }
  const Tensor eps = Tensor::randn(z0.shape(), rng);
  const Tensor z_t =
      add(mul(z0, Tensor::from_data({B, 1, 1}, std::move(sa))),
          mul(eps, Tensor::from_data({B, 1, 1}, std::move(so))));

  Tensor scene_latent;
  const Tensor* scene_ptr = nullptr;
  if (all_scenes) {
    std::vector<Tensor> grids;
    for (const auto& item : batch)
      grids.push_back(SceneEncoder::grid_to_tensor(*item.scene));
    scene_latent = scene_.forward(concat(grids, 0));
    scene_ptr = &scene_latent;
  }

  const Tensor z0_hat = den_.forward(z_t, z_noisy, mask_ids, timesteps,
                                     sched_.train_steps, scene_ptr);
  const Tensor pred = codec_.decode(z0_hat);

  DiffusionLossTerms lt;
  lt.diff = mse(z0_hat, z0);
  lt.vel = velocity_loss(pred, h0, clean_shifted[0].fps);
  lt.foot = foot_contact_loss(pred, foot_ids, contacts, clean_shifted[0].fps);
  lt.bone = bone_loss(pred, skeleton_edges(skel));
  lt.total = add(lt.diff, add(mul_scalar(lt.vel, lambda_vel),
                              add(mul_scalar(lt.foot, lambda_foot),
                                  mul_scalar(lt.bone, lambda_bone))));
  return lt;
}

MotionSequence DiffusionModel::prefill_baseline(const MotionSequence& observed,
                                                const Skeleton& skel) const {
  return prefill_world(observed, skel);
}

std::vector<MotionSequence> DiffusionModel::sample(
    const MotionSequence& observed, const OccupancyGrid* scene, long n_samples,
    Rng& rng, const Skeleton& skel) const {
  const CodecConfig& cc = codec_.config();
  if (observed.frames != cc.frames)
    throw std::invalid_argument("sample: sequence length mismatch");
  const long Tl = cc.latent_frames();
  const Eigen::Vector3d root = observed.first_observed_root();
  MotionSequence canonical = observed;
  translate_xy(canonical, -root.x(), -root.y());
  const MotionSequence filled = prefill(canonical, skel);

  const Tensor z_noisy_one = codec_.encode_noisy(motion_to_tensor(filled));
  std::vector<Tensor> reps(static_cast<size_t>(n_samples), z_noisy_one);
  const Tensor z_noisy = concat(reps, 0);

  const auto ids_one = latent_mask_ids(canonical, Tl);
  std::vector<long> mask_ids;
  for (long b = 0; b < n_samples; ++b)
    mask_ids.insert(mask_ids.end(), ids_one.begin(), ids_one.end());

  Tensor scene_latent;
  const Tensor* scene_ptr = nullptr;
  if (scene) {
    const Tensor one = scene_.forward(SceneEncoder::grid_to_tensor(*scene));
    std::vector<Tensor> srep(static_cast<size_t>(n_samples), one);
    scene_latent = concat(srep, 0);
    scene_ptr = &scene_latent;
  }

  Tensor z = Tensor::randn({n_samples, Tl, cc.d_z}, rng);
  Tensor z0_hat;
  const auto ts = sched_.inference_timesteps();
  for (size_t step = 0; step < ts.size(); ++step) {
    const long t = ts[step];
    const std::vector<long> tvec(static_cast<size_t>(n_samples), t);
    z0_hat = den_.forward(z, z_noisy, mask_ids, tvec, sched_.train_steps,
                          scene_ptr);
    const long s = step + 1 < ts.size() ? ts[step + 1] : 0;
    if (s == 0) {
      z = z0_hat;
      break;
    }
    const double ab_t = sched_.alpha_bar[static_cast<size_t>(t - 1)];
    const double ab_s = sched_.alpha_bar[static_cast<size_t>(s - 1)];
    const double a_ts = ab_t / ab_s;
    const double c0 = std::sqrt(ab_s) * (1.0 - a_ts) / (1.0 - ab_t);
    const double ct = std::sqrt(a_ts) * (1.0 - ab_s) / (1.0 - ab_t);
    const double var = (1.0 - ab_s) / (1.0 - ab_t) * (1.0 - a_ts);
    const Tensor noise = Tensor::randn(z.shape(), rng, std::sqrt(var));
    z = add(add(mul_scalar(z0_hat, c0), mul_scalar(z, ct)), noise);
  }

  const Tensor decoded = codec_.decode(z);
  std::vector<MotionSequence> out;
  for (long b = 0; b < n_samples; ++b) {
    MotionSequence seq = tensor_to_motion(decoded, b, observed.fps);
    translate_xy(seq, root.x(), root.y());
    out.push_back(std::move(seq));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

TrackingRow benchmark_tracking(const std::vector<MotionClip>& corpus,
                               TrackProtocol protocol, double noise_k,
                               const TrackSampler& sampler, long n_samples,
                               const Skeleton& skel, Rng& rng) {
  TrackingRow row;
  row.protocol = protocol == TrackProtocol::OccLower ? "occl" : "occ10";
  row.noise_k = noise_k;
  std::vector<double> vis, occ, all, acc, skate, dist, base_occ, base_acc;
  for (const auto& clip : corpus) {
    MotionSequence observed;
    if (noise_k > 0.0) {
      CorruptConfig cfg;
      cfg.noise_level = noise_k;
      cfg.frame_dropout_p = 0.0;
      cfg.part_dropout_p = 0.0;
      cfg.forecast_p = 0.0;
      observed = corrupt(skel, clip.poses, cfg, rng, clip.seq.fps);
    } else {
      observed = clip.seq;
    }
    if (protocol == TrackProtocol::OccLower)
      mask_lower_body(skel, observed);
    else
      mask_contiguous_fraction(observed, 0.1, rng);

    const MotionSequence baseline = prefill_world(observed, skel);
    {
      const GmpjpeResult g = gmpjpe(baseline, clip.seq, observed.mask);
      if (g.occ) base_occ.push_back(*g.occ);
      base_acc.push_back(accel_error(baseline, clip.seq));
    }

    const auto samples = sampler(observed, n_samples, rng);
    std::vector<double> s_vis, s_occ, s_all, s_acc, s_skate, s_dist;
    for (const auto& s : samples) {
      const GmpjpeResult g = gmpjpe(s, clip.seq, observed.mask);
      if (g.vis) s_vis.push_back(*g.vis);
      if (g.occ) s_occ.push_back(*g.occ);
      if (g.all) s_all.push_back(*g.all);
      s_acc.push_back(accel_error(s, clip.seq));
      s_skate.push_back(skating_ratio(s, skel));
      s_dist.push_back(ground_penetration(s, skel));
    }
    if (!s_vis.empty()) vis.push_back(mean_of(s_vis));
    if (!s_occ.empty()) occ.push_back(mean_of(s_occ));
    if (!s_all.empty()) all.push_back(mean_of(s_all));
    acc.push_back(mean_of(s_acc));
    skate.push_back(mean_of(s_skate));
    dist.push_back(mean_of(s_dist));
  }
  row.gmpjpe_vis_mean = mean_of(vis);
  row.gmpjpe_vis_std = std_of(vis);
  row.gmpjpe_occ_mean = mean_of(occ);
  row.gmpjpe_occ_std = std_of(occ);
  row.gmpjpe_all_mean = mean_of(all);
  row.gmpjpe_all_std = std_of(all);
  row.accel_mean = mean_of(acc);
  row.accel_std = std_of(acc);
  row.skate_mean = mean_of(skate);
  row.dist_mean = mean_of(dist);
  row.baseline_occ_mean = mean_of(base_occ);
  row.baseline_accel_mean = mean_of(base_acc);
  return row;
}

}  // namespace hf
