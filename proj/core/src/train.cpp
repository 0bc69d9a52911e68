#include "humanflow/train.hpp"

#include <numeric>

namespace hf {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::vector<const MotionClip*> pick_batch(const std::vector<MotionClip>& corpus,
                                          long batch, Rng& rng) {
  std::vector<const MotionClip*> out;
  for (long b = 0; b < batch; ++b)
    out.push_back(&corpus[static_cast<size_t>(
        rng.uniform_int(0, static_cast<long>(corpus.size()) - 1))]);
  return out;
}

}  // namespace

double TrainLog::final_avg(long window) const {
  if (loss.empty()) return 0.0;
  const long n = std::min<long>(window, static_cast<long>(loss.size()));
  return std::accumulate(loss.end() - n, loss.end(), 0.0) /
         static_cast<double>(n);
}

TrainLog train_codec_stage(const DiffusionModel& model, ParamStore& ps,
                           const std::vector<MotionClip>& corpus,
                           const RunConfig& cfg, const Skeleton& skel,
                           Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("train codec: empty corpus");
  AdamWConfig ac;
  ac.lr = cfg.codec_lr;
  AdamW opt(ac);
  const auto trainable = [](const std::string& name) {
    return name.rfind("codec.enc.", 0) == 0 || name.rfind("codec.dec.", 0) == 0;
  };
  TrainLog log;
  for (long it = 0; it < cfg.codec_iters; ++it) {
    std::vector<MotionSequence> batch;
    for (const MotionClip* clip : pick_batch(corpus, cfg.batch, rng)) {
      MotionSequence seq = clip->seq;
      // Root-anchored canonical frame: every consumer subtracts the first
      // observed root before encoding, so the codec never sees offsets.
      const Eigen::Vector3d root = seq.first_observed_root();
      const double jx = -root.x();
      const double jy = -root.y();
      for (long t = 0; t < seq.frames; ++t)
        for (long j = 0; j < seq.joints; ++j) {
          const Eigen::Vector3d p = seq.pos(t, j);
          seq.set_pos(t, j, {p.x() + jx, p.y() + jy, p.z()});
        }
      batch.push_back(std::move(seq));
    }
    const Tensor h = motion_batch_to_tensor(batch);
    const Tensor pred = model.codec().decode(model.codec().encode(h));
    ps.zero_grad();
    AeLossTerms terms =
        ae_loss(pred, h, skel, batch[0].fps, model.codec_config());
    terms.total.backward();
    opt.step(ps, trainable);
    log.loss.push_back(terms.total.item());
  }
  return log;
}

TrainLog train_diffusion_stage(const DiffusionModel& model, ParamStore& ps,
                               const std::vector<MotionClip>& corpus,
                               const std::vector<const OccupancyGrid*>& scenes,
                               const RunConfig& cfg, const Skeleton& skel,
                               Rng& rng) {
  if (corpus.empty())
    throw std::invalid_argument("train diffusion: empty corpus");
  if (!scenes.empty() && scenes.size() != corpus.size())
    throw std::invalid_argument("train diffusion: scene count mismatch");
  AdamWConfig ac;
  ac.lr = cfg.diffusion_lr;
  AdamW opt(ac);
  const bool with_scenes = !scenes.empty();
  const auto trainable = [with_scenes](const std::string& name) {
    return starts_with(name, "den.") || starts_with(name, "codec.enc_noisy.") ||
           (with_scenes && starts_with(name, "scene."));
  };
  CorruptConfig corrupt_cfg;
  corrupt_cfg.noise_level = cfg.track_noise;
  TrainLog log;
  for (long it = 0; it < cfg.diffusion_iters; ++it) {
    std::vector<TrainItem> batch;
    for (long b = 0; b < cfg.batch; ++b) {
      const long i =
          rng.uniform_int(0, static_cast<long>(corpus.size()) - 1);
      TrainItem item;
      item.clip = &corpus[static_cast<size_t>(i)];
      item.scene = with_scenes ? scenes[static_cast<size_t>(i)] : nullptr;
      batch.push_back(item);
    }
    ps.zero_grad();
    DiffusionLossTerms terms =
        model.train_loss(batch, corrupt_cfg, rng, skel);
    terms.total.backward();
    opt.step(ps, trainable);
    log.loss.push_back(terms.total.item());
  }
  return log;
}

TrainLog train_policy_stage(const FlowPolicy& policy, ParamStore& ps,
                            const std::vector<FlowPolicyObs>& observations,
                            const std::vector<PolicyPair>& pairs,
                            const RunConfig& cfg, Rng& rng) {
  if (pairs.empty()) throw std::invalid_argument("train policy: no pairs");
  AdamWConfig ac;
  ac.lr = cfg.policy_lr;
  AdamW opt(ac);
  const long action_dim = policy.config().action_dim();
  TrainLog log;
  for (long it = 0; it < cfg.policy_iters; ++it) {
    std::vector<FlowPolicyObs> obs;
    std::vector<double> tgt;
    for (long b = 0; b < cfg.policy_batch; ++b) {
      const auto& pair = pairs[static_cast<size_t>(
          rng.uniform_int(0, static_cast<long>(pairs.size()) - 1))];
      obs.push_back(observations[static_cast<size_t>(pair.obs_index)]);
      if (pair.target.size() != action_dim)
        throw std::invalid_argument("train policy: target length mismatch");
      tgt.insert(tgt.end(), pair.target.data(),
                 pair.target.data() + action_dim);
    }
    const Tensor targets =
        Tensor::from_data({cfg.policy_batch, action_dim}, std::move(tgt));
    ps.zero_grad();
    Tensor loss = policy.fm_loss(obs_batch(obs), targets, rng);
    loss.backward();
    opt.step(ps);
    log.loss.push_back(loss.item());
  }
  return log;
}

}  // namespace hf
