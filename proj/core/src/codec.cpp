#include "humanflow/codec.hpp"

#include <algorithm>
#include <stdexcept>

namespace hf {

std::vector<Eigen::Vector3d> mean_pose(const Skeleton& skel) {
  std::vector<Eigen::Vector3d> pose = skel.rest_positions();
  double z_min = 0.0;
  for (const auto& p : pose) z_min = std::min(z_min, p.z());
  for (auto& p : pose) p.z() -= z_min;
  return pose;
}

MotionSequence prefill(const MotionSequence& seq, const Skeleton& skel) {
  const auto mp = mean_pose(skel);
  MotionSequence out = seq;
  bool seen_valid = false;
  for (long t = 0; t < seq.frames; ++t) {
    if (seq.frame_observed(t)) {
      for (long j = 0; j < seq.joints; ++j)
        if (!seq.observed(t, j))
          out.set_pos(t, j, mp[static_cast<size_t>(j)]);
      seen_valid = true;
    } else if (seen_valid) {
      for (long j = 0; j < seq.joints; ++j)
        out.set_pos(t, j, out.pos(t - 1, j));  // zero-order hold
    } else {
      for (long j = 0; j < seq.joints; ++j)
        out.set_pos(t, j, mp[static_cast<size_t>(j)]);
    }
  }
  return out;
}

Tensor motion_to_tensor(const MotionSequence& seq) {
  return Tensor::from_data({1, seq.frames, seq.joints * 3}, seq.positions);
}

Tensor motion_batch_to_tensor(const std::vector<MotionSequence>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("empty motion batch");
  const long T = seqs[0].frames, F = seqs[0].joints * 3;
  std::vector<double> data;
  data.reserve(static_cast<size_t>(static_cast<long>(seqs.size()) * T * F));
  for (const auto& s : seqs) {
    if (s.frames != T || s.joints * 3 != F)
      throw std::invalid_argument("motion batch: inconsistent shapes");
    data.insert(data.end(), s.positions.begin(), s.positions.end());
  }
  return Tensor::from_data({static_cast<long>(seqs.size()), T, F},
                           std::move(data));
}

MotionSequence tensor_to_motion(const Tensor& x, long batch_index, double fps) {
  if (x.ndim() != 3) throw std::invalid_argument("tensor_to_motion: need 3D");
  const long T = x.dim(1), F = x.dim(2);
  MotionSequence seq(T, F / 3, fps);
  const double* src = x.data() + batch_index * T * F;
  std::copy(src, src + T * F, seq.positions.begin());
  std::fill(seq.mask.begin(), seq.mask.end(), uint8_t{1});
  return seq;
}

MotionCodec::EncoderTower MotionCodec::make_tower(ParamStore& ps,
                                                  const std::string& prefix,
                                                  Rng& rng) {
  EncoderTower t;
  t.c1a = Conv1dLayer(ps, prefix + ".c1a", cfg_.features(), cfg_.d_z, 3, 2, rng);
  t.c1b = Conv1dLayer(ps, prefix + ".c1b", cfg_.d_z, cfg_.d_z, 1, 1, rng);
  t.c2a = Conv1dLayer(ps, prefix + ".c2a", cfg_.d_z, cfg_.d_z, 3, 2, rng);
  t.c2b = Conv1dLayer(ps, prefix + ".c2b", cfg_.d_z, cfg_.d_z, 1, 1, rng);
  t.stack = TransformerStack(ps, prefix + ".tf", cfg_.depth, cfg_.d_z,
                             cfg_.heads, true, rng);
  return t;
}

MotionCodec::MotionCodec(const CodecConfig& cfg, ParamStore& ps, Rng& rng)
    : cfg_(cfg) {
  if (cfg_.frames % 4 != 0)
    throw std::invalid_argument("codec: frames must be divisible by 4");
  if (cfg_.d_z % cfg_.heads != 0)
    throw std::invalid_argument("codec: d_z must be divisible by heads");
  enc_ = make_tower(ps, "codec.enc", rng);
  enc_noisy_ = make_tower(ps, "codec.enc_noisy", rng);
  dec_stack_ = TransformerStack(ps, "codec.dec.tf", cfg_.depth, cfg_.d_z,
                                cfg_.heads, true, rng);
  dec_c1a_ = Conv1dLayer(ps, "codec.dec.c1a", cfg_.d_z, cfg_.d_z, 3, 1, rng);
  dec_c1b_ = Conv1dLayer(ps, "codec.dec.c1b", cfg_.d_z, cfg_.d_z, 1, 1, rng);
  dec_c2a_ = Conv1dLayer(ps, "codec.dec.c2a", cfg_.d_z, cfg_.d_z, 3, 1, rng);
  dec_c2b_ = Conv1dLayer(ps, "codec.dec.c2b", cfg_.d_z, cfg_.features(), 1, 1,
                         rng);
  pos_latent_ = sinusoidal_positions(cfg_.latent_frames(), cfg_.d_z);
}

Tensor MotionCodec::run_tower(const EncoderTower& tower, const Tensor& h) const {
  if (h.ndim() != 3 || h.dim(1) != cfg_.frames || h.dim(2) != cfg_.features())
    throw std::invalid_argument("codec encode: bad input shape " +
                                shape_str(h.shape()));
  Tensor x = permute(h, {0, 2, 1});  // (B, F, T)
  x = relu(tower.c1a(x));
  x = relu(tower.c1b(x));
  x = relu(tower.c2a(x));
  x = relu(tower.c2b(x));
  x = permute(x, {0, 2, 1});  // (B, T', d_z)
  x = add(x, pos_latent_);
  return tower.stack.forward(x);
}

Tensor MotionCodec::encode(const Tensor& h) const { return run_tower(enc_, h); }

Tensor MotionCodec::encode_noisy(const Tensor& h) const {
  return run_tower(enc_noisy_, h);
}

Tensor MotionCodec::decode(const Tensor& z) const {
  if (z.ndim() != 3 || z.dim(1) != cfg_.latent_frames() ||
      z.dim(2) != cfg_.d_z)
    throw std::invalid_argument("codec decode: bad latent shape " +
                                shape_str(z.shape()));
  Tensor x = dec_stack_.forward(add(z, pos_latent_));
  x = permute(x, {0, 2, 1});  // (B, d_z, T')
  x = upsample_nearest_x2(x);
  x = relu(dec_c1a_(x));
  x = relu(dec_c1b_(x));
  x = upsample_nearest_x2(x);
  x = relu(dec_c2a_(x));
  x = dec_c2b_(x);
  return permute(x, {0, 2, 1});  // (B, T, F)
}

BoneEdges skeleton_edges(const Skeleton& skel) {
  BoneEdges edges;
  for (int j = 0; j < Skeleton::kJoints; ++j)
    if (skel.parent[static_cast<size_t>(j)] >= 0)
      edges.emplace_back(j, skel.parent[static_cast<size_t>(j)]);
  return edges;
}

Tensor position_loss(const Tensor& pred, const Tensor& target) {
  return mul_scalar(mse(pred, target), 3.0);
}

Tensor velocity_loss(const Tensor& pred, const Tensor& target, double fps) {
  const long T = pred.dim(1);
  if (T < 2) return Tensor::zeros({1});
  auto vel = [&](const Tensor& x) {
    return mul_scalar(sub(slice(x, 1, 1, T - 1), slice(x, 1, 0, T - 1)), fps);
  };
  return mul_scalar(mse(vel(pred), vel(target)), 3.0);
}

Tensor bone_loss(const Tensor& pred, const BoneEdges& edges) {
  const long T = pred.dim(1);
  if (T < 2 || edges.empty()) return Tensor::zeros({1});
  Tensor acc;
  for (const auto& [child, parent] : edges) {
    const Tensor d = sub(slice(pred, 2, 3 * child, 3),
                         slice(pred, 2, 3 * parent, 3));
    // Squared norm via mean over xyz * 3, then length and temporal change.
    const Tensor len = sqrt_t(mul_scalar(mean_axes(mul(d, d), {2}), 3.0));
    const Tensor dl = sub(slice(len, 1, 1, T - 1), slice(len, 1, 0, T - 1));
    const Tensor term = mean_all(mul(dl, dl));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(edges.size()));
}

Tensor foot_contact_loss(const Tensor& pred, const std::vector<int>& foot_ids,
                         const std::vector<uint8_t>& contact, double fps) {
  const long B = pred.dim(0), T = pred.dim(1);
  const long Jf = static_cast<long>(foot_ids.size());
  if (T < 2 || Jf == 0) return Tensor::zeros({1});
  const bool per_batch = contact.size() == static_cast<size_t>(B * T * Jf);
  if (!per_batch && contact.size() != static_cast<size_t>(T * Jf))
    throw std::invalid_argument("foot_contact_loss: contact size mismatch");
  Tensor acc;
  for (long f = 0; f < Jf; ++f) {
    const Tensor p = slice(pred, 2, 3 * foot_ids[static_cast<size_t>(f)], 3);
    const Tensor v =
        mul_scalar(sub(slice(p, 1, 1, T - 1), slice(p, 1, 0, T - 1)), fps);
    const Tensor sq = mul_scalar(mean_axes(mul(v, v), {2}), 3.0);  // (B, T-1)
    std::vector<double> gate(static_cast<size_t>(B * (T - 1)));
    for (long b = 0; b < B; ++b)
      for (long t = 0; t + 1 < T; ++t)
        gate[static_cast<size_t>(b * (T - 1) + t)] =
            contact[static_cast<size_t>((per_batch ? b * T : 0) * Jf +
                                        t * Jf + f)]
                ? 1.0
                : 0.0;
    const Tensor gated =
        mul(sq, Tensor::from_data({B, T - 1}, std::move(gate)));
    const Tensor term = mean_all(gated);  // /(B (T-1))
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(Jf));
}

AeLossTerms ae_loss(const Tensor& pred, const Tensor& target,
                    const Skeleton& skel, double fps, const CodecConfig& cfg) {
  AeLossTerms t;
  t.mse = position_loss(pred, target);
  t.vel = velocity_loss(pred, target, fps);
  t.bone = bone_loss(pred, skeleton_edges(skel));
  t.total = add(t.mse, add(mul_scalar(t.vel, cfg.lambda_vel),
                           mul_scalar(t.bone, cfg.lambda_bone)));
  return t;
}

}  // namespace hf
