#include "humanflow/nn.hpp"

#include <algorithm>
#include <cmath>

namespace hf {

Tensor ParamStore::create(const std::string& name, const Shape& shape, Rng& rng,
                          double stddev) {
  if (params_.count(name))
    throw TensorError("ParamStore: duplicate parameter name " + name);
  Tensor t = Tensor::randn(shape, rng, stddev);
  t.set_requires_grad(true);
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, const Shape& shape) {
  if (params_.count(name))
    throw TensorError("ParamStore: duplicate parameter name " + name);
  Tensor t = Tensor::zeros(shape);
  t.set_requires_grad(true);
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw TensorError("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

long ParamStore::total_size() const {
  long n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

Linear::Linear(ParamStore& ps, const std::string& prefix, long in, long out,
               Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  w = ps.create(prefix + ".w", {in, out}, rng, stddev);
  b = ps.create_zeros(prefix + ".b", {out});
}

Tensor Linear::operator()(const Tensor& x) const {
  return add(matmul(x, w), b);
}

Conv1dLayer::Conv1dLayer(ParamStore& ps, const std::string& prefix, long cin,
                         long cout, long k, int stride_, Rng& rng)
    : stride(stride_) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cin * k));
  w = ps.create(prefix + ".w", {cout, cin, k}, rng, stddev);
  b = ps.create_zeros(prefix + ".b", {cout});
}

Tensor Conv1dLayer::operator()(const Tensor& x) const {
  return conv1d(x, w, b, stride);
}

Conv3dLayer::Conv3dLayer(ParamStore& ps, const std::string& prefix, long cin,
                         long cout, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cin * 27));
  w = ps.create(prefix + ".w", {cout, cin, 3, 3, 3}, rng, stddev);
  b = ps.create_zeros(prefix + ".b", {cout});
}

Tensor Conv3dLayer::operator()(const Tensor& x) const {
  return conv3d(x, w, b);
}

TransformerLayer::TransformerLayer(ParamStore& ps, const std::string& prefix,
                                   long dim_, int heads_, bool gelu_ff_,
                                   Rng& rng)
    : dim(dim_), heads(heads_), gelu_ff(gelu_ff_) {
  if (dim % heads != 0)
    throw TensorError("TransformerLayer: dim not divisible by heads");
  wq = Linear(ps, prefix + ".wq", dim, dim, rng);
  wk = Linear(ps, prefix + ".wk", dim, dim, rng);
  wv = Linear(ps, prefix + ".wv", dim, dim, rng);
  wo = Linear(ps, prefix + ".wo", dim, dim, rng);
  ff1 = Linear(ps, prefix + ".ff1", dim, 4 * dim, rng);
  ff2 = Linear(ps, prefix + ".ff2", 4 * dim, dim, rng);
}

namespace {

Tensor film_modulate(const Tensor& x, const Tensor* scale,
                     const Tensor* shift) {
  // x (B,T,C); scale/shift (B,C) reshaped to broadcast over T.
  if (!scale && !shift) return x;
  Tensor y = x;
  const long batch = x.dim(0);
  const long c = x.dim(2);
  if (scale) {
    Tensor s = reshape(add_scalar(*scale, 1.0), {batch, 1, c});
    y = mul(y, s);
  }
  if (shift) {
    Tensor s = reshape(*shift, {batch, 1, c});
    y = add(y, s);
  }
  return y;
}

}  // namespace

Tensor TransformerLayer::forward(const Tensor& x, const Tensor* film_scale,
                                 const Tensor* film_shift) const {
  const long batch = x.dim(0);
  const long t = x.dim(1);
  const long hd = dim / heads;

  Tensor xn = film_modulate(layernorm(x, -1), film_scale, film_shift);

  auto split_heads = [&](const Tensor& v) {
    return reshape(permute(reshape(v, {batch, t, heads, hd}), {0, 2, 1, 3}),
                   {batch * heads, t, hd});
  };
  Tensor q = split_heads(wq(xn));
  Tensor k = split_heads(wk(xn));
  Tensor v = split_heads(wv(xn));

  Tensor scores =
      mul_scalar(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(double(hd)));
  Tensor attn = matmul(softmax(scores, -1), v);
  Tensor merged = reshape(
      permute(reshape(attn, {batch, heads, t, hd}), {0, 2, 1, 3}),
      {batch, t, dim});
  Tensor y = add(x, wo(merged));

  Tensor yn = film_modulate(layernorm(y, -1), film_scale, film_shift);
  Tensor h = ff1(yn);
  h = gelu_ff ? gelu(h) : relu(h);
  return add(y, ff2(h));
}

TransformerStack::TransformerStack(ParamStore& ps, const std::string& prefix,
                                   int depth, long dim, int heads, bool gelu_ff,
                                   Rng& rng) {
  for (int i = 0; i < depth; ++i)
    layers.emplace_back(ps, prefix + ".layer" + std::to_string(i), dim, heads,
                        gelu_ff, rng);
}

Tensor TransformerStack::forward(const Tensor& x) const {
  Tensor y = x;
  for (const auto& l : layers) y = l.forward(y);
  return y;
}

Tensor sinusoidal_positions(long t, long dim) {
  std::vector<double> data(static_cast<size_t>(t * dim), 0.0);
  for (long p = 0; p < t; ++p)
    for (long i = 0; i < dim / 2; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i) / double(dim));
      data[static_cast<size_t>(p * dim + 2 * i)] = std::sin(p * freq);
      data[static_cast<size_t>(p * dim + 2 * i + 1)] = std::cos(p * freq);
    }
  return Tensor::from_data({t, dim}, std::move(data));
}

void AdamW::step(ParamStore& params) { step(params, nullptr); }

void AdamW::step(ParamStore& params,
                 const std::function<bool(const std::string&)>& train) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, t] : params.all()) {
    if (train && !train(name)) continue;
    const auto& g = t.grad();
    auto& [m, v] = moments_[name];
    if (m.size() != g.size()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    double* p = t.data();
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw TensorError("AdamW: NaN/Inf gradient in parameter " + name);
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                         cfg_.weight_decay * p[i]);
    }
  }
}

GradCheckResult grad_check(
    const std::function<Tensor()>& loss_fn,
    const std::vector<std::pair<std::string, Tensor>>& params, double epsilon,
    long min_coords, Rng* rng) {
  for (const auto& [name, t] : params) {
    Tensor mutable_t = t;
    mutable_t.zero_grad();
  }
  Tensor loss = loss_fn();
  loss.backward();

  long total = 0;
  for (const auto& [name, t] : params) total += t.size();
  const long per_param =
      std::max<long>(1, (min_coords + static_cast<long>(params.size()) - 1) /
                            static_cast<long>(params.size()));

  Rng fallback(12345);
  Rng& r = rng ? *rng : fallback;

  GradCheckResult res;
  for (const auto& [name, t] : params) {
    const std::vector<double> analytic = t.grad();
    Tensor param = t;
    const long n = param.size();
    const long count = std::min<long>(n, per_param);
    for (long c = 0; c < count; ++c) {
      const long i = (n <= per_param) ? c : r.uniform_int(0, n - 1);
      double* data = param.data();
      const double orig = data[i];
      data[i] = orig + epsilon;
      const double lp = loss_fn().item();
      data[i] = orig - epsilon;
      const double lm = loss_fn().item();
      data[i] = orig;
      const double fd = (lp - lm) / (2.0 * epsilon);
      const double a = analytic[static_cast<size_t>(i)];
      const double denom = std::max({1e-6, std::abs(a), std::abs(fd)});
      const double rel = std::abs(a - fd) / denom;
      ++res.checked_coords;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
      }
    }
  }
  return res;
}

}  // namespace hf
