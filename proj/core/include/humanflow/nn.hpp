#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "humanflow/tensor.hpp"

namespace hf {

/// Named parameter registry. Names are unique; iteration order is sorted,
/// which keeps optimizer sweeps and checkpoints deterministic.
class ParamStore {
 public:
  Tensor create(const std::string& name, const Shape& shape, Rng& rng,
                double stddev);
  Tensor create_zeros(const std::string& name, const Shape& shape);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::map<std::string, Tensor>& all() { return params_; }
  const std::map<std::string, Tensor>& all() const { return params_; }
  void zero_grad();
  long total_size() const;

 private:
  std::map<std::string, Tensor> params_;
};

struct Linear {
  Tensor w;  // (in, out)
  Tensor b;  // (out)

  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, long in, long out,
         Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct Conv1dLayer {
  Tensor w;  // (Cout, Cin, K)
  Tensor b;
  int stride = 1;

  Conv1dLayer() = default;
  Conv1dLayer(ParamStore& ps, const std::string& prefix, long cin, long cout,
              long k, int stride, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct Conv3dLayer {
  Tensor w;  // (Cout, Cin, 3,3,3)
  Tensor b;

  Conv3dLayer() = default;
  Conv3dLayer(ParamStore& ps, const std::string& prefix, long cin, long cout,
              Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Pre-LN transformer encoder layer. Optional FiLM scale/shift (B, dim)
/// modulates the post-layernorm activations of both sublayers.
struct TransformerLayer {
  Linear wq, wk, wv, wo, ff1, ff2;
  long dim = 0;
  int heads = 1;
  bool gelu_ff = true;

  TransformerLayer() = default;
  TransformerLayer(ParamStore& ps, const std::string& prefix, long dim,
                   int heads, bool gelu_ff, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor* film_scale = nullptr,
                 const Tensor* film_shift = nullptr) const;
};

struct TransformerStack {
  std::vector<TransformerLayer> layers;

  TransformerStack() = default;
  TransformerStack(ParamStore& ps, const std::string& prefix, int depth,
                   long dim, int heads, bool gelu_ff, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

/// Constant (T, dim) sinusoidal position table.
Tensor sinusoidal_positions(long t, long dim);

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Decoupled-weight-decay Adam. Moments live per parameter name.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params);
  /// Steps only parameters for which `train(name)` is true (frozen stages).
  void step(ParamStore& params,
            const std::function<bool(const std::string&)>& train);
  long step_count() const { return step_; }
  AdamWConfig& config() { return cfg_; }

 private:
  AdamWConfig cfg_;
  long step_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments_;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  long checked_coords = 0;
};

/// Centered finite differences against the analytic gradient on a sampled
/// subset of coordinates (at least min_coords across all params).
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double epsilon = 1e-5, long min_coords = 64,
                           Rng* rng = nullptr);

}  // namespace hf
