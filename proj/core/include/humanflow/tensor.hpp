#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "humanflow/rng.hpp"

namespace hf {

using Shape = std::vector<long>;

long numel(const Shape& s);
std::string shape_str(const Shape& s);

class TensorError : public std::runtime_error {
 public:
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Dense f64 tensor with reverse-mode autodiff. Value semantics on the
/// handle; the node (value, grad, graph edges) is shared. Graphs are
/// rebuilt per forward call (define-by-run).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double v);
  static Tensor from_data(const Shape& shape, std::vector<double> data);
  static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  long dim(int axis) const { return n_->shape.at(static_cast<size_t>(axis)); }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  long size() const { return static_cast<long>(n_->value.size()); }

  double* data() { return n_->value.data(); }
  const double* data() const { return n_->value.data(); }
  std::vector<double>& values() { return n_->value; }
  const std::vector<double>& values() const { return n_->value; }
  double item() const;

  Tensor& set_requires_grad(bool flag);
  bool requires_grad() const { return n_->requires_grad; }
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Reverse sweep from a scalar. Accumulates (+=) into every
  /// requires_grad node reachable from this one.
  void backward();

  std::shared_ptr<TensorNode> node() const { return n_; }
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> n_;
};

// Elementwise / broadcast. `b` must be numpy-broadcastable to `a`'s shape
// (after left-padding with 1s, each axis equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// 2D x 2D, 3D x 3D (matching batch), or 3D x 2D (shared weight).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor reshape(const Tensor& a, const Shape& shape);

Tensor relu(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);
Tensor layernorm(const Tensor& a, int axis, double eps = 1e-5);

// x (B,C,L), w (Cout,Cin,3), b (Cout); padding 1, stride in {1,2}.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
// x (B,C,D,H,W), w (Cout,Cin,3,3,3), b (Cout); kernel 3, stride 1, padding 1.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b);
// (B,C,L) -> (B,C,2L)
Tensor upsample_nearest_x2(const Tensor& x);

Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
// Mean over the given axes (kept axes collapse away).
Tensor mean_axes(const Tensor& a, const std::vector<int>& axes);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, long start, long len);
Tensor mse(const Tensor& a, const Tensor& b);
// Row lookup into a (rows, dim) table; output (ids.size(), dim).
Tensor embedding(const Tensor& table, const std::vector<long>& ids);

}  // namespace hf
