#include "humanflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace hf {

long numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& msg) {
  throw TensorError(op + ": " + msg);
}

void check(bool ok, const std::string& op, const std::string& msg) {
  if (!ok) fail(op, msg);
}

std::vector<long> strides_of(const Shape& s) {
  std::vector<long> st(s.size());
  long acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return st;
}

std::shared_ptr<TensorNode> make_node(Shape shape) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(numel(n->shape)), 0.0);
  return n;
}

bool track(const std::shared_ptr<TensorNode>& n) {
  return n->requires_grad || n->backward_fn;
}

// Wires parents and grad flag; backward_fn set by caller.
Tensor make_op(Shape shape, std::vector<std::shared_ptr<TensorNode>> parents,
               std::function<void(TensorNode&)> bw) {
  auto n = make_node(std::move(shape));
  bool any = false;
  for (const auto& p : parents) any = any || track(p);
  if (any) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
    n->requires_grad = false;
  }
  return Tensor(n);
}

int norm_axis(int axis, int ndim, const std::string& op) {
  if (axis < 0) axis += ndim;
  check(axis >= 0 && axis < ndim, op, "axis out of range");
  return axis;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape) { return Tensor(make_node(shape)); }

Tensor Tensor::full(const Shape& shape, double v) {
  auto n = make_node(shape);
  std::fill(n->value.begin(), n->value.end(), v);
  return Tensor(n);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data) {
  if (static_cast<long>(data.size()) != numel(shape))
    throw TensorError("from_data: size mismatch for shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value = std::move(data);
  return Tensor(n);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev) {
  auto n = make_node(shape);
  for (double& v : n->value) v = rng.normal(0.0, stddev);
  return Tensor(n);
}

double Tensor::item() const {
  if (n_->value.size() != 1) throw TensorError("item: tensor is not scalar");
  return n_->value[0];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  n_->requires_grad = flag;
  if (flag) n_->ensure_grad();
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (n_->grad.size() != n_->value.size())
    throw TensorError("grad: no gradient accumulated");
  return n_->grad;
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (n_->value.size() != 1) throw TensorError("backward: loss must be scalar");
  if (!std::isfinite(n_->value[0]))
    throw TensorError("backward: non-finite loss");

  // Iterative post-order topo sort (graphs can be deep).
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  seen.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx++].get();
      if (!seen.count(p) && (p->backward_fn || p->requires_grad)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode* node : order) node->ensure_grad();
  n_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---------------------------------------------------------------------------
// Broadcast helpers

namespace {

// Left-pad b's shape to a's rank; each axis must be equal or 1.
struct BroadcastPlan {
  std::vector<long> b_stride;  // stride into b per output axis (0 where broadcast)
  bool identity;
};

BroadcastPlan broadcast_plan(const Shape& a, const Shape& b,
                             const std::string& op) {
  check(b.size() <= a.size(), op,
        "cannot broadcast " + shape_str(b) + " to " + shape_str(a));
  const size_t pad = a.size() - b.size();
  auto bst = strides_of(b);
  BroadcastPlan plan;
  plan.b_stride.assign(a.size(), 0);
  plan.identity = (a == b);
  for (size_t i = 0; i < a.size(); ++i) {
    if (i < pad) continue;
    const long bd = b[i - pad];
    check(bd == a[i] || bd == 1, op,
          "cannot broadcast " + shape_str(b) + " to " + shape_str(a));
    plan.b_stride[i] = (bd == 1) ? 0 : bst[i - pad];
  }
  return plan;
}

template <typename Fwd>
void broadcast_loop(const Shape& out_shape, const BroadcastPlan& plan,
                    Fwd&& fn) {
  const long n = numel(out_shape);
  const auto ost = strides_of(out_shape);
  const int nd = static_cast<int>(out_shape.size());
  std::vector<long> idx(static_cast<size_t>(nd), 0);
  for (long i = 0; i < n; ++i) {
    long bi = 0;
    long rem = i;
    for (int d = 0; d < nd; ++d) {
      const long id = rem / ost[static_cast<size_t>(d)];
      rem -= id * ost[static_cast<size_t>(d)];
      bi += id * plan.b_stride[static_cast<size_t>(d)];
    }
    fn(i, bi);
  }
}

Tensor binary_broadcast(const Tensor& a, const Tensor& b, const std::string& op,
                        double (*fwd)(double, double),
                        void (*bwd)(double, double, double, double&, double&)) {
  auto an = a.node();
  auto bn = b.node();
  const auto plan = broadcast_plan(an->shape, bn->shape, op);
  auto out = make_op(
      an->shape, {an, bn}, [an, bn, plan, bwd](TensorNode& self) {
        const bool need_a = track(an);
        const bool need_b = track(bn);
        if (need_a) an->ensure_grad();
        if (need_b) bn->ensure_grad();
        if (plan.identity) {
          for (size_t i = 0; i < self.value.size(); ++i) {
            double ga = 0, gb = 0;
            bwd(an->value[i], bn->value[i], self.grad[i], ga, gb);
            if (need_a) an->grad[i] += ga;
            if (need_b) bn->grad[i] += gb;
          }
        } else {
          broadcast_loop(self.shape, plan, [&](long i, long bi) {
            double ga = 0, gb = 0;
            bwd(an->value[static_cast<size_t>(i)],
                bn->value[static_cast<size_t>(bi)],
                self.grad[static_cast<size_t>(i)], ga, gb);
            if (need_a) an->grad[static_cast<size_t>(i)] += ga;
            if (need_b) bn->grad[static_cast<size_t>(bi)] += gb;
          });
        }
      });
  auto on = out.node();
  if (plan.identity) {
    for (size_t i = 0; i < on->value.size(); ++i)
      on->value[i] = fwd(an->value[i], bn->value[i]);
  } else {
    broadcast_loop(on->shape, plan, [&](long i, long bi) {
      on->value[static_cast<size_t>(i)] =
          fwd(an->value[static_cast<size_t>(i)],
              bn->value[static_cast<size_t>(bi)]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& ga, double& gb) {
        ga = g;
        gb = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& ga, double& gb) {
        ga = g;
        gb = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& ga, double& gb) {
        ga = g * y;
        gb = g * x;
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
  auto on = out.node();
  for (size_t i = 0; i < on->value.size(); ++i) on->value[i] = an->value[i] + s;
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [an, s](TensorNode& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += s * self.grad[i];
  });
  auto on = out.node();
  for (size_t i = 0; i < on->value.size(); ++i) on->value[i] = s * an->value[i];
  return out;
}

// ---------------------------------------------------------------------------
// Matmul family

namespace {

void gemm(const double* A, const double* B, double* C, long m, long k, long n,
          bool transA, bool transB, bool accumulate) {
  if (!accumulate) std::fill(C, C + m * n, 0.0);
  for (long i = 0; i < m; ++i) {
    for (long p = 0; p < k; ++p) {
      const double av = transA ? A[p * m + i] : A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = transB ? B + p : B + p * n;
      double* crow = C + i * n;
      if (transB) {
        for (long j = 0; j < n; ++j) crow[j] += av * B[j * k + p];
      } else {
        for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto an = a.node();
  auto bn = b.node();
  const int ad = a.ndim();
  const int bd = b.ndim();
  check((ad == 2 && bd == 2) || (ad == 3 && bd == 3) || (ad == 3 && bd == 2),
        "matmul",
        "unsupported ranks " + shape_str(an->shape) + " x " +
            shape_str(bn->shape));
  const long m = an->shape[static_cast<size_t>(ad - 2)];
  const long k = an->shape[static_cast<size_t>(ad - 1)];
  const long kb = bn->shape[static_cast<size_t>(bd - 2)];
  const long n = bn->shape[static_cast<size_t>(bd - 1)];
  check(k == kb, "matmul",
        "inner dims differ: " + shape_str(an->shape) + " x " +
            shape_str(bn->shape));
  long batch = 1;
  Shape out_shape;
  if (ad == 3) {
    batch = an->shape[0];
    if (bd == 3)
      check(bn->shape[0] == batch, "matmul", "batch dims differ");
    out_shape = {batch, m, n};
  } else {
    out_shape = {m, n};
  }
  const bool b_batched = (bd == 3);

  auto out = make_op(
      out_shape, {an, bn},
      [an, bn, m, k, n, batch, b_batched](TensorNode& self) {
        const bool need_a = track(an);
        const bool need_b = track(bn);
        if (need_a) an->ensure_grad();
        if (need_b) bn->ensure_grad();
        for (long bi = 0; bi < batch; ++bi) {
          const double* A = an->value.data() + bi * m * k;
          const double* B = bn->value.data() + (b_batched ? bi * k * n : 0);
          const double* G = self.grad.data() + bi * m * n;
          if (need_a) {
            // dA = G * B^T
            double* dA = an->grad.data() + bi * m * k;
            for (long i = 0; i < m; ++i)
              for (long j = 0; j < k; ++j) {
                double acc = 0;
                for (long p = 0; p < n; ++p)
                  acc += G[i * n + p] * B[j * n + p];
                dA[i * k + j] += acc;
              }
          }
          if (need_b) {
            // dB += A^T * G
            double* dB = bn->grad.data() + (b_batched ? bi * k * n : 0);
            for (long i = 0; i < k; ++i)
              for (long j = 0; j < n; ++j) {
                double acc = 0;
                for (long p = 0; p < m; ++p)
                  acc += A[p * k + i] * G[p * n + j];
                dB[i * n + j] += acc;
              }
          }
        }
      });
  auto on = out.node();
  for (long bi = 0; bi < batch; ++bi) {
    gemm(an->value.data() + bi * m * k,
         bn->value.data() + (b_batched ? bi * k * n : 0),
         on->value.data() + bi * m * n, m, k, n, false, false, false);
  }
  return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  auto an = a.node();
  const int nd = a.ndim();
  check(static_cast<int>(perm.size()) == nd, "permute", "perm rank mismatch");
  Shape out_shape(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i)
    out_shape[static_cast<size_t>(i)] = an->shape[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  const auto ist = strides_of(an->shape);
  const auto ost = strides_of(out_shape);
  // Map output linear index -> input linear index.
  std::vector<long> in_stride_per_out_axis(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i)
    in_stride_per_out_axis[static_cast<size_t>(i)] =
        ist[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  const long n = numel(out_shape);

  auto index_map = [nd, ost, in_stride_per_out_axis](long oi) {
    long rem = oi;
    long ii = 0;
    for (int d = 0; d < nd; ++d) {
      const long id = rem / ost[static_cast<size_t>(d)];
      rem -= id * ost[static_cast<size_t>(d)];
      ii += id * in_stride_per_out_axis[static_cast<size_t>(d)];
    }
    return ii;
  };

  auto out = make_op(out_shape, {an}, [an, index_map, n](TensorNode& self) {
    an->ensure_grad();
    for (long oi = 0; oi < n; ++oi)
      an->grad[static_cast<size_t>(index_map(oi))] +=
          self.grad[static_cast<size_t>(oi)];
  });
  auto on = out.node();
  for (long oi = 0; oi < n; ++oi)
    on->value[static_cast<size_t>(oi)] =
        an->value[static_cast<size_t>(index_map(oi))];
  return out;
}

Tensor transpose_last2(const Tensor& a) {
  std::vector<int> perm(static_cast<size_t>(a.ndim()));
  for (int i = 0; i < a.ndim(); ++i) perm[static_cast<size_t>(i)] = i;
  std::swap(perm[static_cast<size_t>(a.ndim() - 1)],
            perm[static_cast<size_t>(a.ndim() - 2)]);
  return permute(a, perm);
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  auto an = a.node();
  check(numel(shape) == a.size(), "reshape",
        "numel mismatch " + shape_str(an->shape) + " -> " + shape_str(shape));
  auto out = make_op(shape, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
  out.node()->value = an->value;
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor relu(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
  });
  auto on = out.node();
  for (size_t i = 0; i < on->value.size(); ++i)
    on->value[i] = an->value[i] > 0.0 ? an->value[i] : 0.0;
  return out;
}

Tensor sqrt_t(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double y = std::sqrt(std::max(an->value[i], 0.0));
      an->grad[i] += self.grad[i] * 0.5 / std::max(y, 1e-12);
    }
  });
  auto on = out.node();
  for (size_t i = 0; i < on->value.size(); ++i) {
    if (an->value[i] < 0.0)
      throw TensorError("sqrt: negative input");
    on->value[i] = std::sqrt(an->value[i]);
  }
  return out;
}

Tensor gelu(const Tensor& a) {
  // Exact erf form: x * Phi(x).
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double x = an->value[i];
      const double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      an->grad[i] += self.grad[i] * (phi + x * pdf);
    }
  });
  auto on = out.node();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (size_t i = 0; i < on->value.size(); ++i) {
    const double x = an->value[i];
    on->value[i] = x * 0.5 * (1.0 + std::erf(x * inv_sqrt2));
  }
  return out;
}

namespace {

// Iterate over all "rows" along `axis`: outer x axis_len x inner layout.
struct AxisView {
  long outer, len, inner;
};

AxisView axis_view(const Shape& s, int axis) {
  AxisView v{1, s[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i)
    v.inner *= s[i];
  return v;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  auto an = a.node();
  const int ax = norm_axis(axis, a.ndim(), "softmax");
  const AxisView v = axis_view(an->shape, ax);
  auto out_t = make_op(an->shape, {an}, [an, v](TensorNode& self) {
    an->ensure_grad();
    for (long o = 0; o < v.outer; ++o)
      for (long in = 0; in < v.inner; ++in) {
        const long base = o * v.len * v.inner + in;
        double dot = 0;
        for (long j = 0; j < v.len; ++j) {
          const size_t idx = static_cast<size_t>(base + j * v.inner);
          dot += self.grad[idx] * self.value[idx];
        }
        for (long j = 0; j < v.len; ++j) {
          const size_t idx = static_cast<size_t>(base + j * v.inner);
          an->grad[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
  });
  auto on = out_t.node();
  for (long o = 0; o < v.outer; ++o)
    for (long in = 0; in < v.inner; ++in) {
      const long base = o * v.len * v.inner + in;
      double mx = -1e300;
      for (long j = 0; j < v.len; ++j)
        mx = std::max(mx, an->value[static_cast<size_t>(base + j * v.inner)]);
      double sum = 0;
      for (long j = 0; j < v.len; ++j) {
        const size_t idx = static_cast<size_t>(base + j * v.inner);
        on->value[idx] = std::exp(an->value[idx] - mx);
        sum += on->value[idx];
      }
      const double inv = 1.0 / sum;
      for (long j = 0; j < v.len; ++j)
        on->value[static_cast<size_t>(base + j * v.inner)] *= inv;
    }
  return out_t;
}

Tensor layernorm(const Tensor& a, int axis, double eps) {
  auto an = a.node();
  const int ax = norm_axis(axis, a.ndim(), "layernorm");
  const AxisView v = axis_view(an->shape, ax);
  // Cache per-row mean and inv-std for backward.
  auto stats = std::make_shared<std::vector<double>>(
      static_cast<size_t>(v.outer * v.inner * 2));
  auto out_t = make_op(an->shape, {an}, [an, v, stats](TensorNode& self) {
    an->ensure_grad();
    const double n = static_cast<double>(v.len);
    for (long o = 0; o < v.outer; ++o)
      for (long in = 0; in < v.inner; ++in) {
        const long base = o * v.len * v.inner + in;
        const size_t si = static_cast<size_t>((o * v.inner + in) * 2);
        const double mean = (*stats)[si];
        const double istd = (*stats)[si + 1];
        double gsum = 0, gxsum = 0;
        for (long j = 0; j < v.len; ++j) {
          const size_t idx = static_cast<size_t>(base + j * v.inner);
          const double xh = (an->value[idx] - mean) * istd;
          gsum += self.grad[idx];
          gxsum += self.grad[idx] * xh;
        }
        for (long j = 0; j < v.len; ++j) {
          const size_t idx = static_cast<size_t>(base + j * v.inner);
          const double xh = (an->value[idx] - mean) * istd;
          an->grad[idx] +=
              istd / n * (n * self.grad[idx] - gsum - xh * gxsum);
        }
      }
  });
  auto on = out_t.node();
  for (long o = 0; o < v.outer; ++o)
    for (long in = 0; in < v.inner; ++in) {
      const long base = o * v.len * v.inner + in;
      double mean = 0;
      for (long j = 0; j < v.len; ++j)
        mean += an->value[static_cast<size_t>(base + j * v.inner)];
      mean /= static_cast<double>(v.len);
      double var = 0;
      for (long j = 0; j < v.len; ++j) {
        const double d = an->value[static_cast<size_t>(base + j * v.inner)] - mean;
        var += d * d;
      }
      var /= static_cast<double>(v.len);
      const double istd = 1.0 / std::sqrt(var + eps);
      const size_t si = static_cast<size_t>((o * v.inner + in) * 2);
      (*stats)[si] = mean;
      (*stats)[si + 1] = istd;
      for (long j = 0; j < v.len; ++j) {
        const size_t idx = static_cast<size_t>(base + j * v.inner);
        on->value[idx] = (an->value[idx] - mean) * istd;
      }
    }
  return out_t;
}

// ---------------------------------------------------------------------------
// Convolutions

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  check(x.ndim() == 3, "conv1d", "input must be (B,C,L), got " + shape_str(xn->shape));
  check(w.ndim() == 3 && wn->shape[2] >= 1 && wn->shape[2] <= 3, "conv1d",
        "weight must be (Cout,Cin,K<=3), got " + shape_str(wn->shape));
  check(stride == 1 || stride == 2, "conv1d", "stride must be 1 or 2");
  const long B = xn->shape[0], Cin = xn->shape[1], L = xn->shape[2];
  const long Cout = wn->shape[0], K = wn->shape[2];
  check(wn->shape[1] == Cin, "conv1d",
        "channel mismatch " + shape_str(xn->shape) + " vs " + shape_str(wn->shape));
  check(b.ndim() == 1 && bn->shape[0] == Cout, "conv1d", "bias shape mismatch");
  const long pad = (K == 3) ? 1 : 0;
  const long Lout = (L + 2 * pad - K) / stride + 1;

  auto out = make_op(
      {B, Cout, Lout}, {xn, wn, bn},
      [xn, wn, bn, B, Cin, Cout, L, Lout, K, pad, stride](TensorNode& self) {
        const bool nx = track(xn), nw = track(wn), nb = track(bn);
        if (nx) xn->ensure_grad();
        if (nw) wn->ensure_grad();
        if (nb) bn->ensure_grad();
        for (long bi = 0; bi < B; ++bi)
          for (long co = 0; co < Cout; ++co)
            for (long lo = 0; lo < Lout; ++lo) {
              const double g =
                  self.grad[static_cast<size_t>((bi * Cout + co) * Lout + lo)];
              if (g == 0.0) continue;
              if (nb) bn->grad[static_cast<size_t>(co)] += g;
              for (long ci = 0; ci < Cin; ++ci)
                for (long k = 0; k < K; ++k) {
                  const long li = lo * stride + k - pad;
                  if (li < 0 || li >= L) continue;
                  const size_t xi = static_cast<size_t>((bi * Cin + ci) * L + li);
                  const size_t wi = static_cast<size_t>((co * Cin + ci) * K + k);
                  if (nx) xn->grad[xi] += g * wn->value[wi];
                  if (nw) wn->grad[wi] += g * xn->value[xi];
                }
            }
      });
  auto on = out.node();
  for (long bi = 0; bi < B; ++bi)
    for (long co = 0; co < Cout; ++co)
      for (long lo = 0; lo < Lout; ++lo) {
        double acc = bn->value[static_cast<size_t>(co)];
        for (long ci = 0; ci < Cin; ++ci)
          for (long k = 0; k < K; ++k) {
            const long li = lo * stride + k - pad;
            if (li < 0 || li >= L) continue;
            acc += xn->value[static_cast<size_t>((bi * Cin + ci) * L + li)] *
                   wn->value[static_cast<size_t>((co * Cin + ci) * K + k)];
          }
        on->value[static_cast<size_t>((bi * Cout + co) * Lout + lo)] = acc;
      }
  return out;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b) {
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  check(x.ndim() == 5, "conv3d", "input must be (B,C,D,H,W)");
  check(w.ndim() == 5 && wn->shape[2] == 3 && wn->shape[3] == 3 &&
            wn->shape[4] == 3,
        "conv3d", "weight must be (Cout,Cin,3,3,3)");
  const long B = xn->shape[0], Cin = xn->shape[1];
  const long D = xn->shape[2], H = xn->shape[3], W = xn->shape[4];
  const long Cout = wn->shape[0];
  check(wn->shape[1] == Cin, "conv3d", "channel mismatch");
  check(b.ndim() == 1 && bn->shape[0] == Cout, "conv3d", "bias shape mismatch");

  const long DHW = D * H * W;
  auto out = make_op(
      {B, Cout, D, H, W}, {xn, wn, bn},
      [xn, wn, bn, B, Cin, Cout, D, H, W, DHW](TensorNode& self) {
        const bool nx = track(xn), nw = track(wn), nb = track(bn);
        if (nx) xn->ensure_grad();
        if (nw) wn->ensure_grad();
        if (nb) bn->ensure_grad();
        for (long bi = 0; bi < B; ++bi)
          for (long co = 0; co < Cout; ++co)
            for (long dz = 0; dz < D; ++dz)
              for (long hy = 0; hy < H; ++hy)
                for (long wx = 0; wx < W; ++wx) {
                  const double g = self.grad[static_cast<size_t>(
                      ((bi * Cout + co) * DHW) + (dz * H + hy) * W + wx)];
                  if (g == 0.0) continue;
                  if (nb) bn->grad[static_cast<size_t>(co)] += g;
                  for (long ci = 0; ci < Cin; ++ci)
                    for (long kd = 0; kd < 3; ++kd)
                      for (long kh = 0; kh < 3; ++kh)
                        for (long kw = 0; kw < 3; ++kw) {
                          const long id = dz + kd - 1, ih = hy + kh - 1,
                                     iw = wx + kw - 1;
                          if (id < 0 || id >= D || ih < 0 || ih >= H ||
                              iw < 0 || iw >= W)
                            continue;
                          const size_t xi = static_cast<size_t>(
                              (bi * Cin + ci) * DHW + (id * H + ih) * W + iw);
                          const size_t wi = static_cast<size_t>(
                              ((co * Cin + ci) * 27) + (kd * 3 + kh) * 3 + kw);
                          if (nx) xn->grad[xi] += g * wn->value[wi];
                          if (nw) wn->grad[wi] += g * xn->value[xi];
                        }
                }
      });
  auto on = out.node();
  for (long bi = 0; bi < B; ++bi)
    for (long co = 0; co < Cout; ++co)
      for (long dz = 0; dz < D; ++dz)
        for (long hy = 0; hy < H; ++hy)
          for (long wx = 0; wx < W; ++wx) {
            double acc = bn->value[static_cast<size_t>(co)];
            for (long ci = 0; ci < Cin; ++ci)
              for (long kd = 0; kd < 3; ++kd)
                for (long kh = 0; kh < 3; ++kh)
                  for (long kw = 0; kw < 3; ++kw) {
                    const long id = dz + kd - 1, ih = hy + kh - 1,
                               iw = wx + kw - 1;
                    if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                        iw >= W)
                      continue;
                    acc += xn->value[static_cast<size_t>(
                               (bi * Cin + ci) * DHW + (id * H + ih) * W + iw)] *
                           wn->value[static_cast<size_t>(
                               ((co * Cin + ci) * 27) + (kd * 3 + kh) * 3 + kw)];
                  }
            on->value[static_cast<size_t>((bi * Cout + co) * DHW +
                                          (dz * H + hy) * W + wx)] = acc;
          }
  return out;
}

Tensor upsample_nearest_x2(const Tensor& x) {
  auto xn = x.node();
  check(x.ndim() == 3, "upsample_nearest_x2", "input must be (B,C,L)");
  const long B = xn->shape[0], C = xn->shape[1], L = xn->shape[2];
  auto out = make_op({B, C, 2 * L}, {xn}, [xn, B, C, L](TensorNode& self) {
    xn->ensure_grad();
    for (long i = 0; i < B * C; ++i)
      for (long l = 0; l < L; ++l)
        xn->grad[static_cast<size_t>(i * L + l)] +=
            self.grad[static_cast<size_t>(i * 2 * L + 2 * l)] +
            self.grad[static_cast<size_t>(i * 2 * L + 2 * l + 1)];
  });
  auto on = out.node();
  for (long i = 0; i < B * C; ++i)
    for (long l = 0; l < L; ++l) {
      const double v = xn->value[static_cast<size_t>(i * L + l)];
      on->value[static_cast<size_t>(i * 2 * L + 2 * l)] = v;
      on->value[static_cast<size_t>(i * 2 * L + 2 * l + 1)] = v;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions, slicing

Tensor sum_all(const Tensor& a) {
  auto an = a.node();
  auto out = make_op({1}, {an}, [an](TensorNode& self) {
    an->ensure_grad();
    for (double& g : an->grad) g += self.grad[0];
  });
  double s = 0;
  for (double v : an->value) s += v;
  out.node()->value[0] = s;
  return out;
}

Tensor mean_all(const Tensor& a) {
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_axes(const Tensor& a, const std::vector<int>& axes) {
  auto an = a.node();
  const int nd = a.ndim();
  std::vector<bool> reduce(static_cast<size_t>(nd), false);
  for (int ax : axes)
    reduce[static_cast<size_t>(norm_axis(ax, nd, "mean_axes"))] = true;
  Shape out_shape;
  long count = 1;
  for (int i = 0; i < nd; ++i) {
    if (reduce[static_cast<size_t>(i)])
      count *= an->shape[static_cast<size_t>(i)];
    else
      out_shape.push_back(an->shape[static_cast<size_t>(i)]);
  }
  if (out_shape.empty()) out_shape = {1};
  const auto ist = strides_of(an->shape);
  const auto in_shape = an->shape;
  // Output index for each input index.
  auto out_index = [nd, ist, in_shape, reduce,
                    out_shape](long ii) {
    long rem = ii;
    long oi = 0;
    long mulacc = 1;
    // Build output linear index by scanning non-reduced axes in order.
    std::vector<long> ids(static_cast<size_t>(nd));
    for (int d = 0; d < nd; ++d) {
      ids[static_cast<size_t>(d)] = rem / ist[static_cast<size_t>(d)];
      rem -= ids[static_cast<size_t>(d)] * ist[static_cast<size_t>(d)];
    }
    for (int d = nd - 1; d >= 0; --d) {
      if (reduce[static_cast<size_t>(d)]) continue;
      oi += ids[static_cast<size_t>(d)] * mulacc;
      mulacc *= in_shape[static_cast<size_t>(d)];
    }
    return oi;
  };
  const double inv = 1.0 / static_cast<double>(count);
  const long n = a.size();
  auto out = make_op(out_shape, {an}, [an, out_index, inv, n](TensorNode& self) {
    an->ensure_grad();
    for (long i = 0; i < n; ++i)
      an->grad[static_cast<size_t>(i)] +=
          inv * self.grad[static_cast<size_t>(out_index(i))];
  });
  auto on = out.node();
  for (long i = 0; i < n; ++i)
    on->value[static_cast<size_t>(out_index(i))] +=
        inv * an->value[static_cast<size_t>(i)];
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  check(!parts.empty(), "concat", "no inputs");
  const int nd = parts[0].ndim();
  const int ax = norm_axis(axis, nd, "concat");
  Shape out_shape = parts[0].shape();
  long total = 0;
  for (const auto& p : parts) {
    check(p.ndim() == nd, "concat", "rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != ax)
        check(p.shape()[static_cast<size_t>(d)] ==
                  out_shape[static_cast<size_t>(d)],
              "concat", "non-axis dims differ");
    total += p.dim(ax);
  }
  out_shape[static_cast<size_t>(ax)] = total;

  long outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (int d = ax + 1; d < nd; ++d) inner *= out_shape[static_cast<size_t>(d)];

  std::vector<std::shared_ptr<TensorNode>> pnodes;
  std::vector<long> lens;
  for (const auto& p : parts) {
    pnodes.push_back(p.node());
    lens.push_back(p.dim(ax));
  }
  auto out = make_op(out_shape, pnodes,
                     [pnodes, lens, outer, inner, total](TensorNode& self) {
                       long off = 0;
                       for (size_t pi = 0; pi < pnodes.size(); ++pi) {
                         auto& p = pnodes[pi];
                         if (track(p)) {
                           p->ensure_grad();
                           for (long o = 0; o < outer; ++o)
                             for (long l = 0; l < lens[pi]; ++l)
                               for (long in = 0; in < inner; ++in)
                                 p->grad[static_cast<size_t>(
                                     (o * lens[pi] + l) * inner + in)] +=
                                     self.grad[static_cast<size_t>(
                                         (o * total + off + l) * inner + in)];
                         }
                         off += lens[pi];
                       }
                     });
  auto on = out.node();
  long off = 0;
  for (size_t pi = 0; pi < pnodes.size(); ++pi) {
    for (long o = 0; o < outer; ++o)
      for (long l = 0; l < lens[pi]; ++l)
        for (long in = 0; in < inner; ++in)
          on->value[static_cast<size_t>((o * total + off + l) * inner + in)] =
              pnodes[pi]->value[static_cast<size_t>((o * lens[pi] + l) * inner +
                                                    in)];
    off += lens[pi];
  }
  return out;
}

Tensor slice(const Tensor& a, int axis, long start, long len) {
  auto an = a.node();
  const int nd = a.ndim();
  const int ax = norm_axis(axis, nd, "slice");
  check(start >= 0 && len >= 1 && start + len <= a.dim(ax), "slice",
        "range out of bounds");
  Shape out_shape = an->shape;
  out_shape[static_cast<size_t>(ax)] = len;
  long outer = 1, inner = 1;
  const long alen = a.dim(ax);
  for (int d = 0; d < ax; ++d) outer *= an->shape[static_cast<size_t>(d)];
  for (int d = ax + 1; d < nd; ++d) inner *= an->shape[static_cast<size_t>(d)];

  auto out = make_op(out_shape, {an},
                     [an, outer, inner, alen, start, len](TensorNode& self) {
                       an->ensure_grad();
                       for (long o = 0; o < outer; ++o)
                         for (long l = 0; l < len; ++l)
                           for (long in = 0; in < inner; ++in)
                             an->grad[static_cast<size_t>(
                                 (o * alen + start + l) * inner + in)] +=
                                 self.grad[static_cast<size_t>(
                                     (o * len + l) * inner + in)];
                     });
  auto on = out.node();
  for (long o = 0; o < outer; ++o)
    for (long l = 0; l < len; ++l)
      for (long in = 0; in < inner; ++in)
        on->value[static_cast<size_t>((o * len + l) * inner + in)] =
            an->value[static_cast<size_t>((o * alen + start + l) * inner + in)];
  return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check(a.shape() == b.shape(), "mse",
        "shape mismatch " + shape_str(a.shape()) + " vs " +
            shape_str(b.shape()));
  return mean_all(mul(sub(a, b), sub(a, b)));
}

Tensor embedding(const Tensor& table, const std::vector<long>& ids) {
  auto tn = table.node();
  check(table.ndim() == 2, "embedding", "table must be 2D");
  const long rows = tn->shape[0], dim = tn->shape[1];
  for (long id : ids)
    check(id >= 0 && id < rows, "embedding", "index out of range");
  const long n = static_cast<long>(ids.size());
  auto out = make_op({n, dim}, {tn}, [tn, ids, dim](TensorNode& self) {
    tn->ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      for (long d = 0; d < dim; ++d)
        tn->grad[static_cast<size_t>(ids[i] * dim + d)] +=
            self.grad[i * static_cast<size_t>(dim) + static_cast<size_t>(d)];
  });
  auto on = out.node();
  for (size_t i = 0; i < ids.size(); ++i)
    for (long d = 0; d < dim; ++d)
      on->value[i * static_cast<size_t>(dim) + static_cast<size_t>(d)] =
          tn->value[static_cast<size_t>(ids[i] * dim + d)];
  return out;
}

}  // namespace hf
