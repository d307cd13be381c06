#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usrl/errors.hpp"
#include "usrl/random.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

/// A named model weight with its gradient accumulator.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  bool trainable = true;

  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Owns every parameter of a model. Creation order is the deterministic
/// iteration order used by initialization and the optimizer; names are the
/// stable identity used by checkpoints and freeze policies.
template <typename S>
class ParameterSet {
 public:
  Parameter<S>* create(std::string name, std::vector<std::size_t> shape) {
    if (by_name_.count(name))
      throw ConfigError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<S>>(name, std::move(shape)));
    Parameter<S>* p = params_.back().get();
    by_name_[p->name] = p;
    return p;
  }

  Parameter<S>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  std::vector<Parameter<S>*> all() const {
    std::vector<Parameter<S>*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::size_t count() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p->grad.zero();
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::map<std::string, Parameter<S>*> by_name_;
};

template <typename S>
inline S sigmoid(S x) {
  if (x >= S{0}) {
    const S e = std::exp(-x);
    return S{1} / (S{1} + e);
  }
  const S e = std::exp(x);
  return e / (S{1} + e);
}

template <typename S>
inline S swish_scalar(S x) {
  return x * sigmoid(x);
}

// d/dx [x*sigmoid(x)] = sigmoid(x) + x*sigmoid(x)*(1-sigmoid(x))
template <typename S>
inline S swish_grad_scalar(S x) {
  const S s = sigmoid(x);
  return s + x * s * (S{1} - s);
}

template <typename S>
Tensor<S> swish(const Tensor<S>& x) {
  Tensor<S> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = swish_scalar(x[i]);
  return y;
}

// z is the pre-activation that produced the output; returns dz.
template <typename S>
Tensor<S> swish_backward(const Tensor<S>& z, const Tensor<S>& dout) {
  if (!z.same_shape(dout)) throw ShapeError("swish_backward: shape mismatch");
  Tensor<S> dz(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dout[i] * swish_grad_scalar(z[i]);
  return dz;
}

// y_i = W x_i + b, W: out x in, b: out
template <typename S>
Tensor<S> linear_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (x.cols() != w.cols() || b.size() != w.rows())
    throw ShapeError("linear: x" + shape_string(x.shape()) + " W" + shape_string(w.shape()) +
                     " b" + shape_string(b.shape()));
  Tensor<S> y = matmul_nt(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) axpy(S{1}, b.data(), y.row(i), b.size());
  return y;
}

/// Affine map backed by a Parameter pair. backward() accumulates parameter
/// gradients and returns dx.
template <typename S>
struct Linear {
  Parameter<S>* w = nullptr;  // out x in
  Parameter<S>* b = nullptr;  // out

  Linear() = default;
  Linear(ParameterSet<S>& params, const std::string& prefix, std::size_t out, std::size_t in)
      : w(params.create(prefix + ".W", {out, in})), b(params.create(prefix + ".b", {out})) {}

  std::size_t in_dim() const { return w->value.cols(); }
  std::size_t out_dim() const { return w->value.rows(); }

  void init(StableRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    for (std::size_t i = 0; i < w->value.size(); ++i)
      w->value[i] = static_cast<S>(rng.uniform(-bound, bound));
    b->value.zero();
  }

  Tensor<S> forward(const Tensor<S>& x) const { return linear_forward(x, w->value, b->value); }

  Tensor<S> backward(const Tensor<S>& x, const Tensor<S>& dy) {
    if (dy.cols() != out_dim() || x.cols() != in_dim() || dy.rows() != x.rows())
      throw ShapeError("linear backward: shape mismatch");
    outer_acc(dy, x, w->grad);
    for (std::size_t i = 0; i < dy.rows(); ++i) axpy(S{1}, dy.row(i), b->grad.data(), dy.cols());
    Tensor<S> dx(x.rows(), x.cols());
    matmul_nn_acc(dy, w->value, dx);
    return dx;
  }
};

template <typename S>
struct XentResult {
  double mean_loss = 0.0;   // mean over masked rows; 0 when no row is masked in
  double sum_loss = 0.0;    // sum over masked rows
  std::size_t count = 0;    // masked-in rows
  Tensor<S> dlogits;        // d(mean_loss)/dlogits
};

// Accumulates d(sum of row losses)/dlogits scaled by `scale` into dlogits
// (when non-null) and returns {sum, count}. Masked-out rows contribute
// nothing. The mean-semantics wrapper below is the spec-facing operation.
template <typename S>
std::pair<double, std::size_t> softmax_xent_sum(const Tensor<S>& logits,
                                                const std::vector<int>& targets,
                                                const std::vector<char>& mask, S scale,
                                                Tensor<S>* dlogits) {
  const std::size_t n = logits.rows(), c = logits.cols();
  if (targets.size() != n || mask.size() != n)
    throw ShapeError("softmax_xent: " + std::to_string(n) + " rows, " +
                     std::to_string(targets.size()) + " targets, " +
                     std::to_string(mask.size()) + " mask entries");
  if (dlogits && !dlogits->same_shape(logits))
    throw ShapeError("softmax_xent: dlogits shape mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> probs(c);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c)
      throw DataError("softmax_xent: target " + std::to_string(targets[i]) +
                      " out of range [0, " + std::to_string(c) + ") at row " +
                      std::to_string(i));
    const S* lr = logits.row(i);
    double maxv = static_cast<double>(lr[0]);
    for (std::size_t j = 1; j < c; ++j) maxv = std::max(maxv, static_cast<double>(lr[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[j] = std::exp(static_cast<double>(lr[j]) - maxv);
      z += probs[j];
    }
    sum += std::log(z) - (static_cast<double>(lr[targets[i]]) - maxv);
    ++count;
    if (dlogits) {
      S* dr = dlogits->row(i);
      for (std::size_t j = 0; j < c; ++j) dr[j] += scale * static_cast<S>(probs[j] / z);
      dr[targets[i]] -= scale;
    }
  }
  return {sum, count};
}

/// Mean cross-entropy over masked rows plus its gradient. Zero masked rows
/// yield loss 0 with a zero gradient.
template <typename S>
XentResult<S> softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                                    const std::vector<char>& mask) {
  XentResult<S> out;
  out.dlogits = Tensor<S>(logits.shape());
  auto [sum, count] = softmax_xent_sum<S>(logits, targets, mask, S{1}, &out.dlogits);
  out.sum_loss = sum;
  out.count = count;
  if (count == 0) {
    out.dlogits.zero();
    return out;
  }
  out.mean_loss = sum / static_cast<double>(count);
  const S inv = S{1} / static_cast<S>(count);
  for (std::size_t i = 0; i < out.dlogits.size(); ++i) out.dlogits[i] *= inv;
  return out;
}

}  // namespace usrl
